# progdx - Progressive single- to multi-modality sub-type diagnosis
# Copyright (C) 2026 progdx contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Fusion of stage features and the two alignment objectives.

- FusionModule: one attention block over the stage features with a learnable
  query, f_r = Q + FFW(Q + ATT(Q, K, V)) where K = V = [f^1..f^k, Q]
- ConcatFusion: concatenation and a linear map, used when fusion is ablated
- alignment_loss: MSE between consecutive stage features, gradient into the
  earlier stage only
- CriteriaEncoder / contrastive_scores / guideline_contrastive_loss: the fused
  feature is scored against the encoded sub-type criteria
"""

import logging
from collections.abc import Sequence

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from progdx.core.encoders import HashingTextEncoder
from progdx.core.exceptions import ConfigurationError, InputError, ShapeError
from progdx.core.guidelines import GuidelineCriterion

logger = logging.getLogger(__name__)

MAX_STAGE_FEATURES = 3
PROBABILITY_FLOOR = 1e-12


def _stack_features(features: Sequence[Tensor], d: int) -> tuple[Tensor, bool]:
    """Stack k features of shape (B, d) or (d,) into (B, k, d)."""
    if not features:
        raise InputError("fusion needs at least one stage feature")
    if len(features) > MAX_STAGE_FEATURES:
        raise InputError(f"fusion takes at most {MAX_STAGE_FEATURES} stage features, got {len(features)}")
    for feature in features:
        if feature.shape[-1] != d:
            raise ShapeError("stage feature", d, feature.shape[-1])
    single = features[0].dim() == 1
    stacked = torch.stack(list(features), dim=-2)
    if single:
        stacked = stacked.unsqueeze(0)
    return stacked, single


class FusionModule(nn.Module):
    """Single attention block with learnable queries and no positional encoding."""

    def __init__(self, d: int = 128, heads: int = 4, ffw_width: int | None = None, n_queries: int = 1) -> None:
        """Initialize the fusion block.

        Args:
            d: Shared stage dimension
            heads: Attention heads; must divide d
            ffw_width: Hidden width of the feed-forward block (default 4 * d)
            n_queries: Learnable query vectors; their outputs are averaged
        """
        super().__init__()
        if d % heads != 0:
            raise ConfigurationError("heads", f"{heads} heads do not divide d = {d}")
        if n_queries < 1:
            raise ConfigurationError("n_queries", f"must be at least 1, got {n_queries}")
        width = ffw_width or 4 * d
        self.d = d
        self.query = nn.Parameter(torch.randn(n_queries, d) / d**0.5)
        self.attention = nn.MultiheadAttention(d, heads, batch_first=True)
        self.ffw = nn.Sequential(nn.Linear(d, width), nn.ReLU(), nn.Linear(width, d))

    def forward(self, features: Sequence[Tensor]) -> Tensor:
        """Fuse 1 to 3 stage features into one d-dimensional vector per subject."""
        stacked, single = _stack_features(features, self.d)
        batch = stacked.shape[0]
        q = self.query.to(stacked.dtype).unsqueeze(0).expand(batch, -1, -1)
        kv = torch.cat([stacked, q], dim=1)
        attended, _ = self.attention(q, kv, kv, need_weights=False)
        fused = q + self.ffw(q + attended)
        out = fused.mean(dim=1)
        return out.squeeze(0) if single else out


class ConcatFusion(nn.Module):
    """Zero-padded concatenation of up to three stage features, linearly mapped to d."""

    def __init__(self, d: int = 128) -> None:
        super().__init__()
        self.d = d
        self.projection = nn.Linear(MAX_STAGE_FEATURES * d, d)

    def forward(self, features: Sequence[Tensor]) -> Tensor:
        stacked, single = _stack_features(features, self.d)
        pad = MAX_STAGE_FEATURES - stacked.shape[1]
        if pad:
            stacked = torch.cat([stacked, stacked.new_zeros(stacked.shape[0], pad, self.d)], dim=1)
        out = self.projection(stacked.flatten(start_dim=1))
        return out.squeeze(0) if single else out


def alignment_loss(f1: Tensor, f2: Tensor | None = None, f3: Tensor | None = None) -> Tensor:
    """Align each stage feature with the next available one.

    MSE(f1, sg(f2)) + MSE(f2, sg(f3)), where sg stops the gradient. Terms
    whose later feature is absent are dropped. Rows of f1, f2 and f3 must
    refer to the same subjects.

    Raises:
        ShapeError: If the features differ in shape
        InputError: If f3 is given without f2
    """
    if f3 is not None and f2 is None:
        raise InputError("alignment with the stage-3 feature needs the stage-2 feature")
    loss = f1.new_zeros(())
    for earlier, later in ((f1, f2), (f2, f3)):
        if earlier is None or later is None:
            continue
        if earlier.shape != later.shape:
            raise ShapeError("aligned stage features", tuple(earlier.shape), tuple(later.shape))
        if earlier.numel() == 0:
            continue
        loss = loss + F.mse_loss(earlier, later.detach())
    return loss


class CriteriaEncoder(nn.Module):
    """Frozen criterion text embeddings with a learnable projection to d.

    The embeddings are a buffer so they travel with the parameters in
    checkpoints.
    """

    criteria_embeddings: Tensor

    def __init__(self, embeddings: Tensor, d: int = 128) -> None:
        super().__init__()
        if embeddings.dim() != 2:
            raise ShapeError("criteria embeddings", 2, embeddings.dim())
        self.register_buffer("criteria_embeddings", embeddings.detach().clone())
        self.projection = nn.Linear(embeddings.shape[1], d)

    @classmethod
    def from_corpus(
        cls, corpus: Sequence[GuidelineCriterion], text_encoder: HashingTextEncoder, d: int = 128
    ) -> "CriteriaEncoder":
        """Encode the criterion texts once with the frozen text encoder."""
        return cls(text_encoder.encode_many([c.text for c in corpus]), d)

    def forward(self) -> Tensor:
        """Unit-norm criterion embeddings, (n_criteria, d)."""
        projected = self.projection(self.criteria_embeddings.to(self.projection.weight.dtype))
        return F.normalize(projected, dim=-1)


def encode_criteria(criteria_encoder: CriteriaEncoder) -> Tensor:
    """Project and normalize the criterion embeddings."""
    return criteria_encoder()


def contrastive_scores(f_r: Tensor, crit: Tensor, tau: float) -> Tensor:
    """Softmax over cosine similarities between fused features and criteria.

    Args:
        f_r: Fused feature (d,) or batch (B, d)
        crit: Unit-norm criteria (n_criteria, d)
        tau: Temperature

    Returns:
        Probabilities over the criteria, (n_criteria,) or (B, n_criteria)

    Raises:
        ConfigurationError: If tau is not positive
        ShapeError: If the feature and criteria dimensions differ
    """
    if tau <= 0:
        raise ConfigurationError("tau", f"temperature must be positive, got {tau}")
    if f_r.shape[-1] != crit.shape[-1]:
        raise ShapeError("fused feature", crit.shape[-1], f_r.shape[-1])
    logits = F.normalize(f_r, dim=-1) @ crit.to(f_r.dtype).T / tau
    return torch.softmax(logits, dim=-1)


def _sum_tolerance(dtype: torch.dtype) -> float:
    return 1e-8 if dtype == torch.float64 else 1e-5


def guideline_contrastive_loss(probs: Tensor, label: Tensor | int) -> Tensor:
    """Negative log probability of the subject's own criterion.

    Args:
        probs: Probabilities (n_criteria,) or batch (B, n_criteria)
        label: Sub-type code, or (B,) codes for a batch

    Returns:
        Scalar, or (B,) per-subject losses

    Raises:
        InputError: If a probability vector does not sum to 1
    """
    sums = probs.detach().sum(dim=-1)
    if bool(((sums - 1.0).abs() > _sum_tolerance(probs.dtype)).any()):
        raise InputError("contrastive probabilities must sum to 1")

    labels = torch.as_tensor(label, device=probs.device, dtype=torch.long)
    if probs.dim() == 1:
        chosen = probs[labels]
    else:
        chosen = probs.gather(-1, labels.view(-1, 1)).squeeze(-1)

    if bool((chosen.detach() < PROBABILITY_FLOOR).any()):
        logger.warning("Probability of the true sub-type fell below %g; clamping", PROBABILITY_FLOOR)
    return -torch.log(chosen.clamp(min=PROBABILITY_FLOOR))
