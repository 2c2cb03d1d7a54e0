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

"""Text disentanglement network.

Each adapted text feature is split by a shared common encoder and a shared
specific encoder. Two penalties shape the split:
- orthogonal loss: common parts of different texts should agree, specific
  parts should be orthogonal
- mutual-information penalty: common and specific parts of the same text
  should be decorrelated across the batch

The stage-1 feature concatenates [common, specific] of each text (zero block
for an absent text) and projects the result to the shared stage dimension.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import torch
from torch import Tensor, nn

from progdx.core.exceptions import ConfigurationError, DegenerateBatchError, InputError, ShapeError
from progdx.core.textualize import TEXT_COMPONENTS


@dataclass(frozen=True)
class DisentangledPair:
    """Common and specific parts of one text feature (or a batch of them)."""

    common: Tensor
    specific: Tensor
    source: str


def _two_layer(d_in: int, hidden: int, d_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(d_in, hidden), nn.ReLU(), nn.Linear(hidden, d_out))


class TextDisentangler(nn.Module):
    """Common encoder and specific encoder, shared across the three texts."""

    def __init__(self, d_a: int = 128, d_c: int = 64, d_s: int = 64, hidden: int | None = None) -> None:
        super().__init__()
        if d_c + d_s != d_a:
            raise ConfigurationError("d_c/d_s", f"d_c + d_s must equal d_a ({d_c} + {d_s} != {d_a})")
        hidden = hidden or d_a
        self.d_a = d_a
        self.common_encoder = _two_layer(d_a, hidden, d_c)
        self.specific_encoder = _two_layer(d_a, hidden, d_s)

    def forward(self, f: Tensor, source: str = "p") -> DisentangledPair:
        if f.shape[-1] != self.d_a:
            raise ShapeError("disentangler input", self.d_a, f.shape[-1])
        return DisentangledPair(
            common=self.common_encoder(f), specific=self.specific_encoder(f), source=source
        )

    def split_all(self, adapted: Tensor) -> list[DisentangledPair]:
        """Disentangle a (B, 3, d_a) stack into pairs ordered (p, h, d)."""
        return [self(adapted[:, i], source) for i, source in enumerate(TEXT_COMPONENTS)]


def safe_cosine(a: Tensor, b: Tensor) -> Tensor:
    """Cosine similarity over the last dimension; 0 when either vector is zero."""
    denom = a.norm(dim=-1) * b.norm(dim=-1)
    nonzero = denom > 0
    dot = (a * b).sum(dim=-1)
    return torch.where(nonzero, dot / torch.where(nonzero, denom, torch.ones_like(denom)), torch.zeros_like(dot))


def orthogonal_loss(pairs: Sequence[DisentangledPair], mask: Tensor | None = None) -> Tensor:
    """Orthogonal loss over all ordered pairs of distinct texts.

    (1/2) * sum over ordered pairs (i, j), i != j, of
    -cos(common_i, common_j) + |cos(specific_i, specific_j)|.

    Args:
        pairs: One pair per present text; batched pairs carry (B, d) tensors
        mask: Optional (B, len(pairs)) presence mask; a term only counts when
            both texts are present for that subject

    Returns:
        Scalar loss, averaged over the batch for batched input; 0 with fewer
        than two pairs
    """
    if len(pairs) < 2:
        if pairs:
            return pairs[0].common.new_zeros(())
        return torch.zeros(())

    total: Tensor | None = None
    for i, a in enumerate(pairs):
        for j, b in enumerate(pairs):
            if i == j:
                continue
            term = -safe_cosine(a.common, b.common) + safe_cosine(a.specific, b.specific).abs()
            if mask is not None:
                term = term * (mask[..., i] & mask[..., j]).to(term.dtype)
            total = term if total is None else total + term
    assert total is not None
    loss = 0.5 * total
    return loss.mean() if loss.dim() > 0 else loss


# Smallest spread a column is divided by during standardization
STD_FLOOR = 1e-2

MIReduction = Literal["mean", "sum"]


def _standardize_columns(x: Tensor) -> Tensor:
    mean = x.mean(dim=0, keepdim=True)
    var = x.var(dim=0, unbiased=False, keepdim=True)
    # Clamp the variance, not the std: std has an infinite derivative at 0
    return (x - mean) / var.clamp_min(STD_FLOOR**2).sqrt()


def mi_penalty(batch_common: Tensor, batch_specific: Tensor, reduction: MIReduction = "mean") -> Tensor:
    """Decorrelation surrogate for the mutual information of common and specific parts.

    Squared entries of the cross-covariance of the column-standardized (n, d_c)
    and (n, d_s) matrices. "sum" gives the squared Frobenius norm; "mean"
    divides it by d_c * d_s, so the penalty stays in [0, 1] whatever the
    feature widths. Columns with a spread below STD_FLOOR are scaled by the
    floor, and zero-variance columns contribute 0.

    Raises:
        DegenerateBatchError: If n < 2
        ShapeError: If the row counts differ
        ConfigurationError: If reduction is unknown
    """
    n = batch_common.shape[0]
    if n < 2:
        raise DegenerateBatchError(n)
    if batch_specific.shape[0] != n:
        raise ShapeError("mi_penalty rows", n, batch_specific.shape[0])
    zc = _standardize_columns(batch_common)
    zs = _standardize_columns(batch_specific)
    squared = (zc.T @ zs / n) ** 2
    if reduction == "mean":
        return squared.mean()
    if reduction == "sum":
        return squared.sum()
    raise ConfigurationError("reduction", f"must be 'mean' or 'sum', got {reduction!r}")


def mi_penalty_total(
    pairs: Sequence[DisentangledPair], mask: Tensor, reduction: MIReduction = "mean"
) -> Tensor:
    """Sum of mi_penalty over the texts, using the rows where each text is present.

    Texts present in fewer than two rows of the batch are skipped.
    """
    total = pairs[0].common.new_zeros(())
    for i, pair in enumerate(pairs):
        rows = mask[:, i]
        if int(rows.sum()) < 2:
            continue
        total = total + mi_penalty(pair.common[rows], pair.specific[rows], reduction)
    return total


class Stage1Projector(nn.Module):
    """Assembles the stage-1 feature from the three text blocks."""

    def __init__(self, d_a: int = 128, d: int = 128) -> None:
        super().__init__()
        self.d_a = d_a
        self.projection = nn.Linear(len(TEXT_COMPONENTS) * d_a, d)

    @staticmethod
    def _check_mask(mask: Tensor) -> None:
        if mask.shape[-1] != len(TEXT_COMPONENTS):
            raise ShapeError("text availability mask", len(TEXT_COMPONENTS), mask.shape[-1])
        if not bool(mask.any(dim=-1).all()):
            raise InputError("stage 1 needs at least one tabular text per subject")

    def assemble(self, pairs: Sequence[DisentangledPair], mask: Tensor) -> Tensor:
        """Concatenate masked [common, specific] blocks; (..., 3 * d_a) before projection."""
        self._check_mask(mask)
        if len(pairs) != len(TEXT_COMPONENTS):
            raise ShapeError("disentangled pairs", len(TEXT_COMPONENTS), len(pairs))
        blocks = []
        for i, pair in enumerate(pairs):
            block = torch.cat([pair.common, pair.specific], dim=-1)
            if block.shape[-1] != self.d_a:
                raise ShapeError("text block", self.d_a, block.shape[-1])
            blocks.append(block * mask[..., i : i + 1].to(block.dtype))
        return torch.cat(blocks, dim=-1)

    def assemble_plain(self, adapted: Tensor, mask: Tensor) -> Tensor:
        """Masked concatenation of adapted features, skipping disentanglement."""
        self._check_mask(mask)
        if adapted.shape[-1] != self.d_a:
            raise ShapeError("adapted text feature", self.d_a, adapted.shape[-1])
        masked = adapted * mask.unsqueeze(-1).to(adapted.dtype)
        return masked.flatten(start_dim=-2)

    def forward(self, pairs: Sequence[DisentangledPair], mask: Tensor) -> Tensor:
        return self.projection(self.assemble(pairs, mask))

    def forward_plain(self, adapted: Tensor, mask: Tensor) -> Tensor:
        return self.projection(self.assemble_plain(adapted, mask))


def build_stage1_feature(
    projector: Stage1Projector, pairs: Sequence[DisentangledPair], mask: Tensor
) -> Tensor:
    """Stage-1 feature from disentangled pairs ordered (p, h, d) and their presence mask.

    Raises:
        InputError: If a subject has no text component
        ShapeError: If the block widths do not match the projector
    """
    return projector(pairs, mask)
