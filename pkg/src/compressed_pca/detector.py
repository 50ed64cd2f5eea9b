"""Residual statistics, standardization and the one-sided detection rule."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtri

from . import _accel
from .errors import ValidationError
from .model import SpikedModel
from .subspace import SubspaceModel


class StatisticKind(str, Enum):
    UNCOMPRESSED = "uncompressed"
    COMPRESSED_EXACT = "compressed_exact"
    COMPRESSED_ESTIMATED = "compressed_estimated"


@dataclass(frozen=True)
class TestConfig:
    """Constants of the standardized test.

    ``c`` is the compression ratio ``l/p``; ``c = 0`` selects the uncompressed
    statistic.
    """

    __test__ = False  # not a pytest class

    k: int
    alpha: float
    l: int
    c: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 1 <= self.k < self.l:
            raise ValidationError(f"need 1 <= k < l, got k={self.k}, l={self.l}")
        if not self.c >= 0.0:
            raise ValidationError(f"compression ratio c must be >= 0, got {self.c}")

    @property
    def threshold(self) -> float:
        """Upper ``1 - alpha`` standard normal quantile."""
        return float(ndtri(1.0 - self.alpha))

    @property
    def null_mean(self) -> float:
        return float(self.l - self.k)

    @property
    def null_sd(self) -> float:
        return float(np.sqrt(2.0 * (self.l - self.k) * (self.c + 1.0)))


@dataclass(frozen=True)
class DetectionOutcome:
    statistic: float
    standardized: float
    threshold: float
    anomalous: bool
    kind: StatisticKind = StatisticKind.COMPRESSED_EXACT


def residual_statistic(sub: SubspaceModel, y):
    """``|y|^2 - |U_k^T y|^2`` for one vector or a batch of rows.

    Tiny negative values from rounding are clipped to zero.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != sub.p:
        raise ValidationError(
            f"observation length {y.shape[-1]} does not match subspace dimension p={sub.p}"
        )
    if y.ndim == 1:
        q = _accel.residual_norms(y[None, :], sub.basis_k)[0]
        return max(float(q), 0.0)
    return np.maximum(_accel.residual_norms(y, sub.basis_k), 0.0)


def residual_statistic_projector(sub: SubspaceModel, y):
    """``y^T (I - U_k U_k^T) y`` via the explicit residual projector (O(p^2))."""
    y = np.asarray(y, dtype=float)
    m = sub.residual_projector()
    if y.ndim == 1:
        return float(y @ m @ y)
    return np.einsum("ij,jk,ik->i", y, m, y)


def standardize(q, cfg: TestConfig):
    """``(q - (l-k)) / sqrt(2 (l-k) (c+1))``; works on scalars and arrays."""
    out = (np.asarray(q, dtype=float) - cfg.null_mean) / cfg.null_sd
    return float(out) if np.ndim(out) == 0 else out


def standardize_empirical(q, sub: SubspaceModel):
    """Diagnostic variant centred and scaled by the subspace's own tail sums."""
    out = (np.asarray(q, dtype=float) - sub.tail_sum) / np.sqrt(2.0 * sub.tail_sq_sum)
    return float(out) if np.ndim(out) == 0 else out


def decide(q: float, cfg: TestConfig, kind: StatisticKind | None = None) -> DetectionOutcome:
    """Flag ``q`` as anomalous when its standardized value strictly exceeds the threshold."""
    if kind is None:
        kind = StatisticKind.UNCOMPRESSED if cfg.c == 0 else StatisticKind.COMPRESSED_EXACT
    z = standardize(q, cfg)
    t = cfg.threshold
    return DetectionOutcome(float(q), z, t, bool(z > t), kind)


def q_uncompressed(model: SpikedModel, x, k: int):
    """Residual of ``x`` after removing the leading ``k`` eigen-directions of ``Sigma``."""
    if not 1 <= k < model.l:
        raise ValidationError(f"need 1 <= k < l={model.l}, got k={k}")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.l:
        raise ValidationError(f"observation length {x.shape[-1]} does not match l={model.l}")
    if model.basis is None:
        q = np.sum(x[..., k:] ** 2, axis=-1)
    else:
        vk = model.full_basis()[:, :k]
        coef = x @ vk
        q = np.sum(x * x, axis=-1) - np.sum(coef * coef, axis=-1)
    q = np.maximum(q, 0.0)
    return float(q) if np.ndim(q) == 0 else q
