"""Spiked covariance model, anomaly hypothesis and data sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class SpikedModel:
    """Covariance with ``m`` leading eigenvalues above one and a unit tail.

    Attributes
    ----------
    l : int
        Ambient dimension.
    leading : tuple of float
        Strictly decreasing leading eigenvalues, each > 1.
    basis : ndarray, optional
        ``(l, m)`` orthonormal leading eigenvectors.  ``None`` means the
        spikes sit on the first ``m`` coordinate axes.
    """

    l: int
    leading: tuple[float, ...]
    basis: np.ndarray | None = None
    _full: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "leading", tuple(float(s) for s in self.leading))
        if int(self.l) != self.l or self.l < 1:
            raise ValidationError(f"l must be a positive integer, got {self.l}")
        object.__setattr__(self, "l", int(self.l))
        if self.m >= self.l:
            raise ValidationError(
                f"number of spikes m={self.m} must be smaller than l={self.l}"
            )
        for i, s in enumerate(self.leading):
            if not np.isfinite(s) or s <= 1.0:
                raise ValidationError(f"leading[{i}]={s} must be > 1")
            if i > 0 and s >= self.leading[i - 1]:
                raise ValidationError(
                    f"leading[{i}]={s} is not strictly below leading[{i - 1}]="
                    f"{self.leading[i - 1]}"
                )
        if self.basis is not None:
            basis = np.array(self.basis, dtype=float)
            if basis.shape != (self.l, self.m):
                raise ValidationError(
                    f"basis must have shape ({self.l}, {self.m}), got {basis.shape}"
                )
            dev = np.max(np.abs(basis.T @ basis - np.eye(self.m))) if self.m else 0.0
            if dev > 1e-10:
                raise ValidationError(f"basis columns not orthonormal (max deviation {dev:.3g})")
            basis.setflags(write=False)
            object.__setattr__(self, "basis", basis)

    @property
    def m(self) -> int:
        return len(self.leading)

    @property
    def spikes(self) -> np.ndarray:
        return np.asarray(self.leading, dtype=float)

    @property
    def trace(self) -> float:
        return float(self.l - self.m + sum(self.leading))

    def leading_vectors(self) -> np.ndarray:
        """``(l, m)`` matrix of leading eigenvectors (identity columns by default)."""
        if self.basis is not None:
            return self.basis
        return np.eye(self.l, self.m)

    def full_basis(self) -> np.ndarray:
        """Complete orthonormal eigenbasis ``V`` (``l x l``).

        With an explicit basis the tail is completed deterministically by a QR
        factorization of ``[V_m, I]``; this is O(l^3) and meant for small ``l``.
        """
        if self.basis is None:
            return np.eye(self.l)
        if "V" not in self._full:
            q, _ = np.linalg.qr(np.hstack([self.basis, np.eye(self.l)]))
            q = q[:, : self.l].copy()
            q[:, : self.m] = self.basis
            self._full["V"] = q
        return self._full["V"]

    def eigenvector(self, index: int) -> np.ndarray:
        """Unit eigenvector at 0-based eigen-coordinate ``index``."""
        if not 0 <= index < self.l:
            raise ValidationError(f"eigen-coordinate {index} outside [0, {self.l})")
        if self.basis is None:
            e = np.zeros(self.l)
            e[index] = 1.0
            return e
        return self.full_basis()[:, index].copy()

    def covariance(self) -> np.ndarray:
        """Dense ``l x l`` covariance; only for small ``l`` (tests, oracles)."""
        v = self.leading_vectors()
        return np.eye(self.l) + (v * (self.spikes - 1.0)) @ v.T


def make_spiked(l: int, leading: Sequence[float], basis: np.ndarray | None = None) -> SpikedModel:
    return SpikedModel(l=l, leading=tuple(leading), basis=basis)


@dataclass(frozen=True)
class AnomalySpec:
    """Mean shift of size ``gamma`` at eigen-coordinate ``d`` (0-based).

    ``d`` counts the zeros preceding ``gamma`` in ``V^T mu``, so with 1-based
    eigen-coordinates the shift sits at position ``d + 1``.
    """

    d: int
    gamma: float

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 0:
            raise ValidationError(f"anomaly index d must be a nonnegative integer, got {self.d}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "gamma", float(self.gamma))

    def check(self, l: int, k: int | None = None) -> None:
        if self.d + 1 > l:
            raise ValidationError(f"anomaly index d={self.d} needs d+1 <= l={l}")
        if k is not None and self.d <= k:
            raise ValidationError(f"anomaly index d={self.d} must exceed k={k}")

    def mean_vector(self, model: SpikedModel) -> np.ndarray:
        self.check(model.l)
        return self.gamma * model.eigenvector(self.d)


def structured_draw(
    model: SpikedModel,
    z: np.ndarray,
    g: np.ndarray,
    anomaly: AnomalySpec | None = None,
) -> np.ndarray:
    """Map standard normals to draws from ``N(mu, Sigma)``.

    ``X = Z + sum_i sqrt(sigma_i - 1) g_i v_i + mu`` with ``z`` of shape
    ``(n, l)`` and ``g`` of shape ``(n, m)``.  Costs O(l m) per row beyond ``z``.
    """
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    x = np.array(z, dtype=float, copy=True)
    if model.m:
        scaled = g * np.sqrt(model.spikes - 1.0)
        if model.basis is None:
            x[:, : model.m] += scaled
        else:
            x += scaled @ model.basis.T
    if anomaly is not None:
        x += anomaly.mean_vector(model)
    return x


def sample_x(
    model: SpikedModel,
    count: int,
    rng: np.random.Generator,
    anomaly: AnomalySpec | None = None,
) -> np.ndarray:
    """Draw ``count`` rows from ``N(mu, Sigma)`` using a numpy generator."""
    if count < 0:
        raise ValidationError(f"count must be >= 0, got {count}")
    if anomaly is not None:
        anomaly.check(model.l)
    z = rng.standard_normal((count, model.l))
    g = rng.standard_normal((count, model.m))
    return structured_draw(model, z, g, anomaly)
