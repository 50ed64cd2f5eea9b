"""Gaussian random projection ``x -> p^{-1/2} Phi^T x``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel, seeding
from .errors import ValidationError

GRAM_ROWS = 100


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """``l x p`` matrix of i.i.d. standard normals.

    The ``1/sqrt(p)`` scaling is applied by :func:`project`, never stored in
    ``entries``.  Row ``i`` is generated from ``derive_key(seed, PHI, i)``, so
    a matrix with fewer columns is the leading block of one with more.
    """

    l: int
    p: int
    seed: int
    entries: np.ndarray

    @property
    def c(self) -> float:
        return self.l / self.p

    @classmethod
    def from_entries(cls, entries, seed: int = 0) -> "ProjectionMatrix":
        """Wrap an explicit matrix (test doubles, loaded artifacts)."""
        entries = np.array(entries, dtype=float, ndmin=2)
        l, p = entries.shape
        _check_dims(l, p)
        entries.setflags(write=False)
        return cls(l=l, p=p, seed=seed, entries=entries)


def _check_dims(l: int, p: int) -> None:
    if p < 1 or l < 1:
        raise ValidationError(f"dimensions must be positive, got l={l}, p={p}")
    if p > l:
        raise ValidationError(f"compressed dimension p={p} exceeds ambient dimension l={l}")


def generate(l: int, p: int, seed: int) -> ProjectionMatrix:
    _check_dims(l, p)
    base = seeding.derive_key(seed, seeding.PHI)
    keys = seeding.derive_keys(base, np.arange(l))
    entries = _accel.normal_rows(keys, p)
    entries.setflags(write=False)
    return ProjectionMatrix(l=int(l), p=int(p), seed=int(seed), entries=entries)


def project(phi: ProjectionMatrix, x) -> np.ndarray:
    """Project one ``l``-vector or a batch of row vectors to ``p`` dimensions."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != phi.l:
        raise ValidationError(
            f"observation length {x.shape[-1]} does not match projection input length {phi.l}"
        )
    return (x @ phi.entries) / np.sqrt(phi.p)


def gram_identity_check(phi: ProjectionMatrix) -> float:
    """Max entrywise deviation of ``(1/p) Phi Phi^T`` from the identity.

    Only the leading ``min(l, 100)`` rows are used.
    """
    rows = phi.entries[:GRAM_ROWS]
    gram = rows @ rows.T / phi.p
    return float(np.max(np.abs(gram - np.eye(rows.shape[0]))))
