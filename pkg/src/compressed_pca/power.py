"""Closed-form approximate power of the uncompressed and compressed tests.

Error terms of the compressed critical value are dropped, so the curves are
the leading-order approximation.  The same expression serves the statistic
computed from an estimated covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ValidationError


class PowerKind(str, Enum):
    UNCOMPRESSED = "uncompressed"
    COMPRESSED = "compressed"


@dataclass(frozen=True)
class PowerQuery:
    l: int
    k: int
    alpha: float
    gamma: float
    c: float = 0.0

    def __post_init__(self) -> None:
        if not 1 <= self.k < self.l:
            raise ValidationError(f"need 1 <= k < l, got k={self.k}, l={self.l}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.gamma >= 0.0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")
        if not self.c >= 0.0:
            raise ValidationError(f"c must be >= 0, got {self.c}")

    @property
    def z(self) -> float:
        return float(ndtri(1.0 - self.alpha))


def critical_value_q(query: PowerQuery) -> float:
    nu = 2.0 * (query.l - query.k)
    g2 = query.gamma**2
    return (query.z * np.sqrt(nu) - g2) / np.sqrt(nu + 4.0 * g2)


def critical_value_q_alt(query: PowerQuery) -> float:
    """Equivalent rearrangement ``z sqrt((l-k)/((l-k)+2g^2)) - g^2/sqrt(2(l-k)+4g^2)``."""
    dof = query.l - query.k
    g2 = query.gamma**2
    return query.z * np.sqrt(dof / (dof + 2.0 * g2)) - g2 / np.sqrt(2.0 * dof + 4.0 * g2)


def critical_value_qstar(query: PowerQuery) -> float:
    nu = 2.0 * (query.l - query.k)
    g2 = query.gamma**2
    return (query.z * np.sqrt(nu) - g2 / np.sqrt(query.c + 1.0)) / np.sqrt(nu + 4.0 * g2)


# the estimated-covariance statistic shares the compressed critical value
critical_value_qhatstar = critical_value_qstar


def power(query: PowerQuery, kind: PowerKind | str = PowerKind.COMPRESSED) -> float:
    """Approximate rejection probability ``P(Z >= critical value)``."""
    kind = PowerKind(kind)
    if kind is PowerKind.UNCOMPRESSED:
        crit = critical_value_q(query)
    else:
        crit = critical_value_qstar(query)
    return float(ndtr(-crit))


def power_curve(query: PowerQuery, c_grid: Iterable[float]) -> list[tuple[float, float]]:
    """Compressed power at each grid value of ``c``, in grid order."""
    grid = [float(c) for c in c_grid]
    if not grid:
        raise ValidationError("c grid must not be empty")
    return [(c, power(replace(query, c=c), PowerKind.COMPRESSED)) for c in grid]
