"""Compressed covariance construction and its leading PCA subspace."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import NumericError, ValidationError
from .model import SpikedModel
from .projection import ProjectionMatrix

logger = logging.getLogger(__name__)

PSD_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CompressedCovariance:
    """Symmetric ``p x p`` covariance of the projected data.

    ``source`` is ``"exact"`` for ``(1/p) Phi^T Sigma Phi`` or ``"sample"`` for
    an estimate from ``n`` projected observations.
    """

    matrix: np.ndarray
    source: str = "exact"
    n: int | None = None

    def __post_init__(self) -> None:
        a = np.array(self.matrix, dtype=float, ndmin=2)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"covariance must be square, got shape {a.shape}")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


def exact_compressed_covariance(model: SpikedModel, phi: ProjectionMatrix) -> CompressedCovariance:
    """``(1/p) Phi^T Sigma Phi`` without forming ``Sigma``.

    Uses ``Phi^T Sigma Phi = Phi^T Phi + sum_i (sigma_i - 1) w_i w_i^T`` with
    ``w_i = Phi^T v_i``.
    """
    if model.l != phi.l:
        raise ValidationError(f"model dimension l={model.l} does not match projection l={phi.l}")
    e = phi.entries
    s = e.T @ e
    if model.m:
        if model.basis is None:
            w = e[: model.m]
        else:
            w = model.basis.T @ e
        s += (w.T * (model.spikes - 1.0)) @ w
    return CompressedCovariance(s / phi.p, source="exact")


def sample_compressed_covariance(y) -> CompressedCovariance:
    """Centered sample covariance with divisor ``n`` of an ``(n, p)`` sample."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ValidationError(f"expected an (n, p) matrix, got shape {y.shape}")
    n = y.shape[0]
    if n < 2:
        raise ValidationError(f"sample covariance needs n >= 2 rows, got {n}")
    yc = y - y.mean(axis=0)
    return CompressedCovariance(yc.T @ yc / n, source="sample", n=n)


@dataclass(frozen=True, eq=False)
class SubspaceModel:
    """Leading-``k`` eigenspace of a compressed covariance.

    ``eigenvalues`` holds all ``p`` eigenvalues (descending) after a full
    decomposition, or only the leading ``k`` after a partial one.  The tail
    sums are exact in both cases.
    """

    k: int
    eigenvalues: np.ndarray
    basis_k: np.ndarray
    tail_sum: float
    tail_sq_sum: float
    trace: float
    vectors: np.ndarray | None = None

    @property
    def p(self) -> int:
        return self.basis_k.shape[0]

    def residual_projector(self) -> np.ndarray:
        return np.eye(self.p) - self.basis_k @ self.basis_k.T


def check_psd(cov: CompressedCovariance) -> float:
    """Raise unless the smallest eigenvalue is >= -1e-8 times the largest.

    Returns the smallest eigenvalue.
    """
    w = np.linalg.eigvalsh(cov.matrix)
    if w[0] < -PSD_TOL * max(abs(w[0]), abs(w[-1])):
        raise NumericError(
            f"covariance is not positive semidefinite: smallest eigenvalue {w[0]:.6g}, "
            f"largest {w[-1]:.6g}"
        )
    return float(w[0])


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; argmax picks the lowest index on ties
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _condition_report(a: np.ndarray) -> str:
    finite = bool(np.all(np.isfinite(a)))
    if not finite:
        return "matrix contains non-finite entries"
    try:
        sv = np.linalg.svd(a, compute_uv=False)
        return f"largest singular value {sv[0]:.3g}, smallest {sv[-1]:.3g}"
    except np.linalg.LinAlgError:
        return "singular values unavailable"


def eigendecompose(
    cov: CompressedCovariance,
    k: int,
    method: str = "full",
    keep_vectors: bool = False,
) -> SubspaceModel:
    """Eigendecomposition with sorted eigenvalues and a fixed sign convention.

    Parameters
    ----------
    cov : CompressedCovariance
    k : int
        Number of retained components, ``1 <= k < p``.
    method : {"full", "partial", "auto"}
        ``"full"`` runs a dense symmetric solver; ``"partial"`` runs Lanczos
        for the leading ``k`` pairs only and recovers the tail sums from the
        trace and Frobenius norm.  ``"auto"`` picks partial for ``p > 1000``.
    keep_vectors : bool
        Retain all eigenvectors (full method only), for reconstruction checks.

    Indefinite input is decomposed as given; negative tail eigenvalues within
    ``1e-8`` of the spectral radius count as zero in ``tail_sq_sum``.  Use
    :func:`check_psd` to reject non-covariances.
    """
    a = cov.matrix
    p = a.shape[0]
    if int(k) != k or not 1 <= k < p:
        raise ValidationError(f"k must satisfy 1 <= k < p={p}, got {k}")
    if not np.all(np.isfinite(a)):
        raise NumericError(f"eigensolver input rejected: {_condition_report(a)}")
    if method == "auto":
        method = "partial" if p > 1000 else "full"
    trace = float(np.trace(a))

    if method == "full":
        try:
            w, v = np.linalg.eigh(a)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"eigensolver failed: {exc}; {_condition_report(a)}") from exc
        w = w[::-1].copy()
        v = v[:, ::-1]
        tail = w[k:]
        tol = PSD_TOL * max(abs(w[0]), abs(w[-1]))
        tail_sum = float(np.sum(tail))
        tail_sq_sum = float(np.sum(np.where((tail < 0) & (tail >= -tol), 0.0, tail) ** 2))
        basis = _fix_signs(v[:, :k].copy())
        vectors = _fix_signs(v.copy()) if keep_vectors else None
        return SubspaceModel(
            k=int(k), eigenvalues=w, basis_k=basis, tail_sum=tail_sum,
            tail_sq_sum=tail_sq_sum, trace=trace, vectors=vectors,
        )

    if method == "partial":
        v0 = np.full(p, 1.0 / np.sqrt(p))
        try:
            w, v = scipy.sparse.linalg.eigsh(a, k=int(k), which="LA", v0=v0, tol=0)
        except (scipy.sparse.linalg.ArpackError, np.linalg.LinAlgError) as exc:
            logger.warning("Lanczos failed (%s); falling back to dense subset solver", exc)
            try:
                w, v = scipy.linalg.eigh(a, subset_by_index=[p - k, p - 1])
            except np.linalg.LinAlgError as exc2:
                raise NumericError(
                    f"eigensolver failed: {exc2}; {_condition_report(a)}"
                ) from exc2
        order = np.argsort(w)[::-1]
        w = w[order]
        v = v[:, order]
        tail_sum = trace - float(np.sum(w))
        tail_sq_sum = float(np.sum(a * a)) - float(np.sum(w**2))
        return SubspaceModel(
            k=int(k), eigenvalues=w, basis_k=_fix_signs(v), tail_sum=tail_sum,
            tail_sq_sum=max(tail_sq_sum, 0.0), trace=trace,
        )

    raise ValidationError(f"unknown eigendecomposition method {method!r}")


@dataclass(frozen=True)
class InflationRow:
    spike: float
    predicted: float
    observed: float
    z_score: float


def predicted_inflation(sigma: float, c: float) -> float:
    """Limit of a projected spike: ``sigma (1 + c / (sigma - 1))``."""
    return sigma * (1.0 + c / (sigma - 1.0))


def eigenvalue_inflation_check(model: SpikedModel, sub: SubspaceModel, c: float) -> list[InflationRow]:
    """Compare observed leading eigenvalues with the projected-spike law.

    The fluctuation ``sqrt(p) (observed - predicted)`` is asymptotically normal
    with variance ``2 sigma^2 (1 - c / (sigma - 1)^2)``; ``z_score`` is the
    standardized deviation.  Every spike must exceed ``1 + sqrt(c)``.
    """
    if c < 0:
        raise ValidationError(f"compression ratio c must be >= 0, got {c}")
    if len(sub.eigenvalues) < model.m:
        raise ValidationError(
            f"subspace holds {len(sub.eigenvalues)} eigenvalues, need at least m={model.m}"
        )
    threshold = 1.0 + np.sqrt(c)
    for v, sigma in enumerate(model.leading):
        if not sigma > threshold:
            raise ValidationError(
                f"spike {v} (sigma={sigma}) does not exceed 1 + sqrt(c) = {threshold:.6g}"
            )
    rows = []
    root_p = np.sqrt(sub.p)
    for v, sigma in enumerate(model.leading):
        predicted = predicted_inflation(sigma, c)
        observed = float(sub.eigenvalues[v])
        sd = np.sqrt(2.0 * sigma**2 * (1.0 - c / (sigma - 1.0) ** 2))
        rows.append(InflationRow(sigma, predicted, observed, float(root_p * (observed - predicted) / sd)))
    return rows
