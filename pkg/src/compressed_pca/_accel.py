"""Hot kernels: a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``CPCA_DISABLE_NUMBA`` is unset (or set to ``0``/``false``).  Both
paths are always importable so tests and the benchmark can compare them.

Random numbers come from a counter-based construction so that any row of
any random block can be regenerated from its 64-bit key alone:

* uniform stream: the SplitMix64 sequence seeded with the row key, i.e. the
  ``t``-th draw (``t = 1, 2, ...``) is ``mix64(key + t * 0x9E3779B97F4A7C15)``;
* uniforms in (0, 1): ``((u >> 11) + 0.5) * 2**-53``;
* normals: Box-Muller on consecutive pairs ``(u1, u2)`` giving
  ``r cos(2 pi u2), r sin(2 pi u2)`` with ``r = sqrt(-2 log u1)``.

Only the integer hashing and the uniform conversion run under numba.  The
Box-Muller step always runs through numpy ufuncs, because compiled loops
vectorize ``log``/``cos``/``sin`` differently depending on the trip count and
that would break bit-exactness.  As a result both paths produce identical
bits and rows are exactly prefix-consistent.
"""

from __future__ import annotations

import os

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
TWO_PI = 2.0 * np.pi
INV_2_53 = 2.0**-53

_ROW_CHUNK = 2048


def numba_disabled_by_env() -> bool:
    flag = os.environ.get("CPCA_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false", "no", "off")


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional extra
    numba = None
    HAVE_NUMBA = False


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------


def mix64_numpy(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


def _n_pairs(n_cols: int) -> int:
    return (n_cols + 1) // 2


def uniform_pairs_numpy(keys: np.ndarray, n_pairs: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform draws ``(u1, u2)`` of shape (rows, n_pairs) from row keys."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    u1 = np.empty((keys.shape[0], n_pairs))
    u2 = np.empty((keys.shape[0], n_pairs))
    steps = np.arange(1, 2 * n_pairs + 1, dtype=np.uint64) * GOLDEN
    for start in range(0, keys.shape[0], _ROW_CHUNK):
        block = keys[start : start + _ROW_CHUNK]
        bits = mix64_numpy(block[:, None] + steps[None, :])
        u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * INV_2_53
        u1[start : start + block.shape[0]] = u[:, 0::2]
        u2[start : start + block.shape[0]] = u[:, 1::2]
    return u1, u2


def box_muller(u1: np.ndarray, u2: np.ndarray, n_cols: int) -> np.ndarray:
    r = np.sqrt(-2.0 * np.log(u1))
    theta = TWO_PI * u2
    out = np.empty((u1.shape[0], 2 * u1.shape[1]))
    out[:, 0::2] = r * np.cos(theta)
    out[:, 1::2] = r * np.sin(theta)
    return np.ascontiguousarray(out[:, :n_cols])


def normal_rows_numpy(keys: np.ndarray, n_cols: int) -> np.ndarray:
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    if keys.shape[0] == 0 or n_cols == 0:
        return np.empty((keys.shape[0], n_cols))
    out = np.empty((keys.shape[0], n_cols))
    # chunk the transcendental stage as well to bound temporaries
    for start in range(0, keys.shape[0], _ROW_CHUNK):
        u1, u2 = uniform_pairs_numpy(keys[start : start + _ROW_CHUNK], _n_pairs(n_cols))
        out[start : start + u1.shape[0]] = box_muller(u1, u2, n_cols)
    return out


def residual_norms_numpy(y: np.ndarray, basis: np.ndarray) -> np.ndarray:
    coef = y @ basis
    return np.einsum("ij,ij->i", y, y) - np.einsum("ij,ij->i", coef, coef)


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True, inline="always")
    def _mix64_nb(z):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    @numba.njit(cache=True, nogil=True)
    def _uniform_pairs_nb(keys, n_pairs):
        n_rows = keys.shape[0]
        u1 = np.empty((n_rows, n_pairs))
        u2 = np.empty((n_rows, n_pairs))
        golden = np.uint64(0x9E3779B97F4A7C15)
        scale = 2.0**-53
        for i in range(n_rows):
            state = keys[i]
            for j in range(n_pairs):
                state = state + golden
                u1[i, j] = (np.float64(_mix64_nb(state) >> np.uint64(11)) + 0.5) * scale
                state = state + golden
                u2[i, j] = (np.float64(_mix64_nb(state) >> np.uint64(11)) + 0.5) * scale
        return u1, u2

    @numba.njit(cache=True, nogil=True)
    def _residual_norms_nb(y, basis):
        n, p = y.shape
        k = basis.shape[1]
        out = np.empty(n)
        coef = np.empty(k)
        for i in range(n):
            total = 0.0
            for j in range(p):
                total += y[i, j] * y[i, j]
            for c in range(k):
                coef[c] = 0.0
            for j in range(p):
                yij = y[i, j]
                for c in range(k):
                    coef[c] += yij * basis[j, c]
            explained = 0.0
            for c in range(k):
                explained += coef[c] * coef[c]
            out[i] = total - explained
        return out

    def uniform_pairs_numba(keys: np.ndarray, n_pairs: int) -> tuple[np.ndarray, np.ndarray]:
        return _uniform_pairs_nb(np.ascontiguousarray(keys, dtype=np.uint64), int(n_pairs))

    def normal_rows_numba(keys: np.ndarray, n_cols: int) -> np.ndarray:
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        if keys.shape[0] == 0 or n_cols == 0:
            return np.empty((keys.shape[0], n_cols))
        out = np.empty((keys.shape[0], n_cols))
        for start in range(0, keys.shape[0], _ROW_CHUNK):
            u1, u2 = _uniform_pairs_nb(keys[start : start + _ROW_CHUNK], _n_pairs(n_cols))
            out[start : start + u1.shape[0]] = box_muller(u1, u2, n_cols)
        return out

    def residual_norms_numba(y: np.ndarray, basis: np.ndarray) -> np.ndarray:
        return _residual_norms_nb(
            np.ascontiguousarray(y, dtype=np.float64),
            np.ascontiguousarray(basis, dtype=np.float64),
        )

else:  # pragma: no cover
    uniform_pairs_numba = None
    normal_rows_numba = None
    residual_norms_numba = None


USE_NUMBA = HAVE_NUMBA and not numba_disabled_by_env()
BACKEND = "numba" if USE_NUMBA else "numpy"


def normal_rows(keys: np.ndarray, n_cols: int) -> np.ndarray:
    """Standard normal block; row ``i`` depends only on ``keys[i]``.

    Rows are prefix-consistent: asking for fewer columns returns the leading
    columns of a wider request.
    """
    if USE_NUMBA:
        return normal_rows_numba(keys, n_cols)
    return normal_rows_numpy(keys, n_cols)


def residual_norms(y: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Row-wise ``|y|^2 - |basis^T y|^2`` for a batch ``y`` of shape (n, p).

    Always the numpy path: its BLAS product beat the fused numba loop by
    2-5x at every measured size (see ``benchmarks/bench_kernels.py``), so
    the compiled kernel is kept only as a benchmark reference.
    """
    return residual_norms_numpy(y, basis)
