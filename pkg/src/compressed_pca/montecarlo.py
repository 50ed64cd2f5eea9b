"""Seeded Monte Carlo experiments for the compressed residual statistic.

Seeding
-------
Every random quantity has its own 64-bit key (see :mod:`seeding`):

* projection ``j``: ``Phi`` generated with seed ``derive_key(master, PHI, j)``;
* trial ``t`` under projection ``j``: row key ``derive_key(master, TRIAL, j, t)``;
* training row ``i`` under projection ``j``: ``derive_key(master, TRAIN, j, i)``.

Work is split over projection realizations only and trial blocks have a fixed
size, so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _accel, seeding
from .detector import TestConfig, residual_statistic, standardize
from .errors import ValidationError
from .formats import write_rows
from .model import AnomalySpec, SpikedModel, structured_draw
from .power import PowerKind, PowerQuery, power
from .projection import ProjectionMatrix, generate, project
from .subspace import (
    SubspaceModel,
    eigendecompose,
    exact_compressed_covariance,
    sample_compressed_covariance,
)

logger = logging.getLogger(__name__)

TRIAL_BLOCK = 256
COVARIANCE_MODES = ("exact", "estimated")
SAMPLING_MODES = ("direct", "ambient")


@dataclass(frozen=True)
class ExperimentPlan:
    """Description of a seeded campaign.

    ``sampling_mode="direct"`` draws ``Y ~ N(mu*, Sigma*)`` from a Cholesky
    factor of the exact compressed covariance; ``"ambient"`` draws ``X`` and
    projects it.  The two agree in distribution given ``Phi``.
    """

    model: SpikedModel
    p: int
    k: int
    alpha: float = 0.05
    anomaly: AnomalySpec | None = None
    trials_per_phi: int = 2000
    phi_realizations: int = 30
    master_seed: int = 0
    covariance_mode: str = "exact"
    n_train: int | None = None
    sampling_mode: str = "direct"
    eig_method: str = "auto"

    @property
    def l(self) -> int:
        return self.model.l

    @property
    def c(self) -> float:
        return self.model.l / self.p

    def validate(self) -> None:
        l = self.model.l
        if not 1 <= self.p <= l:
            raise ValidationError(f"need 1 <= p <= l={l}, got p={self.p}")
        if not 1 <= self.k < self.p:
            raise ValidationError(f"need 1 <= k < p={self.p}, got k={self.k}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.trials_per_phi < 1 or self.phi_realizations < 1:
            raise ValidationError("trials_per_phi and phi_realizations must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.covariance_mode not in COVARIANCE_MODES:
            raise ValidationError(f"covariance_mode must be one of {COVARIANCE_MODES}")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ValidationError(f"sampling_mode must be one of {SAMPLING_MODES}")
        if self.covariance_mode == "estimated":
            if self.n_train is None:
                raise ValidationError("estimated covariance mode needs n_train")
            if self.n_train < self.p:
                raise ValidationError(
                    f"n_train={self.n_train} is below p={self.p}; estimation needs n >= p",
                    code="ESTIMATION_UNDERSAMPLED",
                )
        if self.anomaly is not None:
            self.anomaly.check(l, self.k)


@dataclass(frozen=True)
class PhiRow:
    phi_index: int
    phi_seed: int
    mean_qstar_over_p: float
    var_ratio: float
    rejection_rate: float


PHI_COLUMNS = ("mean_qstar_over_p", "var_ratio", "rejection_rate")


def aggregate_rows(rows: Sequence[PhiRow]) -> dict[str, tuple[float, float]]:
    """Mean and sample SD (divisor J-1) across projections, per column."""
    out = {}
    for col in PHI_COLUMNS:
        vals = np.array([getattr(r, col) for r in rows], dtype=float)
        mean = float(np.mean(vals))
        sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else math.nan
        out[col] = (mean, sd)
    return out


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    per_phi: list[PhiRow]
    aggregate: dict[str, tuple[float, float]]
    theory: dict[str, float] = field(default_factory=dict)

    def mean(self, column: str) -> float:
        return self.aggregate[column][0]

    def sd(self, column: str) -> float:
        return self.aggregate[column][1]

    def write_csv(self, handle) -> None:
        comments = [
            "mean_qstar_over_p: trial mean of Q* divided by p",
            "var_ratio: unbiased trial variance of Q* divided by 2(l-k)",
            "rejection_rate: fraction of trials with standardized Q* above z_(1-alpha)",
            "rows 'mean' and 'sd' aggregate across projection realizations",
            f"l={self.plan.l} p={self.plan.p} k={self.plan.k} alpha={self.plan.alpha!r} "
            f"covariance_mode={self.plan.covariance_mode} sampling_mode={self.plan.sampling_mode} "
            f"master_seed={self.plan.master_seed}",
        ]
        rows = [[r.phi_index, r.phi_seed, r.mean_qstar_over_p, r.var_ratio, r.rejection_rate] for r in self.per_phi]
        rows.append(["mean", "", *(self.aggregate[c][0] for c in PHI_COLUMNS)])
        rows.append(["sd", "", *(self.aggregate[c][1] for c in PHI_COLUMNS)])
        write_rows(handle, ["phi", "phi_seed", *PHI_COLUMNS], rows, comments)


def _map_ordered(fn: Callable, items: Iterable, workers: int) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def phi_seed(master_seed: int, index: int) -> int:
    return seeding.derive_key(master_seed, seeding.PHI, index)


class _Sampler:
    """Draws projected observations for one projection realization."""

    def __init__(self, model: SpikedModel, phi: ProjectionMatrix, mode: str, sigma_star: np.ndarray | None):
        self.model = model
        self.phi = phi
        self.mode = mode
        if mode == "direct":
            try:
                self.factor = np.linalg.cholesky(sigma_star)
            except np.linalg.LinAlgError:
                w, v = np.linalg.eigh(sigma_star)
                self.factor = v * np.sqrt(np.clip(w, 0.0, None))
            self.width = phi.p
        else:
            self.width = model.l + model.m

    def draw(self, keys: np.ndarray, anomaly: AnomalySpec | None = None) -> np.ndarray:
        z = _accel.normal_rows(keys, self.width)
        if self.mode == "direct":
            y = z @ self.factor.T
            if anomaly is not None:
                y += project(self.phi, anomaly.mean_vector(self.model))
            return y
        x = structured_draw(self.model, z[:, : self.model.l], z[:, self.model.l :], anomaly)
        return project(self.phi, x)

    def draw_many(self, base_key: int, count: int, anomaly: AnomalySpec | None = None):
        """Yield consecutive blocks of ``count`` rows keyed by ``base_key``."""
        for start in range(0, count, TRIAL_BLOCK):
            idx = np.arange(start, min(start + TRIAL_BLOCK, count))
            yield self.draw(seeding.derive_keys(base_key, idx), anomaly)


def _subspace_for(plan: ExperimentPlan, j: int, phi: ProjectionMatrix, sampler: _Sampler, sigma_star) -> SubspaceModel:
    if plan.covariance_mode == "exact":
        cov = sigma_star
    else:
        train_key = seeding.derive_key(plan.master_seed, seeding.TRAIN, j)
        y = np.vstack(list(sampler.draw_many(train_key, plan.n_train)))
        cov = sample_compressed_covariance(y)
    return eigendecompose(cov, plan.k, method=plan.eig_method)


def _run_one_phi(plan: ExperimentPlan, j: int) -> PhiRow:
    seed = phi_seed(plan.master_seed, j)
    phi = generate(plan.l, plan.p, seed)
    exact = exact_compressed_covariance(plan.model, phi)
    sampler = _Sampler(plan.model, phi, plan.sampling_mode, exact.matrix if plan.sampling_mode == "direct" else None)
    sub = _subspace_for(plan, j, phi, sampler, exact)
    cfg = TestConfig(k=plan.k, alpha=plan.alpha, l=plan.l, c=plan.c)
    trial_key = seeding.derive_key(plan.master_seed, seeding.TRIAL, j)
    q = np.concatenate(
        [residual_statistic(sub, y) for y in sampler.draw_many(trial_key, plan.trials_per_phi, plan.anomaly)]
    )
    var = float(np.var(q, ddof=1)) if q.size > 1 else math.nan
    rejected = standardize(q, cfg) > cfg.threshold
    return PhiRow(
        phi_index=j,
        phi_seed=seed,
        mean_qstar_over_p=float(np.mean(q)) / plan.p,
        var_ratio=var / (2.0 * (plan.l - plan.k)),
        rejection_rate=float(np.mean(rejected)),
    )


def _theory(plan: ExperimentPlan) -> dict[str, float]:
    theory = {"c": plan.c, "c_plus_1": plan.c + 1.0, "alpha": plan.alpha}
    if plan.anomaly is not None:
        q = PowerQuery(l=plan.l, k=plan.k, alpha=plan.alpha, gamma=plan.anomaly.gamma, c=plan.c)
        theory["power"] = power(q, PowerKind.COMPRESSED)
    return theory


def _run(plan: ExperimentPlan, workers: int) -> ExperimentResult:
    plan.validate()
    rows = _map_ordered(lambda j: _run_one_phi(plan, j), range(plan.phi_realizations), workers)
    return ExperimentResult(plan=plan, per_phi=rows, aggregate=aggregate_rows(rows), theory=_theory(plan))


def run_null_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentResult:
    """Null-moment campaign: per projection, the mean of Q*/p and Var(Q*)/Var(Q).

    ``Var(Q)`` is the spiked-null value ``2(l-k)``.
    """
    if plan.anomaly is not None and plan.anomaly.gamma != 0:
        raise ValidationError("null experiment requires no anomaly (or gamma = 0)")
    return _run(plan, workers)


def run_estimated_covariance_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentResult:
    """Same summaries as the null campaign with the subspace taken from a
    sample covariance of ``n_train`` fresh projected observations."""
    if plan.covariance_mode != "estimated":
        raise ValidationError("estimated-covariance experiment needs covariance_mode='estimated'")
    return run_null_experiment(plan, workers)


def run_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentResult:
    """Run a plan as-is, with or without an anomaly."""
    return _run(plan, workers)


# --------------------------------------------------------------------------
# power campaign
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerRow:
    gamma: float
    c: float
    p: int
    c_actual: float
    empirical_power: float
    theory_power: float
    sd_across_phi: float


@dataclass
class PowerTable:
    rows: list[PowerRow]
    per_phi: dict[tuple[float, float], list[float]]

    def lookup(self, gamma: float, c: float) -> PowerRow:
        for row in self.rows:
            if row.gamma == gamma and row.c == c:
                return row
        raise KeyError((gamma, c))

    def write_csv(self, handle) -> None:
        comments = [
            "empirical_power: mean over projections of the per-projection rejection rate",
            "theory_power: leading-order compressed power at c_actual = l/p",
            "sd_across_phi: sample SD of the per-projection rejection rates",
        ]
        write_rows(
            handle,
            ["gamma", "c", "p", "c_actual", "empirical_power", "theory_power", "sd_across_phi"],
            ([r.gamma, r.c, r.p, r.c_actual, r.empirical_power, r.theory_power, r.sd_across_phi] for r in self.rows),
            comments,
        )


def compressed_dimension(l: int, c: float) -> int:
    if not c >= 1.0:
        raise ValidationError(f"simulated compression ratios must be >= 1, got {c}")
    return max(1, int(round(l / c)))


def _power_one(plan: ExperimentPlan, p: int, j: int, gammas: Sequence[float], d: int) -> list[float]:
    seed = phi_seed(plan.master_seed, j)
    phi = generate(plan.l, p, seed)
    exact = exact_compressed_covariance(plan.model, phi)
    sampler = _Sampler(plan.model, phi, plan.sampling_mode, exact.matrix if plan.sampling_mode == "direct" else None)
    sub = eigendecompose(exact, plan.k, method=plan.eig_method)
    cfg = TestConfig(k=plan.k, alpha=plan.alpha, l=plan.l, c=plan.l / p)
    shift = project(phi, plan.model.eigenvector(d))
    trial_key = seeding.derive_key(plan.master_seed, seeding.TRIAL, j)
    hits = np.zeros(len(gammas))
    for y in sampler.draw_many(trial_key, plan.trials_per_phi):
        for g, gamma in enumerate(gammas):
            q = residual_statistic(sub, y + gamma * shift)
            hits[g] += np.count_nonzero(standardize(q, cfg) > cfg.threshold)
    return list(hits / plan.trials_per_phi)


def run_power_experiment(
    plan: ExperimentPlan,
    gamma_grid: Sequence[float],
    c_grid: Sequence[float],
    workers: int = 1,
) -> PowerTable:
    """Empirical rejection rates of the standardized Q* test against theory.

    For each ``c`` the compressed dimension is ``p = round(l / c)`` (``plan.p``
    is ignored) and theory is evaluated at ``l / p``.  The anomaly sits at
    ``plan.anomaly.d`` when given, else at ``k + 1``; its ``gamma`` is ignored
    in favour of ``gamma_grid``.  Trials share their noise across ``gamma``.
    """
    d = plan.anomaly.d if plan.anomaly is not None else plan.k + 1
    gammas = [float(g) for g in gamma_grid]
    cs = [float(c) for c in c_grid]
    if not gammas or not cs:
        raise ValidationError("gamma and c grids must be nonempty")
    if any(g < 0 for g in gammas):
        raise ValidationError("gamma values must be >= 0")
    AnomalySpec(d=d, gamma=0.0).check(plan.l, plan.k)
    dims = [compressed_dimension(plan.l, c) for c in cs]
    for p in dims:
        replace(plan, p=p, anomaly=None).validate()

    units = [(ci, j) for ci in range(len(cs)) for j in range(plan.phi_realizations)]
    results = _map_ordered(lambda u: _power_one(plan, dims[u[0]], u[1], gammas, d), units, workers)

    per_phi: dict[tuple[float, float], list[float]] = {}
    for (ci, _j), rates in zip(units, results):
        for g, gamma in enumerate(gammas):
            per_phi.setdefault((gamma, cs[ci]), []).append(rates[g])

    rows = []
    for gamma in gammas:
        for ci, c in enumerate(cs):
            rates = np.array(per_phi[(gamma, c)])
            p = dims[ci]
            c_actual = plan.l / p
            theory = power(PowerQuery(plan.l, plan.k, plan.alpha, gamma, c_actual), PowerKind.COMPRESSED)
            sd = float(np.std(rates, ddof=1)) if rates.size > 1 else math.nan
            rows.append(PowerRow(gamma, c, p, c_actual, float(np.mean(rates)), theory, sd))
    return PowerTable(rows=rows, per_phi=per_phi)


# --------------------------------------------------------------------------
# cross-checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceReport:
    mean_a: float
    mean_b: float
    standard_error: float
    z: float
    passed: bool


def _mean_and_se(result: ExperimentResult) -> tuple[float, float]:
    plan = result.plan
    means = np.array([r.mean_qstar_over_p for r in result.per_phi])
    # per-trial variance of Q*/p, recovered from the stored variance ratio
    var_q = np.array([r.var_ratio for r in result.per_phi]) * 2.0 * (plan.l - plan.k) / plan.p**2
    se = math.sqrt(float(np.sum(var_q)) / plan.trials_per_phi) / len(means)
    return float(np.mean(means)), se


def compare_results(a: ExperimentResult, b: ExperimentResult, n_se: float = 5.0) -> EquivalenceReport:
    """Two-sample z comparison of the pooled mean of Q*/p between two runs."""
    mean_a, se_a = _mean_and_se(a)
    mean_b, se_b = _mean_and_se(b)
    se = math.hypot(se_a, se_b)
    z = (mean_a - mean_b) / se if se > 0 else math.inf * np.sign(mean_a - mean_b)
    return EquivalenceReport(mean_a, mean_b, se, z, bool(abs(mean_a - mean_b) < n_se * se))


def equivalence_check_sampling_modes(plan: ExperimentPlan, workers: int = 1, n_se: float = 5.0) -> EquivalenceReport:
    """Run ``plan`` with direct and ambient sampling and compare the means.

    Meant for small ``l`` since the ambient path costs O(l p) per trial.
    """
    if plan.l > 500:
        raise ValidationError(f"sampling-mode check is limited to l <= 500, got l={plan.l}")
    direct = run_experiment(replace(plan, sampling_mode="direct"), workers)
    ambient = run_experiment(replace(plan, sampling_mode="ambient"), workers)
    return compare_results(direct, ambient, n_se)
