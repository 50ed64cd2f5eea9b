"""Command-line interface: ``cpca {build,detect,power,experiment,simulate}``.

Exit status: 0 success, 2 usage/config error, 3 data error, 4 numeric
failure.  Errors are reported on stderr as ``error: CODE: message``.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, _accel, seeding
from .artifact import load_artifact, save_artifact
from .config import load_build_config, load_plan, shipped_plans
from .detector import TestConfig, residual_statistic, standardize
from .errors import CompressedPCAError, DataError, NumericError, ValidationError
from .formats import read_matrix, write_rows
from .model import AnomalySpec, make_spiked, structured_draw
from .montecarlo import run_experiment, run_power_experiment
from .power import PowerKind, PowerQuery, power
from .projection import generate, project
from .subspace import (
    SubspaceModel,
    check_psd,
    eigendecompose,
    eigenvalue_inflation_check,
    exact_compressed_covariance,
    sample_compressed_covariance,
)

SIM_BLOCK = 1024


@contextlib.contextmanager
def _open_output(path: str):
    if path == "-":
        yield sys.stdout
        return
    try:
        handle = open(path, "w", newline="")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}", code="UNWRITABLE_FILE") from exc
    with handle:
        yield handle


def _json_number(value: float) -> float | None:
    return None if math.isnan(value) else float(value)


def _print_json(doc, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# build
# --------------------------------------------------------------------------


def _inflation_summary(model, sub: SubspaceModel, c: float):
    try:
        rows = eigenvalue_inflation_check(model, sub, c)
    except ValidationError as exc:
        return {"skipped": str(exc)}
    return [
        {"spike": r.spike, "predicted": r.predicted, "observed": r.observed, "z_score": r.z_score}
        for r in rows
    ]


def cmd_build(args) -> int:
    cfg = load_build_config(args.config)
    l, p, k, seed = cfg["l"], cfg["p"], cfg["k"], cfg["seed"]
    alpha = cfg.get("alpha", 0.05)
    if not 1 <= k < p <= l:
        raise ValidationError(f"need 1 <= k < p <= l, got k={k}, p={p}, l={l}", code="CONFIG_SCHEMA")
    phi = generate(l, p, seed)
    model = make_spiked(l, cfg["spectrum"]) if "spectrum" in cfg else None
    n_train = None
    if cfg["covariance_mode"] == "exact":
        cov = exact_compressed_covariance(model, phi)
    else:
        space = cfg.get("training_space", "compressed")
        training = Path(cfg["training_data"])
        if not training.is_absolute():
            training = Path(args.config).parent / training
        try:
            y = read_matrix(training, p if space == "compressed" else l)
        except OSError as exc:
            raise DataError(f"cannot read training data {training}: {exc}", code="UNREADABLE_FILE") from exc
        if space == "ambient":
            y = project(phi, y)
        n_train = y.shape[0]
        if n_train < p:
            raise DataError(
                f"training data has n={n_train} rows but p={p}; estimation needs n >= p",
                code="ESTIMATION_UNDERSAMPLED",
            )
        cov = sample_compressed_covariance(y)
        check_psd(cov)
    sub = eigendecompose(cov, k, method="auto")
    meta = {
        "l": l, "p": p, "k": k, "alpha": alpha, "c": l / p, "seed": seed,
        "spectrum": list(model.leading) if model else None,
        "covariance_mode": cfg["covariance_mode"],
        "n_train": n_train,
        "rng_backend": _accel.BACKEND,
        "eigenvalues_head": [float(v) for v in sub.eigenvalues[: min(10, len(sub.eigenvalues))]],
        "tail_sum": sub.tail_sum,
        "tail_sq_sum": sub.tail_sq_sum,
        "created_by": f"compressed-pca {__version__}",
    }
    stored = save_artifact(args.output, meta, sub.basis_k)
    summary = {
        "artifact": str(args.output),
        "checksum": stored["checksum"],
        "eigenvalues_head": meta["eigenvalues_head"],
        "tail_sum": sub.tail_sum,
        "tail_sq_sum": sub.tail_sq_sum,
        "inflation_check": _inflation_summary(model, sub, l / p) if model else {"skipped": "no spectrum"},
    }
    _print_json(summary)
    return 0


# --------------------------------------------------------------------------
# detect
# --------------------------------------------------------------------------


def cmd_detect(args) -> int:
    meta, basis = load_artifact(args.artifact)
    l, p, k = meta["l"], meta["p"], meta["k"]
    expected = p if args.projected else l
    try:
        obs = read_matrix(args.observations, expected)
    except OSError as exc:
        raise DataError(f"cannot read {args.observations}: {exc}", code="UNREADABLE_FILE") from exc
    if not args.projected and obs.shape[0]:
        obs = project(generate(l, p, meta["seed"]), obs)
    sub = SubspaceModel(k=k, eigenvalues=np.asarray(meta["eigenvalues_head"]), basis_k=basis,
                        tail_sum=meta["tail_sum"], tail_sq_sum=meta["tail_sq_sum"], trace=float("nan"))
    cfg = TestConfig(k=k, alpha=meta["alpha"], l=l, c=l / p)
    q = residual_statistic(sub, obs) if obs.shape[0] else np.empty(0)
    z = standardize(q, cfg) if q.size else np.empty(0)
    t = cfg.threshold
    with _open_output(args.output) as handle:
        write_rows(handle, ["row", "q_star", "standardized", "threshold", "anomalous"],
                   ([i, q[i], z[i], t, bool(z[i] > t)] for i in range(q.size)))
    return 0


# --------------------------------------------------------------------------
# power
# --------------------------------------------------------------------------


def cmd_power(args) -> int:
    rows = []
    for gamma in args.gamma:
        for c in args.c:
            q = PowerQuery(l=args.l, k=args.k, alpha=args.alpha, gamma=gamma, c=c)
            rows.append([gamma, c, power(q, PowerKind.UNCOMPRESSED), power(q, PowerKind.COMPRESSED)])
    with _open_output(args.output) as handle:
        write_rows(handle, ["gamma", "c", "power_q", "power_qstar"], rows)
    return 0


# --------------------------------------------------------------------------
# experiment
# --------------------------------------------------------------------------


def cmd_experiment(args) -> int:
    spec = load_plan(args.plan)
    plan = spec.plan
    summary = {"plan": spec.name or args.plan, "experiment": spec.kind}
    if spec.kind == "power":
        table = run_power_experiment(plan, spec.gamma_grid, spec.c_grid, workers=args.workers)
        with _open_output(args.output) as handle:
            table.write_csv(handle)
        summary["rows"] = [
            {"gamma": r.gamma, "c": r.c, "empirical_power": r.empirical_power, "theory_power": r.theory_power}
            for r in table.rows
        ]
    else:
        result = run_experiment(plan, workers=args.workers)
        with _open_output(args.output) as handle:
            result.write_csv(handle)
        summary["aggregate"] = {
            col: {"mean": _json_number(m), "sd": _json_number(s)} for col, (m, s) in result.aggregate.items()
        }
        summary["theory"] = result.theory
    _print_json(summary, sys.stderr if args.output == "-" else sys.stdout)
    return 0


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    model = make_spiked(args.l, args.spectrum)
    anomaly = None
    if args.gamma is not None or args.d is not None:
        if args.d is None:
            raise ValidationError("--gamma needs --d", code="USAGE")
        anomaly = AnomalySpec(d=args.d, gamma=args.gamma or 0.0)
        anomaly.check(model.l)
    if args.count < 0:
        raise ValidationError("--count must be >= 0", code="USAGE")
    base = seeding.derive_key(args.seed, seeding.SIMULATE)

    if args.compressed:
        if args.p is None:
            raise ValidationError("--compressed needs --p", code="USAGE")
        phi = generate(model.l, args.p, args.phi_seed)
        sigma = exact_compressed_covariance(model, phi).matrix
        try:
            factor = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"compressed covariance is not positive definite: {exc}") from exc
        shift = project(phi, anomaly.mean_vector(model)) if anomaly is not None else None
        width, prefix = args.p, "y"

        def block(z):
            y = z[:, : args.p] @ factor.T
            return y + shift if shift is not None else y
    else:
        width, prefix = model.l, "x"

        def block(z):
            return structured_draw(model, z[:, : model.l], z[:, model.l :], anomaly)

    draw_width = args.p if args.compressed else model.l + model.m
    with _open_output(args.output) as handle:
        handle.write(",".join(f"{prefix}{i}" for i in range(width)) + "\n")
        for start in range(0, args.count, SIM_BLOCK):
            idx = np.arange(start, min(start + SIM_BLOCK, args.count))
            data = block(_accel.normal_rows(seeding.derive_keys(base, idx), draw_width))
            for row in data:
                handle.write(",".join(repr(float(v)) for v in row) + "\n")
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpca", description="Compressed PCA subspace anomaly detection")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build and persist a detection model")
    b.add_argument("config", help="YAML build config")
    b.add_argument("-o", "--output", required=True, help="artifact directory")
    b.set_defaults(func=cmd_build)

    d = sub.add_parser("detect", help="score observations against a model artifact")
    d.add_argument("artifact")
    d.add_argument("observations", help="CSV of observations (length l, or p with --projected)")
    d.add_argument("-o", "--output", default="-")
    d.add_argument("--projected", action="store_true", help="observations are already projected")
    d.set_defaults(func=cmd_detect)

    pw = sub.add_parser("power", help="closed-form power over a (gamma, c) grid")
    pw.add_argument("--l", type=int, default=10000)
    pw.add_argument("--k", type=int, default=30)
    pw.add_argument("--alpha", type=float, default=0.05)
    pw.add_argument("--gamma", type=float, nargs="+", default=[10.0, 20.0, 30.0, 40.0, 50.0])
    pw.add_argument("--c", type=float, nargs="+", default=[float(c) for c in range(21)])
    pw.add_argument("-o", "--output", default="-")
    pw.set_defaults(func=cmd_power)

    e = sub.add_parser("experiment", help="run a Monte Carlo plan")
    e.add_argument("plan", help=f"plan YAML path or shipped plan name ({', '.join(shipped_plans())})")
    e.add_argument("-o", "--output", default="-")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_experiment)

    s = sub.add_parser("simulate", help="draw data from the spiked model")
    s.add_argument("--l", type=int, required=True)
    s.add_argument("--spectrum", type=_floats, required=True, help="leading eigenvalues, e.g. '50,40,30'")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--d", type=int, default=None, help="anomaly eigen-coordinate (0-based)")
    s.add_argument("--gamma", type=float, default=None, help="anomaly magnitude")
    s.add_argument("--compressed", action="store_true", help="draw projected data directly")
    s.add_argument("--p", type=int, default=None)
    s.add_argument("--phi-seed", type=int, default=0)
    s.add_argument("-o", "--output", default="-")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CompressedPCAError as exc:
        sys.stderr.write(f"error: {exc.code}: {exc}\n")
        return exc.exit_status
    except np.linalg.LinAlgError as exc:
        sys.stderr.write(f"error: NUMERIC_FAILURE: {exc}\n")
        return NumericError.exit_status


if __name__ == "__main__":
    sys.exit(main())
