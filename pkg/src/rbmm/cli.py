"""Command-line experiment runner.

Subcommands: ``run`` solves a configured application over seeded trials and
writes one trace CSV per trial plus a summary JSON; ``probe`` runs the
numerical diagnostics and writes their reports; ``gen-data`` dumps the
configured application's synthetic dataset to files.

Configs are flat INI-style ``key = value`` text; a file without a section
header is accepted as-is.  ``application`` is the one required key.  Keys
shared by every application: trials, seed, max_cycles, stationarity_every,
stop_tol.  The rest are documented in each application's ``from_config``.

The trace CSV column order is frozen: cycle, objective, stationarity,
delta_n, then gap_i and step_i for each block i.  Stationarity is left
empty on unmeasured cycles.  Floats are written with 17 significant digits
so files round-trip exactly.  Reruns with the same config and seed are
byte-identical apart from wall-time fields in the summary.

Exit codes: 0 success, 1 failed probe, 2 configuration error, 3 numerical
failure.

``probe_fixture = wrong_gradient`` is a self-test hook: it doubles every
block gradient fed to the finite-difference probe, which must then fail.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import datafiles, diagnostics
from .applications import RunSetup, cp, likelihood, quadratic, rpca, subspace
from .driver import audit_trace, run_rbmm
from .geometry import (
    SPD,
    GeometryError,
    Sphere,
    TangentVector,
    egrad_to_rgrad,
)
from .surrogates import LineSearchFailure

BUILDERS = {
    "quadratic-demo": quadratic.from_config,
    "subspace-tracking": subspace.from_config,
    "optimistic-likelihood": likelihood.from_config,
    "cp-dictionary": cp.from_config,
    "rpca": rpca.from_config,
}

NUMERICAL_ERRORS = (GeometryError, LineSearchFailure, np.linalg.LinAlgError)


class ConfigError(Exception):
    """Bad or missing configuration; maps to exit code 2."""


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    stripped = [ln.strip() for ln in text.splitlines()]
    if not any(ln.startswith("[") for ln in stripped if ln):
        text = "[run]\n" + text
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    cfg: dict = {}
    for section in parser.sections():
        cfg.update(parser.items(section))
    if "application" not in cfg:
        raise ConfigError("config is missing the required key 'application'")
    if cfg["application"] not in BUILDERS:
        known = ", ".join(sorted(BUILDERS))
        raise ConfigError(
            f"unknown application {cfg['application']!r} (known: {known})"
        )
    return cfg


def trace_csv_text(trace) -> str:
    m = len(trace[0].gaps)
    cols = ["cycle", "objective", "stationarity", "delta_n"]
    for i in range(1, m + 1):
        cols.extend([f"gap_{i}", f"step_{i}"])
    lines = [",".join(cols)]
    for rec in trace:
        row = [
            str(rec.cycle),
            _fmt(rec.objective),
            "" if rec.stationarity is None else _fmt(rec.stationarity),
            _fmt(rec.delta_n),
        ]
        for g, s in zip(rec.gaps, rec.steps):
            row.extend([_fmt(g), _fmt(s)])
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def resolved_config(setup: RunSetup, trials: int, seed: int) -> dict:
    cfg = {
        "application": setup.name,
        "trials": trials,
        "seed": seed,
        "max_cycles": setup.config.max_cycles,
        "stationarity_every": setup.config.stationarity_every,
        "stop_tol": setup.config.stop_tol,
    }
    for key, val in setup.params.items():
        cfg[key] = list(val) if isinstance(val, tuple) else val
    return cfg


def _run_trial(builder, params: dict, trial: int, seed: int) -> tuple:
    trial_params = dict(params)
    trial_params["seed"] = seed
    setup = builder(trial_params)
    start = time.perf_counter()
    result = run_rbmm(setup.problem, setup.config, setup.init)
    wall = time.perf_counter() - start

    audit = audit_trace(result.trace)
    running = audit.running_min_stationarity
    try:
        slope = diagnostics.rate_fit(running).slope
    except ValueError:
        slope = None
    metric = None
    if setup.final_metric is not None:
        metric = float(setup.final_metric(result))
    last = result.trace[-1]
    summary = {
        "trial": trial,
        "seed": seed,
        "cycles": last.cycle,
        "stopped_early": result.stopped_early,
        "final_objective": last.objective,
        "metric_name": setup.metric_name,
        "final_metric": metric,
        "running_min_stationarity": running[-1] if running else None,
        "rate_fit_slope": slope,
        "descent_ok": audit.descent_ok,
        "all_deltas_certified": all(all(r.certified) for r in result.trace),
        "wall_time": wall,
    }
    return setup, result, summary


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        trials = int(cfg.get("trials", 1))
        if trials < 1:
            raise ConfigError("trials must be >= 1")
        base_seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        builder = BUILDERS[cfg["application"]]
        params = dict(cfg)
        # one dry build catches bad values before any file is written
        setup0, result0, summary0 = _run_trial(builder, params, 0, base_seed)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    trial_summaries = []
    try:
        for t in range(trials):
            if t == 0:
                setup, result, summary = setup0, result0, summary0
            else:
                setup, result, summary = _run_trial(
                    builder, params, t, base_seed + t
                )
            with open(out / f"trace_trial{t}.csv", "w", newline="") as fh:
                fh.write(trace_csv_text(result.trace))
            trial_summaries.append(summary)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    summary = {
        "application": setup0.name,
        "config": resolved_config(setup0, trials, base_seed),
        "trials": trial_summaries,
        "wall_time": summary0["wall_time"] + time.perf_counter() - start,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _block_fd_reports(setup: RunSetup, seed: int, sabotage: bool) -> list:
    reports = []
    state = setup.init
    problem = setup.problem
    for i in range(len(problem.manifolds)):
        def value(p, i=i):
            return float(problem.value(state.replace(i, p)))

        def rgrad(p, i=i):
            g = egrad_to_rgrad(p, problem.egrad_block(state.replace(i, p), i))
            if sabotage:
                g = TangentVector(p, 2.0 * g.data)
            return g

        reports.append(
            diagnostics.fd_gradient_check(
                value,
                rgrad,
                state[i],
                seed=seed + i,
                name=f"{setup.name}:block{i}:fd",
            )
        )
    return reports


def cmd_probe(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else {}
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        reports = [
            diagnostics.circle_gsmooth_probe(),
            diagnostics.euclidean_gsmooth_probe(seed=seed),
            diagnostics.distance_equivalence_probe(
                Sphere(8), seed=seed, name="distance_equivalence:sphere"
            ),
            diagnostics.distance_equivalence_probe(
                SPD(4), seed=seed, name="distance_equivalence:spd"
            ),
        ]
        if cfg:
            fixture = cfg.get("probe_fixture", "")
            if fixture not in ("", "wrong_gradient"):
                raise ConfigError(f"unknown probe_fixture {fixture!r}")
            params = dict(cfg)
            params["seed"] = seed
            setup = BUILDERS[cfg["application"]](params)
            reports.extend(
                _block_fd_reports(setup, seed, fixture == "wrong_gradient")
            )
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = [json.loads(r.to_json()) for r in reports]
    with open(out / "probes.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}")
    return 0 if all(r.passed for r in reports) else 1


def _dataset(application: str, cfg: dict, seed: int) -> tuple:
    """(named arrays, generation metadata) for one application's data."""
    if application == "subspace-tracking":
        d = int(cfg.get("d", 30))
        k = int(cfg.get("k", 3))
        snapshots = int(cfg.get("snapshots", 10))
        samples = int(cfg.get("samples", 5))
        noise_std = float(cfg.get("noise_std", 0.1))
        data, model = subspace.generate(d, k, snapshots, samples, noise_std, seed)
        arrays = {
            "snapshots": np.stack(data),
            "times": model.times,
            "truth_frame": model.stacked(),
            "rates": model.rates,
        }
        meta = {
            "d": d,
            "k": k,
            "snapshots": snapshots,
            "samples": samples,
            "noise_std": noise_std,
        }
    elif application == "optimistic-likelihood":
        dim = int(cfg.get("dim", 10))
        count = int(cfg.get("count", 40))
        arrays = {"samples": likelihood.generate(dim, count, seed)}
        meta = {"dim": dim, "count": count}
    elif application == "cp-dictionary":
        shape = cfg.get("shape", (30, 20, 10))
        if isinstance(shape, str):
            shape = tuple(int(s) for s in shape.replace("x", ",").split(",") if s)
        shape = tuple(int(s) for s in shape)
        rank = int(cfg.get("rank", 3))
        variant = str(cfg.get("variant", "euclidean"))
        ortho = variant == "stiefel_first"
        tensor, factors = cp.generate(shape, rank, seed, first_orthonormal=ortho)
        arrays = {"tensor": tensor}
        for i, factor in enumerate(factors):
            arrays[f"factor{i}"] = factor
        meta = {
            "shape": list(shape),
            "rank": rank,
            "first_orthonormal": ortho,
        }
    elif application == "rpca":
        rows = int(cfg.get("rows", 50))
        cols = int(cfg.get("cols", 50))
        rank = int(cfg.get("rank", 2))
        corruption = float(cfg.get("corruption", 0.05))
        observed, low, spikes = rpca.generate(rows, cols, rank, corruption, seed)
        arrays = {"observed": observed, "low_rank": low, "spikes": spikes}
        meta = {
            "rows": rows,
            "cols": cols,
            "rank": rank,
            "corruption": corruption,
        }
    else:
        raise ConfigError(f"{application} has no synthetic dataset")
    return arrays, meta


def cmd_gen_data(args) -> int:
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        form = cfg.get("format", "binary")
        if form not in ("binary", "csv"):
            raise ConfigError("format must be 'binary' or 'csv'")
        arrays, meta = _dataset(cfg["application"], cfg, seed)
        if form == "csv":
            bad = [k for k, a in arrays.items() if np.asarray(a).ndim > 2]
            if bad:
                raise ConfigError(
                    f"format = csv holds only 1- or 2-D arrays; "
                    f"{', '.join(bad)} would need the binary format"
                )
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shapes = {}
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=float)
        shapes[name] = list(arr.shape)
        if form == "binary":
            datafiles.write_array(out / f"{name}.bin", arr)
        else:
            datafiles.write_csv(out / f"{name}.csv", arr)
    meta_doc = {
        "application": cfg["application"],
        "seed": seed,
        "format": form,
        "arrays": shapes,
        "params": meta,
    }
    with open(out / "meta.json", "w") as fh:
        json.dump(meta_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rbmm",
        description="Block majorization-minimization experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "run": "solve the configured application and write traces + summary",
        "probe": "run the numerical diagnostics and write probe reports",
        "gen-data": "write the configured application's dataset to files",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument(
            "--config", required=(name != "probe"), help="path to INI config"
        )
        p.add_argument(
            "--seed", type=int, default=None, help="override the config seed"
        )
        p.add_argument("--out", default="rbmm-out", help="output directory")
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "probe":
        return cmd_probe(args)
    return cmd_gen_data(args)


if __name__ == "__main__":
    sys.exit(main())
