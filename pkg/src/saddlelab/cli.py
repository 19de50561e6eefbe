"""Command-line front end for the experiment library.

Each run writes a fresh directory ``<experiment>-<seed>-<timestamp>``
under ``--out`` containing the canonical JSON report, a CSV summary,
plot-ready two-column .dat curves, rendered figures, and a manifest
hashing every emitted file. Identical (config, seed) pairs reproduce
byte-identical report payloads; wall-clock timestamps live only in the
manifest.

Exit codes: 0 all asserted bounds hold, 2 a bound or model assumption
failed (or the experiment itself errored), 1 usage/config/IO problems.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import analysis, reporting
from .errors import (
    AssumptionViolation,
    BoundViolation,
    ConfigError,
    NeverEntered,
    SaddleLabError,
)
from .flows import GD, NGD, IntegratorConfig, integrate, write_trajectory_csv
from .objectives import FUNCTION_GRAMMAR, parse_catalog_entry, trig_lattice_critical_points
from .spectral import classify_critical_point, matrix_abs

# experiments that draw random initial conditions; these refuse to run
# without an explicit seed so no result ever depends on hidden entropy
_RANDOMIZED = {"escape-sweep", "stable-manifold", "taylor-check", "global-bound"}

_DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {"variant": "ngd"},
    "escape-sweep": {"r": 0.5, "C": 5.0, "n_ic": 256},
    "gd-stall": {"r": 1.0, "theta": 1e-6,
                 "eps": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]},
    "compare-orbits": {"r": 1.0, "n_ic": 20},
    "stable-manifold": {"r": 0.5, "n_ic": 1000},
    "taylor-check": {"c1": 0.6, "c2": 0.9, "r_hat": 0.1,
                     "n_samples": 100000},
    "global-bound": {"R": 4.0, "r": 0.3, "C": 5.0, "n_ic": 200},
}

_POSITIVE_KEYS = ("r", "theta", "r_hat", "R", "t_max", "grad_stop",
                  "max_step", "c1", "c2")

# allowed settings per experiment; doubles as the schema for config files
_COMMON_KEYS = ["function", "seed", "out", "t_max", "grad_stop"]
_COMMAND_KEYS: dict[str, list[str]] = {
    "simulate": _COMMON_KEYS + ["x0", "variant", "max_step"],
    "escape-sweep": _COMMON_KEYS + ["saddle", "r", "C", "n_ic"],
    "gd-stall": _COMMON_KEYS + ["saddle", "r", "theta", "eps"],
    "compare-orbits": _COMMON_KEYS + ["x0", "r", "n_ic"],
    "stable-manifold": _COMMON_KEYS + ["saddle", "r", "n_ic"],
    "taylor-check": _COMMON_KEYS + ["x_star", "c1", "c2", "r_hat",
                                    "n_samples"],
    "global-bound": _COMMON_KEYS + ["R", "r", "C", "n_ic", "nu",
                                    "strict_invariance"],
}


def _diag(category: str, message) -> None:
    # one machine-parsable line on stderr per failure
    text = " ".join(str(message).split())
    print(f"saddlelab:error:{category}: {text}", file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the exit-code contract
    # reserves 2 for bound violations, so remap usage problems to 1
    def error(self, message: str):
        _diag("usage", message)
        raise SystemExit(1)


def _vector(value) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    try:
        return [float(tok) for tok in str(value).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad vector literal {value!r}: {exc}") from None


def _float_list(value) -> list[float]:
    return _vector(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Effective settings for one run: config-file values overridden by
    CLI flags, with hard defaults filling the rest."""

    experiment: str
    values: dict[str, Any]

    def get(self, key: str, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def require(self, key: str):
        v = self.values.get(key)
        if v is None:
            raise ConfigError(f"missing required setting '{key}' "
                              f"for {self.experiment}")
        return v

    def validate(self) -> None:
        for key in _POSITIVE_KEYS:
            v = self.values.get(key)
            if v is not None and not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"'{key}' must be a positive number, "
                                  f"got {v!r}")
        for key in ("n_ic", "n_samples"):
            v = self.values.get(key)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"'{key}' must be a positive integer, "
                                  f"got {v!r}")
        seed = self.values.get("seed")
        if seed is not None:
            if not isinstance(seed, int) or not (0 <= seed < 2 ** 64):
                raise ConfigError("seed must be an unsigned 64-bit integer")
        elif self.experiment in _RANDOMIZED:
            raise ConfigError(f"{self.experiment} samples random initial "
                              "conditions; --seed is required")


def _merge_config(args: argparse.Namespace, dests: Sequence[str]) -> ExperimentConfig:
    experiment = args.experiment
    file_values: dict[str, Any] = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a flat JSON object")
        allowed = set(dests) | {"experiment"}
        allowed.discard("config")
        unknown = sorted(set(loaded) - allowed)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "experiment" in loaded and loaded["experiment"] != experiment:
            raise ConfigError(
                f"config file is for '{loaded['experiment']}', "
                f"but the command line says '{experiment}'")
        file_values = {k: v for k, v in loaded.items() if k != "experiment"}

    values: dict[str, Any] = {}
    defaults = _DEFAULTS.get(experiment, {})
    for dest in dests:
        if dest == "config":
            continue
        v = getattr(args, dest, None)
        if v is None:
            v = file_values.get(dest)
        if v is None:
            v = defaults.get(dest)
        values[dest] = v
    if values.get("out") is None:
        values["out"] = "results"
    for key in ("x0", "saddle", "x_star"):
        if values.get(key) is not None:
            values[key] = _vector(values[key])
    if values.get("eps") is not None:
        values["eps"] = _float_list(values["eps"])
    cfg = ExperimentConfig(experiment, values)
    cfg.validate()
    return cfg


def _integrator(cfg: ExperimentConfig) -> IntegratorConfig:
    kw = {}
    for key in ("t_max", "grad_stop", "max_step"):
        if cfg.values.get(key) is not None:
            kw[key] = float(cfg.values[key])
    return IntegratorConfig(**kw)


def _run_dir(cfg: ExperimentConfig) -> Path:
    seed = cfg.get("seed", 0)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    base = Path(cfg.values["out"]) / f"{cfg.experiment}-{seed}-{stamp}"
    candidate, k = base, 1
    while candidate.exists():
        candidate = Path(f"{base}-{k}")
        k += 1
    candidate.mkdir(parents=True)
    return candidate


def _slug(cfg: ExperimentConfig, *keys: str) -> str:
    parts = [cfg.experiment]
    for key in keys:
        v = cfg.values.get(key)
        if v is None:
            continue
        tag = key.replace("_", "")
        parts.append(f"{tag}{v:g}" if isinstance(v, float) else f"{tag}{v}")
    seed = cfg.get("seed")
    if seed is not None:
        parts.append(f"seed{seed}")
    return "_".join(parts)


def _config_echo(cfg: ExperimentConfig) -> dict:
    echo: dict[str, Any] = {"experiment": cfg.experiment}
    for k, v in sorted(cfg.values.items()):
        if isinstance(v, np.ndarray):
            v = v.tolist()
        echo[k] = v
    return echo


def _write_report(run_dir: Path, name: str, payload: dict) -> None:
    (run_dir / f"{name}.json").write_text(reporting.canonical_json(payload))


# ---------------------------------------------------------------------------
# subcommand handlers; each returns (verdicts, run_dir)


def _cmd_simulate(cfg: ExperimentConfig) -> tuple[dict[str, bool], Path]:
    entry = parse_catalog_entry(cfg.require("function"))
    f = entry.function
    x0 = np.asarray(cfg.require("x0"), dtype=float)
    variant = str(cfg.get("variant", "ngd")).lower()
    if variant not in ("gd", "ngd"):
        raise ConfigError(f"variant must be gd or ngd, got {variant!r}")
    kind = NGD if variant == "ngd" else GD
    traj = integrate(f, kind, x0, _integrator(cfg))

    run_dir = _run_dir(cfg)
    base = _slug(cfg)
    write_trajectory_csv(traj, run_dir / f"trajectory_{base}.csv")
    reporting.write_dat(run_dir / f"objective_vs_t_{base}.dat",
                        traj.times, traj.f_values)
    gnorms = [float(np.linalg.norm(f.gradient(x))) for x in traj.states]
    reporting.write_dat(run_dir / f"gradnorm_vs_t_{base}.dat",
                        traj.times, gnorms)
    reporting.fig_trajectory(traj, run_dir / f"trajectory_{base}.png",
                             f"{variant} on {entry.name}")
    payload = reporting.simulate_payload(traj, entry.name, variant, x0)
    _write_report(run_dir, base, payload)
    print(f"{variant} run: {traj.termination.kind.value} at "
          f"t={traj.times[-1]:.6g}")
    return {}, run_dir


def _cmd_escape_sweep(cfg: ExperimentConfig) -> tuple[dict[str, bool], Path]:
    entry = parse_catalog_entry(cfg.require("function"))
    f = entry.function
    saddle_pt = np.asarray(cfg.get("saddle", [0.0] * f.dimension), dtype=float)
    info = classify_critical_point(f, saddle_pt)
    r, C = float(cfg.require("r")), float(cfg.require("C"))
    n_ic, seed = int(cfg.require("n_ic")), int(cfg.require("seed"))

    violated = False
    try:
        rep = analysis.escape_sweep(f, info, r, n_ic, seed, C=C,
                                    cfg=_integrator(cfg))
    except BoundViolation as exc:
        if exc.report is None:
            raise
        rep, violated = exc.report, True
        _diag("violation", exc)

    run_dir = _run_dir(cfg)
    base = _slug(cfg, "r", "C", "n_ic")
    _write_report(run_dir, base, reporting.escape_sweep_payload(rep, entry.name))
    d = f.dimension
    header = [f"ic_{i}" for i in range(d)] + [
        "occupancy", "termination", "converged_to_saddle"]
    reporting.write_csv(
        run_dir / f"{base}.csv", header,
        ([*o.ic, o.occupancy, o.termination.value, o.converged_to_saddle]
         for o in rep.per_ic))
    if d == 2:
        rel = [o.ic - saddle_pt for o in rep.per_ic]
        xs = [math.atan2(v[1], v[0]) for v in rel]
        xlabel = "initial angle on the sphere"
    else:
        xs = list(range(n_ic))
        xlabel = "initial-condition index"
    ys = [o.occupancy for o in rep.per_ic]
    order = np.argsort(xs)
    reporting.write_dat(run_dir / f"occupancy_{base}.dat",
                        np.asarray(xs)[order], np.asarray(ys)[order])
    reporting.fig_scatter(xs, ys, xlabel, "time inside the ball",
                          run_dir / f"occupancy_{base}.png",
                          f"occupancy around the saddle of {entry.name}",
                          hline=rep.bound)
    verdict = rep.passed and not violated
    print(f"max occupancy {rep.max_occupancy:.6g} vs bound {rep.bound:.6g}: "
          f"{'PASS' if verdict else 'FAIL'}")
    return {"escape_bound": verdict}, run_dir


def _cmd_gd_stall(cfg: ExperimentConfig) -> tuple[dict[str, bool], Path]:
    entry = parse_catalog_entry(cfg.require("function"))
    f = entry.function
    saddle_pt = np.asarray(cfg.get("saddle", [0.0] * f.dimension), dtype=float)
    r = float(cfg.require("r"))
    theta = float(cfg.require("theta"))
    eps_list = [float(e) for e in cfg.require("eps")]
    for e in eps_list:
        if not 0.0 < e < r:
            raise ConfigError(f"eps values must lie in (0, r); got {e:g}")

    info = classify_critical_point(f, saddle_pt)
    ic = analysis.saddle_frame_ic(info, r, theta)
    icfg = _integrator(cfg)
    rows = []
    for eps in eps_list:
        try:
            tval = analysis.gd_stall_time(f, saddle_pt, r, eps, ic, icfg)
        except NeverEntered:
            tval = None
        rows.append({
            "eps": eps,
            "time": tval,
            "ref_minus_r_log_eps": -r * math.log(eps),
            "ref_log_r_over_eps": math.log(r / eps),
        })

    run_dir = _run_dir(cfg)
    base = _slug(cfg, "r", "theta")
    _write_report(run_dir, base,
                  reporting.stall_payload(entry.name, r, theta, rows))
    reporting.write_csv(
        run_dir / f"{base}.csv",
        ["eps", "time", "ref_minus_r_log_eps", "ref_log_r_over_eps"],
        ([row["eps"],
          "never-entered" if row["time"] is None else row["time"],
          row["ref_minus_r_log_eps"], row["ref_log_r_over_eps"]]
         for row in rows))
    measured = [(row["eps"], row["time"]) for row in rows
                if row["time"] is not None]
    if measured:
        xs, ys = zip(*measured)
        reporting.write_dat(run_dir / f"stall_{base}.dat", xs, ys)
        reporting.fig_stall(
            xs, ys,
            [-r * math.log(e) for e in xs],
            [math.log(r / e) for e in xs],
            run_dir / f"stall_{base}.png",
            f"gradient-descent stall near the saddle of {entry.name}")
    for row in rows:
        shown = "never entered" if row["time"] is None else f"{row['time']:.6g}"
        print(f"eps={row['eps']:g}: stall time {shown}")
    return {}, run_dir


def _cmd_compare_orbits(cfg: ExperimentConfig) -> tuple[dict[str, bool], Path]:
    entry = parse_catalog_entry(cfg.require("function"))
    f = entry.function
    icfg_kw = {}
    if cfg.values.get("grad_stop") is not None:
        icfg_kw["grad_stop"] = float(cfg.values["grad_stop"])
    cfg_gd = IntegratorConfig(escape_radius=100.0, **icfg_kw)
    cfg_ngd = IntegratorConfig(
        t_max=float(cfg.get("t_max", 8.0)), escape_radius=100.0, **icfg_kw)

    if cfg.values.get("x0") is not None:
        ics = [np.asarray(cfg.values["x0"], dtype=float)]
        seed = None
    else:
        seed = cfg.values.get("seed")
        if seed is None:
            raise ConfigError("compare-orbits needs either --x0 or --seed "
                              "with --n-ic to sample initial conditions")
        rng = np.random.default_rng(int(seed))
        ics = list(analysis.sample_on_sphere(
            rng, np.zeros(f.dimension), float(cfg.require("r")),
            int(cfg.require("n_ic"))))

    comparisons = [(ic, analysis.compare_orbits(f, ic, cfg_gd, cfg_ngd))
                   for ic in ics]

    run_dir = _run_dir(cfg)
    base = _slug(cfg, "n_ic")
    _write_report(run_dir, base,
                  reporting.orbit_payload(entry.name, comparisons, seed))
    d = f.dimension
    header = [f"ic_{i}" for i in range(d)] + [
        "sup_error", "s_max", "unit_speed_deviation"]
    reporting.write_csv(
        run_dir / f"{base}.csv", header,
        ([*ic, c.sup_error, c.s_max, c.unit_speed_deviation]
         for ic, c in comparisons))
    reporting.write_dat(run_dir / f"sup_error_{base}.dat",
                        range(len(comparisons)),
                        [c.sup_error for _, c in comparisons])
    if d == 2:
        plt = reporting._plt()
        fig, ax = plt.subplots(figsize=(5.5, 4.5))
        ic0, c0 = comparisons[0]
        ax.plot(c0.gd_points[:, 0], c0.gd_points[:, 1], lw=2.2, alpha=0.5,
                label="gradient flow, arc-length parametrized")
        ax.plot(c0.ngd_points[:, 0], c0.ngd_points[:, 1], lw=0.9, ls="--",
                label="unit-speed flow")
        ax.plot(*ic0, "o", ms=5)
        ax.set_xlabel("x_0")
        ax.set_ylabel("x_1")
        ax.legend(loc="best", fontsize=8)
        ax.set_title(f"shared orbit on {entry.name}", fontsize=10)
        fig.tight_layout()
        fig.savefig(run_dir / f"orbits_{base}.png", dpi=120)
        plt.close(fig)
    else:
        reporting.fig_scatter(
            range(len(comparisons)), [c.sup_error for _, c in comparisons],
            "initial-condition index", "sup distance between curves",
            run_dir / f"orbits_{base}.png",
            f"orbit agreement on {entry.name}", logy=True)
    worst = max(c.sup_error for _, c in comparisons)
    print(f"worst orbit discrepancy over {len(comparisons)} runs: {worst:.3e}")
    return {}, run_dir


def _cmd_stable_manifold(cfg: ExperimentConfig) -> tuple[dict[str, bool], Path]:
    entry = parse_catalog_entry(cfg.require("function"))
    f = entry.function
    saddle_pt = np.asarray(cfg.get("saddle", [0.0] * f.dimension), dtype=float)
    rep = analysis.stable_manifold_detail(
        f, saddle_pt, float(cfg.require("r")), int(cfg.require("n_ic")),
        int(cfg.require("seed")), cfg=_integrator(cfg))

    run_dir = _run_dir(cfg)
    base = _slug(cfg, "r", "n_ic")
    _write_report(run_dir, base,
                  reporting.manifold_payload(rep, entry.name))
    reporting.write_csv(
        run_dir / f"{base}.csv", ["ic_index", "termination"],
        ([i, k.value] for i, k in enumerate(rep.terminations)))
    counts: dict[str, int] = {}
    for k in rep.terminations:
        counts[k.value] = counts.get(k.value, 0) + 1
    plt = reporting._plt()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    names = sorted(counts)
    ax.bar(names, [counts[n] for n in names])
    ax.set_ylabel("trajectories")
    ax.set_title(f"termination causes near the saddle of {entry.name}",
                 fontsize=10)
    fig.tight_layout()
    fig.savefig(run_dir / f"terminations_{base}.png", dpi=120)
    plt.close(fig)
    print(f"{rep.n_converged} of {rep.n_ic} runs converged to the saddle "
          f"(fraction {rep.fraction:g})")
    return {}, run_dir


def _cmd_taylor_check(cfg: ExperimentConfig) -> tuple[dict[str, bool], Path]:
    entry = parse_catalog_entry(cfg.require("function"))
    f = entry.function
    x_star = np.asarray(cfg.get("x_star", [0.0] * f.dimension), dtype=float)
    C1, C2 = float(cfg.require("c1")), float(cfg.require("c2"))
    r_hat = float(cfg.require("r_hat"))
    n_samples, seed = int(cfg.require("n_samples")), int(cfg.require("seed"))
    rep = analysis.taylor_estimate_check(f, x_star, C1, C2, r_hat,
                                         n_samples, seed)

    run_dir = _run_dir(cfg)
    base = _slug(cfg, "c1", "c2", "r_hat", "n_samples")
    _write_report(run_dir, base,
                  reporting.taylor_payload(rep, entry.name, x_star))
    d = f.dimension
    header = [f"point_{i}" for i in range(d)] + ["which", "lhs", "rhs"]
    reporting.write_csv(
        run_dir / f"{base}.csv", header,
        ([*v.point, v.which, v.lhs, v.rhs] for v in rep.violations))

    # a small seeded subsample drives the scatter; the full n_samples
    # cloud is too heavy to plot or store
    rng = np.random.default_rng(seed)
    pts = analysis.sample_in_ball(rng, x_star, r_hat, min(2000, n_samples))
    absH = matrix_abs(f.hessian(x_star))
    dx = pts - x_star
    d2 = np.einsum("ij,jk,ik->i", dx, absH, dx)
    lhs = np.abs([f.value(p) for p in pts] - np.full(len(pts), f.value(x_star)))
    order = np.argsort(d2)
    reporting.write_dat(run_dir / f"value_gap_{base}.dat", d2[order], lhs[order])
    plt = reporting._plt()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(d2, lhs, ".", ms=2, alpha=0.5, label="|f(x) - f(x*)|")
    grid = np.linspace(0.0, float(d2.max()) if len(d2) else 1.0, 100)
    ax.plot(grid, C1 * grid, "--", color="tab:red",
            label=f"C1 * squared modified distance (C1={C1:g})")
    ax.set_xlabel("squared modified distance")
    ax.set_ylabel("objective gap")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"second-order envelope on {entry.name}", fontsize=10)
    fig.tight_layout()
    fig.savefig(run_dir / f"value_gap_{base}.png", dpi=120)
    plt.close(fig)
    print(f"{len(rep.violations)} violations in {n_samples} samples "
          f"(derived occupancy constant {rep.derived_C:.6g}): "
          f"{'PASS' if rep.passed else 'FAIL'}")
    return {"taylor_estimates": rep.passed}, run_dir


def _cmd_global_bound(cfg: ExperimentConfig) -> tuple[dict[str, bool], Path]:
    spec = cfg.require("function")
    entry = parse_catalog_entry(spec)
    f = entry.function
    R = float(cfg.require("R"))
    r, C = float(cfg.require("r")), float(cfg.require("C"))
    n_ic, seed = int(cfg.require("n_ic")), int(cfg.require("seed"))
    nu = cfg.values.get("nu")
    nu = None if nu is None else float(nu)
    # the periodic objective has critical points outside B_R that
    # trajectories may settle in, so extend the lattice by one period
    if spec.strip().startswith("trig-multiwell"):
        cps = trig_lattice_critical_points(f.dimension, R + 2.0 * math.pi)
    else:
        cps = list(entry.known_critical_points)

    violated = False
    try:
        rep = analysis.global_convergence_experiment(
            f, R, nu, r, C, n_ic, seed, cfg=_integrator(cfg),
            critical_points=cps,
            strict_invariance=bool(cfg.get("strict_invariance", False)))
    except BoundViolation as exc:
        if exc.report is None:
            raise
        rep, violated = exc.report, True
        _diag("violation", exc)

    run_dir = _run_dir(cfg)
    base = _slug(cfg, "R", "r", "C", "n_ic")
    _write_report(run_dir, base, reporting.global_payload(rep, entry.name))
    d = f.dimension
    header = [f"ic_{i}" for i in range(d)] + [
        "time", "termination", "nearest_class", "nearest_distance",
        "converged_to_minimum", "left_ball"]
    reporting.write_csv(
        run_dir / f"{base}.csv", header,
        ([*m.ic, m.time, m.termination.value, m.nearest_class,
          m.nearest_distance, m.converged_to_minimum, m.left_ball]
         for m in rep.measured))
    times = [m.time for m in rep.measured]
    reporting.write_dat(run_dir / f"times_{base}.dat",
                        range(len(times)), times)
    reporting.fig_scatter(
        range(len(times)), times, "initial-condition index",
        "time to reach a minimum", run_dir / f"times_{base}.png",
        f"convergence times on {entry.name} (M={rep.M:.4g}, nu={rep.nu:.4g})",
        hline=rep.bound, logy=True)
    verdict = rep.passed and not violated
    print(f"{sum(m.converged_to_minimum for m in rep.measured)} of {rep.n_ic} "
          f"runs converged; slowest {max(times):.6g} vs bound {rep.bound:.6g} "
          f"({rep.n_left_ball} left the sampling ball): "
          f"{'PASS' if verdict else 'FAIL'}")
    return {"global_bound": verdict}, run_dir


_HANDLERS = {
    "simulate": _cmd_simulate,
    "escape-sweep": _cmd_escape_sweep,
    "gd-stall": _cmd_gd_stall,
    "compare-orbits": _cmd_compare_orbits,
    "stable-manifold": _cmd_stable_manifold,
    "taylor-check": _cmd_taylor_check,
    "global-bound": _cmd_global_bound,
}


def _add_common(p: argparse.ArgumentParser, *, function_required: bool) -> None:
    p.add_argument("--function", required=function_required, default=None,
                   help="catalog function spec; see list-functions")
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (required for randomized experiments)")
    p.add_argument("--out", default=None,
                   help="parent directory for run output (default: results)")
    p.add_argument("--config", default=None,
                   help="flat JSON config file; CLI flags override it")
    p.add_argument("--t-max", dest="t_max", type=float, default=None,
                   help="integration horizon")
    p.add_argument("--grad-stop", dest="grad_stop", type=float, default=None,
                   help="gradient norm at which a run counts as converged")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="saddlelab",
                     description="Descent-flow experiments around saddle "
                                 "points: escape times, stalls, orbit "
                                 "equivalence, and convergence bounds.")
    sub = parser.add_subparsers(dest="experiment", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    _add_common(p, function_required=False)
    p.add_argument("--x0", default=None, help="initial point, comma-separated")
    p.add_argument("--variant", choices=("gd", "ngd"), default=None,
                   help="flow variant (default ngd)")
    p.add_argument("--max-step", dest="max_step", type=float, default=None)

    p = sub.add_parser("escape-sweep",
                       help="occupancy of a ball around a saddle vs. bound")
    _add_common(p, function_required=False)
    p.add_argument("--saddle", default=None,
                   help="saddle location, comma-separated (default origin)")
    p.add_argument("--r", type=float, default=None, help="ball radius")
    p.add_argument("--C", type=float, default=None, help="bound constant (> 4)")
    p.add_argument("--n-ic", dest="n_ic", type=int, default=None)

    p = sub.add_parser("gd-stall",
                       help="gradient-descent time trapped near a saddle")
    _add_common(p, function_required=False)
    p.add_argument("--saddle", default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--theta", type=float, default=None,
                   help="angle of the start off the stable eigenvector")
    p.add_argument("--eps", default=None,
                   help="comma-separated contraction thresholds")

    p = sub.add_parser("compare-orbits",
                       help="gradient flow vs. unit-speed flow as curves")
    _add_common(p, function_required=False)
    p.add_argument("--x0", default=None,
                   help="single initial point; otherwise ICs are sampled")
    p.add_argument("--r", type=float, default=None,
                   help="radius of the IC sphere when sampling")
    p.add_argument("--n-ic", dest="n_ic", type=int, default=None)

    p = sub.add_parser("stable-manifold",
                       help="fraction of random starts converging to a saddle")
    _add_common(p, function_required=False)
    p.add_argument("--saddle", default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--n-ic", dest="n_ic", type=int, default=None)

    p = sub.add_parser("taylor-check",
                       help="second-order envelopes around a critical point")
    _add_common(p, function_required=False)
    p.add_argument("--x-star", dest="x_star", default=None)
    p.add_argument("--c1", type=float, default=None)
    p.add_argument("--c2", type=float, default=None)
    p.add_argument("--r-hat", dest="r_hat", type=float, default=None)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=None)

    p = sub.add_parser("global-bound",
                       help="convergence-time bound over a whole ball")
    _add_common(p, function_required=False)
    p.add_argument("--R", type=float, default=None, help="sampling ball radius")
    p.add_argument("--r", type=float, default=None,
                   help="critical-point separation radius")
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--n-ic", dest="n_ic", type=int, default=None)
    p.add_argument("--nu", type=float, default=None,
                   help="gradient-norm floor; estimated from a grid if omitted")
    p.add_argument("--strict-invariance", dest="strict_invariance",
                   action="store_true", default=None,
                   help="abort if any trajectory leaves the sampling ball")

    sub.add_parser("list-functions", help="print the function-spec grammar")
    return parser


def _main(argv: Sequence[str] | None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.experiment == "list-functions":
        print(FUNCTION_GRAMMAR, end="")
        return 0

    cfg = _merge_config(args, _COMMAND_KEYS[args.experiment])
    if cfg.values.get("function") is None:
        raise ConfigError(f"--function is required for {cfg.experiment}")

    started = reporting.utc_now()
    verdicts, run_dir = _HANDLERS[cfg.experiment](cfg)
    reporting.write_manifest(run_dir, cfg.experiment, _config_echo(cfg),
                             started, verdicts)
    print(f"wrote {run_dir}")
    return 0 if all(verdicts.values()) else 2


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return _main(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 1
    except ConfigError as exc:
        _diag("config", exc)
        return 1
    except ValueError as exc:
        # bad user parameters surface from the library as ValueError
        # (wrong-length vectors, inconsistent radii); keep the
        # one-line stderr contract instead of a traceback
        _diag("config", exc)
        return 1
    except OSError as exc:
        _diag("io", exc)
        return 1
    except (BoundViolation, AssumptionViolation) as exc:
        _diag("violation", exc)
        return 2
    except SaddleLabError as exc:
        _diag("experiment", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
