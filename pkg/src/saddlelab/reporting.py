"""Serialization of experiment results.

Every experiment produces one JSON report (canonical form, so identical
inputs hash identically), a CSV summary, and plot-ready two-column .dat
files; the run directory is sealed by a manifest listing each emitted
file with its SHA-256 digest. Wall-clock timestamps appear only in the
manifest, never in report payloads.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .analysis import (
    EscapeTimeReport,
    GlobalBoundReport,
    OrbitComparison,
    StableManifoldReport,
    TaylorCheckReport,
)
from .flows import Trajectory

SCHEMA_KEYS = ("report_type", "inputs", "per_ic", "bound", "max", "passed")


def _jsonable(x: Any) -> Any:
    if x is None or isinstance(x, (str, bool)):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        # canonical JSON forbids NaN/Infinity literals
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    raise TypeError(f"cannot serialize {type(x).__name__} into a report")


def canonical_json(payload: Mapping[str, Any]) -> str:
    """Deterministic JSON text: sorted keys, fixed separators, shortest
    round-trip float repr. Equal payloads give byte-equal text."""
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _schema(report_type: str, inputs: dict, per_ic: list,
            bound: float | None, max_value: float | None,
            passed: bool | None) -> dict:
    return {
        "report_type": report_type,
        "inputs": inputs,
        "per_ic": per_ic,
        "bound": bound,
        "max": max_value,
        "passed": passed,
    }


# ---------------------------------------------------------------------------
# payload builders, one per experiment


def simulate_payload(traj: Trajectory, function_spec: str, variant: str,
                     x0: np.ndarray) -> dict:
    end = traj.states[-1]
    inputs = {
        "function": function_spec,
        "variant": variant,
        "x0": x0,
        "t_max": traj.config.t_max,
        "grad_stop": traj.config.grad_stop,
        "max_step": traj.config.max_step,
    }
    per_ic = [{
        "termination": traj.termination.kind.value,
        "t_end": traj.times[-1],
        "end_state": end,
        "f_end": traj.f_values[-1],
        "arc_length": traj.arc_lengths[-1],
        "n_nodes": len(traj.times),
    }]
    return _schema("simulate", inputs, per_ic, None, None, None)


def escape_sweep_payload(rep: EscapeTimeReport, function_spec: str) -> dict:
    inputs = {
        "function": function_spec,
        "r": rep.r,
        "C": rep.C,
        "n_ic": rep.n_ic,
        "seed": rep.seed,
        "saddle": {
            "location": rep.saddle.location,
            "eigenvalues": rep.saddle.eigenvalues,
            "classification": rep.saddle.classification,
            "kappa": rep.saddle.kappa,
        },
    }
    per_ic = [{
        "ic": o.ic,
        "occupancy": o.occupancy,
        "termination": o.termination.value,
        "converged_to_saddle": o.converged_to_saddle,
    } for o in rep.per_ic]
    return _schema("escape-sweep", inputs, per_ic,
                   rep.bound, rep.max_occupancy, rep.passed)


def stall_payload(function_spec: str, r: float, theta: float,
                  rows: Sequence[dict]) -> dict:
    """rows: one dict per epsilon with keys eps, time (None when the ball
    was never entered), and the two reference lower-bound expressions."""
    inputs = {"function": function_spec, "r": r, "theta": theta}
    return _schema("gd-stall", inputs, list(rows), None, None, None)


def orbit_payload(function_spec: str,
                  comparisons: Sequence[tuple[np.ndarray, OrbitComparison]],
                  seed: int | None) -> dict:
    inputs = {"function": function_spec, "n_ic": len(comparisons),
              "seed": seed}
    per_ic = [{
        "ic": ic,
        "sup_error": c.sup_error,
        "s_max": c.s_max,
        "unit_speed_deviation": c.unit_speed_deviation,
    } for ic, c in comparisons]
    worst = max((c.sup_error for _, c in comparisons), default=0.0)
    return _schema("compare-orbits", inputs, per_ic, None, worst, None)


def manifold_payload(rep: StableManifoldReport, function_spec: str) -> dict:
    inputs = {
        "function": function_spec,
        "saddle_point": rep.saddle_point,
        "r": rep.r,
        "n_ic": rep.n_ic,
        "seed": rep.seed,
    }
    per_ic = [{"termination": k.value} for k in rep.terminations]
    inputs["n_converged_to_saddle"] = rep.n_converged
    return _schema("stable-manifold", inputs, per_ic, None, rep.fraction, None)


def taylor_payload(rep: TaylorCheckReport, function_spec: str,
                   x_star: np.ndarray) -> dict:
    inputs = {
        "function": function_spec,
        "x_star": x_star,
        "C1": rep.C1,
        "C2": rep.C2,
        "r_hat": rep.r_hat,
        "n_samples": rep.n_samples,
        "seed": rep.seed,
        "derived_C": rep.derived_C,
    }
    per_ic = [{
        "point": v.point,
        "which": v.which,
        "lhs": v.lhs,
        "rhs": v.rhs,
    } for v in rep.violations]
    return _schema("taylor-check", inputs, per_ic,
                   0.0, float(len(rep.violations)), rep.passed)


def global_payload(rep: GlobalBoundReport, function_spec: str) -> dict:
    inputs = {
        "function": function_spec,
        "R": rep.R,
        "r": rep.r,
        "C": rep.C,
        "nu": rep.nu,
        "M": rep.M,
        "kappa": rep.kappa,
        "dimension": rep.d,
        "n_ic": rep.n_ic,
        "seed": rep.seed,
        "n_left_ball": rep.n_left_ball,
    }
    per_ic = [{
        "ic": m.ic,
        "time": m.time,
        "termination": m.termination.value,
        "nearest_class": m.nearest_class,
        "nearest_distance": m.nearest_distance,
        "converged_to_minimum": m.converged_to_minimum,
        "left_ball": m.left_ball,
    } for m in rep.measured]
    worst = max((m.time for m in rep.measured), default=0.0)
    return _schema("global-bound", inputs, per_ic, rep.bound, worst,
                   rep.passed)


# ---------------------------------------------------------------------------
# delimited writers


def write_csv(path: Path | str, header: Sequence[str],
              rows: Iterable[Sequence]) -> None:
    """CSV with 17-significant-digit floats (round-trip exact)."""
    def cell(v) -> str:
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.17g}"
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v)).lower()
        return str(v)

    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def write_dat(path: Path | str, x: Sequence[float], y: Sequence[float]) -> None:
    """Two-column whitespace-separated curve for external plotting."""
    with open(path, "w") as fh:
        for a, b in zip(x, y):
            fh.write(f"{float(a):.17g} {float(b):.17g}\n")


# ---------------------------------------------------------------------------
# figures


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def fig_trajectory(traj: Trajectory, path: Path | str, title: str) -> None:
    """Phase portrait for planar problems, objective decay otherwise."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    if traj.states.shape[1] == 2:
        ts = np.linspace(traj.t0, traj.t_end, 600)
        pts = traj.at_many(ts)
        ax.plot(pts[:, 0], pts[:, 1], lw=1.2)
        ax.plot(*traj.states[0], "o", ms=6, label="start")
        ax.plot(*traj.states[-1], "s", ms=6, label="end")
        ax.set_xlabel("x_0")
        ax.set_ylabel("x_1")
        ax.legend(loc="best", fontsize=8)
        ax.set_aspect("equal", adjustable="datalim")
    else:
        ax.plot(traj.times, traj.f_values, lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel("f(x(t))")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_scatter(x: Sequence[float], y: Sequence[float], xlabel: str,
                ylabel: str, path: Path | str, title: str,
                hline: float | None = None, logy: bool = False) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(x, y, ".", ms=4)
    if hline is not None:
        ax.axhline(hline, color="tab:red", lw=1.0, ls="--",
                   label=f"bound = {hline:.6g}")
        ax.legend(loc="best", fontsize=8)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_stall(eps: Sequence[float], measured: Sequence[float],
              ref_minus_r_log: Sequence[float],
              ref_log_r_over: Sequence[float],
              path: Path | str, title: str) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.semilogx(eps, measured, "o-", label="measured stall time")
    ax.semilogx(eps, ref_minus_r_log, "--", label="-r log(eps)")
    ax.semilogx(eps, ref_log_r_over, ":", label="log(r/eps)")
    ax.invert_xaxis()
    ax.set_xlabel("eps")
    ax.set_ylabel("time in ball before entering B_eps")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# run manifest


@dataclass(frozen=True)
class RunManifest:
    tool: str
    version: str
    experiment: str
    config: dict
    started: str
    finished: str
    files: dict[str, str]
    verdicts: dict[str, bool]


def _tool_version() -> str:
    try:
        from importlib.metadata import version

        return version("saddlelab")
    except Exception:
        return "0+unknown"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(run_dir: Path, experiment: str, config: Mapping[str, Any],
                   started: str, verdicts: Mapping[str, bool]) -> RunManifest:
    """Hash every emitted file and seal the run directory. Must be called
    after all other writes; the manifest itself is excluded from hashing."""
    files = {
        p.name: sha256_file(p)
        for p in sorted(run_dir.iterdir())
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = RunManifest(
        tool="saddlelab",
        version=_tool_version(),
        experiment=experiment,
        config=dict(config),
        started=started,
        finished=utc_now(),
        files=files,
        verdicts=dict(verdicts),
    )
    payload = {
        "tool": manifest.tool,
        "version": manifest.version,
        "experiment": manifest.experiment,
        "config": manifest.config,
        "started": manifest.started,
        "finished": manifest.finished,
        "files": manifest.files,
        "verdicts": manifest.verdicts,
    }
    with open(run_dir / "manifest.json", "w") as fh:
        fh.write(canonical_json(payload))
    return manifest
