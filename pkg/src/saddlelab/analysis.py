"""Quantitative saddle-escape experiments.

Each operation here turns one theoretical claim into a measurement:
closed-form occupancy bounds and the largest radius they are guaranteed
for, seeded escape-time sweeps against those bounds, the logarithmic
stall of plain gradient descent at a saddle, the dissipation identity
of the unit-speed flow, second-order Taylor-regime estimates, stable
manifold hit rates, the global convergence-time bound, and arc-length
orbit comparison between the two flows.

All randomized experiments are deterministic functions of their inputs
and a seed. Per-initial-condition work fans out across a thread pool
when SADDLELAB_THREADS is set to 2 or more; results are always reduced
in submission order, so parallelism never changes a report.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AssumptionViolation,
    BoundViolation,
    InvalidCError,
    NeverEntered,
)
from .flows import (
    GD,
    NGD,
    IntegratorConfig,
    TerminationKind,
    Trajectory,
    _scan_grid,
    arc_length_at,
    ball_occupancy,
    integrate,
    reparametrize_by_arc_length,
)
from .objectives import ObjectiveFunction
from .spectral import CriticalPointInfo, classify_critical_point, matrix_abs

Array = np.ndarray

__all__ = [
    "EscapeTimeReport",
    "ICOutcome",
    "RadiusEstimate",
    "TaylorCheckReport",
    "TaylorViolation",
    "DissipationReport",
    "StableManifoldReport",
    "GlobalBoundReport",
    "ConvergenceRecord",
    "OrbitComparison",
    "escape_time_bound",
    "max_permissible_radius",
    "escape_sweep",
    "gd_stall_time",
    "dissipation_trace",
    "taylor_estimate_check",
    "stable_manifold_sample",
    "stable_manifold_detail",
    "global_convergence_experiment",
    "compare_orbits",
    "sample_on_sphere",
    "sample_in_ball",
    "sample_in_annulus",
    "saddle_frame_ic",
    "convergence_radius",
]

# Terminal states closer to a critical point than this multiple of
# sqrt(grad_stop / |lambda|_min) are identified with it; at the stopping
# gradient norm the true distance is about sqrt-of-that for a quadratic,
# so the factor 10 gives an order of magnitude of slack.
_CONVERGENCE_FACTOR = 10.0


def convergence_radius(grad_stop: float, abs_eig_min: float) -> float:
    """Identification radius for 'reached/converged to' a critical point."""
    return _CONVERGENCE_FACTOR * math.sqrt(grad_stop / abs_eig_min)


def _workers() -> int:
    raw = os.environ.get("SADDLELAB_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_ordered(fn: Callable, items: Sequence):
    n = _workers()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Seeded samplers


def sample_on_sphere(rng: np.random.Generator, center: Array, radius: float,
                     n: int) -> Array:
    """n points uniform on the sphere of the given radius (rows)."""
    center = np.asarray(center, dtype=float)
    d = center.size
    out = np.empty((n, d))
    for i in range(n):
        while True:
            g = rng.standard_normal(d)
            norm = float(np.linalg.norm(g))
            if norm > 1e-12:
                break
        out[i] = center + radius * g / norm
    return out


def sample_in_ball(rng: np.random.Generator, center: Array, radius: float,
                   n: int) -> Array:
    """n points uniform in the ball (volume measure)."""
    center = np.asarray(center, dtype=float)
    d = center.size
    pts = sample_on_sphere(rng, np.zeros(d), 1.0, n)
    rho = radius * rng.random(n) ** (1.0 / d)
    return center + pts * rho[:, None]


def sample_in_annulus(rng: np.random.Generator, center: Array, r_in: float,
                      r_out: float, n: int) -> Array:
    """n points uniform in the annulus r_in <= |x - center| <= r_out."""
    center = np.asarray(center, dtype=float)
    d = center.size
    pts = sample_on_sphere(rng, np.zeros(d), 1.0, n)
    u = rng.random(n)
    rho = (r_in ** d + u * (r_out ** d - r_in ** d)) ** (1.0 / d)
    return center + pts * rho[:, None]


# ---------------------------------------------------------------------------
# Closed-form bounds


def escape_time_bound(kappa: float, r: float, C: float = 5.0) -> float:
    """Occupancy bound C * sqrt(kappa) * r for a ball of radius r around
    a non-degenerate saddle with condition number kappa."""
    if C <= 4.0:
        raise InvalidCError(C)
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    if r <= 0.0:
        raise ValueError("r must be positive")
    return C * math.sqrt(kappa) * r


@dataclass(frozen=True)
class RadiusEstimate:
    """Largest radius for which the occupancy bound is guaranteed, given
    a uniform third-derivative bound C_hat."""

    C: float
    C_hat: float
    lambda_max: float
    kappa: float
    r_bar: float


def max_permissible_radius(C: float, C_hat: float, lambda_max: float,
                           kappa: float) -> RadiusEstimate:
    """Closed-form r_bar = 6 kappa^(-1/2) C_hat^(-1) lambda_max *
    (C(3 kappa + 2)/(6 C kappa + 16) - 1/2); positive exactly when C > 4."""
    if C <= 4.0:
        raise InvalidCError(C)
    if C_hat <= 0.0:
        raise ValueError("C_hat must be positive")
    if lambda_max <= 0.0:
        raise ValueError("lambda_max must be positive")
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    paren = C * (3.0 * kappa + 2.0) / (6.0 * C * kappa + 16.0) - 0.5
    r_bar = 6.0 / math.sqrt(kappa) / C_hat * lambda_max * paren
    return RadiusEstimate(C=C, C_hat=C_hat, lambda_max=lambda_max,
                          kappa=kappa, r_bar=r_bar)


# ---------------------------------------------------------------------------
# Escape-time sweep


@dataclass(frozen=True, eq=False)
class ICOutcome:
    ic: Array
    occupancy: float
    termination: TerminationKind
    converged_to_saddle: bool


@dataclass(frozen=True, eq=False)
class EscapeTimeReport:
    saddle: CriticalPointInfo
    r: float
    C: float
    bound: float
    per_ic: tuple[ICOutcome, ...]
    max_occupancy: float
    slack: float
    n_ic: int
    seed: int

    @property
    def passed(self) -> bool:
        return self.max_occupancy <= self.bound


def escape_sweep(f: ObjectiveFunction, saddle: CriticalPointInfo, r: float,
                 n_ic: int, seed: int, C: float = 5.0,
                 cfg: IntegratorConfig | None = None) -> EscapeTimeReport:
    """Measure unit-speed-flow occupancy of B_r(saddle) over n_ic seeded
    initial conditions on the sphere of radius r.

    Each trajectory runs until it leaves B_{2r}(saddle) or terminates.
    Trajectories that reach or converge to the saddle are flagged and
    excluded from the reported maximum, which the theory bounds only for
    non-converging starts. Raises BoundViolation if the maximum exceeds
    C*sqrt(kappa)*r, and ValueError if r exceeds the guaranteed radius
    when a third-derivative bound is available.
    """
    cfg = cfg or IntegratorConfig()
    if saddle.classification != "saddle" or saddle.kappa is None:
        raise ValueError("escape_sweep needs a classified non-degenerate saddle")
    if r <= 0.0:
        raise ValueError("r must be positive")
    c_hat = f.third_derivative_bound
    if c_hat is not None and c_hat > 0.0:
        r_bar = max_permissible_radius(C, c_hat, saddle.abs_eig_max,
                                       saddle.kappa).r_bar
        if r > r_bar:
            raise ValueError(
                f"r={r:g} exceeds the guaranteed radius r_bar={r_bar:g} "
                f"for this function's third-derivative bound"
            )
    bound = escape_time_bound(saddle.kappa, r, C)
    center = saddle.location
    conv_tol = convergence_radius(cfg.grad_stop, saddle.abs_eig_min)
    rng = np.random.default_rng(seed)
    ics = sample_on_sphere(rng, center, r, n_ic)

    def one(ic: Array) -> ICOutcome:
        traj = integrate(f, NGD, ic, cfg, stop_region=(center, 2.0 * r))
        occ = ball_occupancy(traj, center, r).total_time
        converged = (
            traj.termination.kind is TerminationKind.CRITICAL_POINT_REACHED
            and float(np.linalg.norm(traj.states[-1] - center)) <= conv_tol
        )
        return ICOutcome(ic=ic, occupancy=occ,
                         termination=traj.termination.kind,
                         converged_to_saddle=converged)

    outcomes = tuple(_map_ordered(one, list(ics)))
    eligible = [o.occupancy for o in outcomes if not o.converged_to_saddle]
    max_occ = max(eligible) if eligible else 0.0
    report = EscapeTimeReport(saddle=saddle, r=r, C=C, bound=bound,
                              per_ic=outcomes, max_occupancy=max_occ,
                              slack=bound - max_occ, n_ic=n_ic, seed=seed)
    if max_occ > bound:
        worst = max((o for o in outcomes if not o.converged_to_saddle),
                    key=lambda o: o.occupancy)
        raise BoundViolation(
            f"occupancy {max_occ:.6g} exceeds bound {bound:.6g} "
            f"(C={C:g}, kappa={saddle.kappa:g}, r={r:g})",
            ic=worst.ic, occupancy=max_occ, report=report,
        )
    return report


# ---------------------------------------------------------------------------
# Gradient-descent stall at a saddle


def saddle_frame_ic(saddle: CriticalPointInfo, r: float, theta: float) -> Array:
    """Initial condition saddle + r(cos(theta) v_s + sin(theta) v_u) with
    v_s / v_u the leading stable (positive-eigenvalue) and unstable
    eigenvectors. For a diag(1,-1) saddle at the origin this is
    r*(cos theta, sin theta)."""
    eigs = np.asarray(saddle.eigenvalues)
    vecs = saddle.eigenvectors
    if vecs is None:
        raise ValueError("saddle record carries no eigenvector frame")
    pos = np.nonzero(eigs > 0)[0]
    neg = np.nonzero(eigs < 0)[0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("initial-condition frame needs both a stable and "
                         "an unstable direction")
    v_s = vecs[:, pos[0]]
    v_u = vecs[:, neg[0]]
    return saddle.location + r * (math.cos(theta) * v_s + math.sin(theta) * v_u)


def _stable_projector(f: ObjectiveFunction, saddle_point: Array) -> tuple[Array, Array]:
    H = f.hessian(np.asarray(saddle_point, dtype=float))
    eigs, vecs = np.linalg.eigh(H)
    pos = vecs[:, eigs > 0]
    if pos.shape[1] == 0:
        raise ValueError("critical point has no stable (positive-eigenvalue) "
                         "direction; stall time is undefined")
    return pos @ pos.T, eigs


def gd_stall_time(f: ObjectiveFunction, saddle_point: Array, r: float,
                  eps: float, ic: Array,
                  cfg: IntegratorConfig | None = None) -> float:
    """Time plain gradient descent spends inside B_r(saddle) before the
    stable-subspace component of (x - saddle) first contracts to eps
    while the state is inside the ball.

    The stable component of a linearized saddle decays like
    exp(-lambda t), so this grows like log(r/eps) as eps shrinks; the
    Euclidean distance to the saddle itself bottoms out at the scale of
    the unstable component and cannot register arbitrarily small eps.
    Raises NeverEntered when the trajectory leaves without the
    contraction event occurring.
    """
    cfg = cfg or IntegratorConfig()
    saddle_point = np.asarray(saddle_point, dtype=float)
    ic = np.asarray(ic, dtype=float)
    if not (0.0 < eps < r):
        raise ValueError("need 0 < eps < r")
    dist0 = float(np.linalg.norm(ic - saddle_point))
    if not math.isclose(dist0, r, rel_tol=1e-8, abs_tol=1e-12):
        raise ValueError(f"ic must lie on the sphere of radius {r:g} "
                         f"around the saddle (got distance {dist0:g})")
    P, _ = _stable_projector(f, saddle_point)

    traj = integrate(f, GD, ic, cfg)

    def entered(t: float) -> bool:
        dx = traj.at(t) - saddle_point
        return (float(np.linalg.norm(P @ dx)) <= eps
                and float(np.linalg.norm(dx)) < r)

    grid = _scan_grid(traj, cfg.max_step, traj.t0, traj.t_end)
    hit = None
    for i, t in enumerate(grid):
        if entered(float(t)):
            hit = i
            break
    if hit is None:
        raise NeverEntered(
            f"trajectory never contracted its stable component to eps={eps:g} "
            f"inside the radius-{r:g} ball"
        )
    if hit == 0:
        t_entry = float(grid[0])
    else:
        lo, hi = float(grid[hit - 1]), float(grid[hit])
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if entered(mid):
                hi = mid
            else:
                lo = mid
            if hi - lo <= cfg.event_time_tol:
                break
        t_entry = hi
    return ball_occupancy(traj, saddle_point, r,
                          t_window=(traj.t0, t_entry)).total_time


# ---------------------------------------------------------------------------
# Dissipation identity


@dataclass(frozen=True, eq=False)
class DissipationReport:
    """Rows (t, finite-difference df/dt, -|grad f|) at interior nodes."""

    rows: Array
    max_discrepancy: float


def dissipation_trace(traj: Trajectory, f: ObjectiveFunction) -> DissipationReport:
    """Check d/dt f(x(t)) = -|grad f(x(t))| along a unit-speed trajectory.

    The slope is the second-order centered finite difference on the
    (nonuniform) node grid, so the discrepancy scales with the cube of
    the node spacing; pass a trajectory integrated with a small max_step
    when tight agreement is required.
    """
    t = traj.times
    fv = traj.f_values
    n = len(t)
    rows = []
    worst = 0.0
    for i in range(1, n - 1):
        h0 = float(t[i] - t[i - 1])
        h1 = float(t[i + 1] - t[i])
        # a sliver gap next to a normal one amplifies roundoff in f
        # beyond any truncation-error budget; skip such nodes
        if h0 <= 0.0 or h1 <= 0.0 or min(h0, h1) < 1e-3 * max(h0, h1):
            continue
        slope = (
            -h1 / (h0 * (h0 + h1)) * float(fv[i - 1])
            + (h1 - h0) / (h0 * h1) * float(fv[i])
            + h0 / (h1 * (h0 + h1)) * float(fv[i + 1])
        )
        analytic = -float(np.linalg.norm(f.gradient(traj.states[i])))
        rows.append((float(t[i]), slope, analytic))
        worst = max(worst, abs(slope - analytic))
    return DissipationReport(rows=np.asarray(rows), max_discrepancy=worst)


# ---------------------------------------------------------------------------
# Taylor-regime estimates


@dataclass(frozen=True, eq=False)
class TaylorViolation:
    point: Array
    which: str  # "value" or "gradient"
    lhs: float
    rhs: float


@dataclass(frozen=True, eq=False)
class TaylorCheckReport:
    C1: float
    C2: float
    r_hat: float
    n_samples: int
    seed: int
    violations: tuple[TaylorViolation, ...]
    derived_C: float  # 8*C1/C2, the occupancy constant these imply
    tilde_trace: tuple[tuple[float, float], ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations


def taylor_estimate_check(f: ObjectiveFunction, x_star: Array, C1: float,
                          C2: float, r_hat: float, n_samples: int, seed: int,
                          traj: Trajectory | None = None) -> TaylorCheckReport:
    """Sample the ball B_{r_hat}(x_star) and test the two second-order
    estimates with H the Hessian at the critical point:
      |f(x) - f(x_star)| <= C1 * d_tilde(x - x_star)^2
      |grad f(x)| >= C2 * |H (x - x_star)| >= C2 sqrt(|lambda|_min) d_tilde.
    Both hold exactly for pure quadratics whenever C1 >= 1/2 and C2 <= 1;
    violations locate the radius where third-order terms take over.
    """
    if not C1 > 0.5:
        raise ValueError("C1 must exceed 1/2")
    if not 0.0 < C2 < 1.0:
        raise ValueError("C2 must lie in (0, 1)")
    x_star = np.asarray(x_star, dtype=float)
    H = f.hessian(x_star)
    absH = matrix_abs(H)
    lam_min = float(np.min(np.abs(np.linalg.eigvalsh(H))))
    if lam_min <= 0.0:
        raise ValueError("critical point must be non-degenerate")
    f_star = f.value(x_star)
    rng = np.random.default_rng(seed)
    samples = sample_in_ball(rng, x_star, r_hat, n_samples)

    violations: list[TaylorViolation] = []
    for x in samples:
        dx = x - x_star
        dtilde_sq = float(dx @ (absH @ dx))
        lhs_v = abs(f.value(x) - f_star)
        rhs_v = C1 * dtilde_sq
        if lhs_v > rhs_v:
            violations.append(TaylorViolation(x, "value", lhs_v, rhs_v))
            continue
        gnorm = float(np.linalg.norm(f.gradient(x)))
        hx = float(np.linalg.norm(H @ dx))
        if gnorm < C2 * hx:
            violations.append(TaylorViolation(x, "gradient", gnorm, C2 * hx))
            continue
        # chain tail |Hx| >= sqrt(|lambda|_min) d_tilde is an identity of
        # the spectral calculus; the slack only absorbs roundoff
        tail_rhs = math.sqrt(lam_min) * math.sqrt(max(dtilde_sq, 0.0))
        if hx < tail_rhs * (1.0 - 1e-12):
            violations.append(TaylorViolation(x, "gradient", hx, tail_rhs))

    trace: tuple[tuple[float, float], ...] = ()
    if traj is not None:
        trace = tuple(
            (float(t), float(math.sqrt(max((s - x_star) @ (absH @ (s - x_star)), 0.0))))
            for t, s in zip(traj.times, traj.states)
        )
    return TaylorCheckReport(C1=C1, C2=C2, r_hat=r_hat, n_samples=n_samples,
                             seed=seed, violations=tuple(violations),
                             derived_C=8.0 * C1 / C2, tilde_trace=trace)


# ---------------------------------------------------------------------------
# Stable-manifold sampling


@dataclass(frozen=True, eq=False)
class StableManifoldReport:
    saddle_point: Array
    r: float
    n_ic: int
    seed: int
    n_converged: int
    fraction: float
    terminations: tuple[TerminationKind, ...]


def stable_manifold_detail(f: ObjectiveFunction, saddle_point: Array, r: float,
                           n_ic: int, seed: int,
                           cfg: IntegratorConfig | None = None) -> StableManifoldReport:
    """Fraction of unit-speed trajectories from uniform starts in the
    annulus B_{2r} minus B_r that reach or converge to the saddle. The
    theory makes the target set measure zero, so the expected count is 0.
    """
    cfg = cfg or IntegratorConfig()
    saddle_point = np.asarray(saddle_point, dtype=float)
    H = f.hessian(saddle_point)
    lam_min = float(np.min(np.abs(np.linalg.eigvalsh(H))))
    conv_tol = convergence_radius(cfg.grad_stop, lam_min) if lam_min > 0 else 0.0
    rng = np.random.default_rng(seed)
    ics = sample_in_annulus(rng, saddle_point, r, 2.0 * r, n_ic)

    def one(ic: Array) -> tuple[bool, TerminationKind]:
        traj = integrate(f, NGD, ic, cfg,
                         stop_region=(saddle_point, 3.0 * r))
        converged = (
            traj.termination.kind is TerminationKind.CRITICAL_POINT_REACHED
            and float(np.linalg.norm(traj.states[-1] - saddle_point)) <= conv_tol
        )
        return converged, traj.termination.kind

    results = _map_ordered(one, list(ics))
    n_conv = sum(1 for c, _ in results if c)
    return StableManifoldReport(
        saddle_point=saddle_point, r=r, n_ic=n_ic, seed=seed,
        n_converged=n_conv, fraction=n_conv / n_ic,
        terminations=tuple(k for _, k in results),
    )


def stable_manifold_sample(f: ObjectiveFunction, saddle_point: Array, r: float,
                           n_ic: int, seed: int,
                           cfg: IntegratorConfig | None = None) -> float:
    return stable_manifold_detail(f, saddle_point, r, n_ic, seed, cfg).fraction


# ---------------------------------------------------------------------------
# Global convergence bound


@dataclass(frozen=True, eq=False)
class ConvergenceRecord:
    ic: Array
    time: float
    termination: TerminationKind
    terminal_point: Array
    nearest_class: str
    nearest_distance: float
    converged_to_minimum: bool
    left_ball: bool


@dataclass(frozen=True, eq=False)
class GlobalBoundReport:
    M: float
    nu: float
    R: float
    r: float
    d: int
    C: float
    kappa: float
    bound: float
    measured: tuple[ConvergenceRecord, ...]
    n_ic: int
    seed: int
    n_left_ball: int

    @property
    def passed(self) -> bool:
        return all(m.converged_to_minimum and m.time <= self.bound
                   for m in self.measured)


def _grid_in_ball(R: float, d: int, pitch: float, seed: int) -> Array:
    """Regular grid over [-R, R]^d restricted to the ball, falling back
    to seeded uniform sampling when the full grid would be too large."""
    per_axis = int(math.floor(2.0 * R / pitch)) + 1
    if per_axis ** d <= 2_000_000:
        axes = [np.linspace(-R, R, per_axis)] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return pts[np.linalg.norm(pts, axis=1) <= R]
    rng = np.random.default_rng(seed)
    return sample_in_ball(rng, np.zeros(d), R, 500_000)


def global_convergence_experiment(
    f: ObjectiveFunction,
    R: float,
    nu: float | None,
    r: float,
    C: float,
    n_ic: int,
    seed: int,
    cfg: IntegratorConfig | None = None,
    critical_points: Sequence[tuple[Array, str]] | None = None,
    strict_invariance: bool = False,
) -> GlobalBoundReport:
    """Measure convergence times of the unit-speed flow from n_ic seeded
    starts in B_R(0) against the closed-form bound
    2M/nu + C sqrt(kappa) (R+r)^d / r^(d-1).

    M is the sampled maximum of |f| over B_R(0) inflated by 1%; nu, when
    not supplied, is the sampled minimum of |grad f| over B_R(0) outside
    the r-balls around the known critical points (grid pitch r/10). A
    supplied nu is verified against that sampled minimum. Critical
    points (with classifications) must cover every attractor the runs
    can reach, including just beyond B_R. Trajectories that leave B_R
    are counted and reported; with strict_invariance=True they abort the
    experiment instead, since the theory assumes forward invariance.

    Raises AssumptionViolation for a failed hypothesis (gradient floor,
    critical-point separation, radius versus third-derivative bound) and
    BoundViolation if any run misses a minimum or overshoots the bound.
    """
    cfg = cfg or IntegratorConfig()
    if critical_points is None or len(critical_points) == 0:
        raise ValueError("global_convergence_experiment needs the known "
                         "critical points (with classifications)")
    if r <= 0.0 or R <= 0.0 or R <= r:
        raise ValueError("need 0 < r < R")
    if C <= 4.0:
        raise InvalidCError(C)
    d = f.dimension
    crit_pts = [np.asarray(p, dtype=float) for p, _ in critical_points]
    crit_cls = [c for _, c in critical_points]

    # spectra at the known critical points
    kappas: list[float] = []
    abs_min_eigs: list[float] = []
    inside_R: list[int] = []
    for i, p in enumerate(crit_pts):
        eigs = np.linalg.eigvalsh(f.hessian(p))
        a = np.abs(eigs)
        if float(a.min()) > 0.0:
            kappas.append(float(a.max() / a.min()))
            abs_min_eigs.append(float(a.min()))
        if float(np.linalg.norm(p)) <= R:
            inside_R.append(i)
    if not kappas:
        raise ValueError("all supplied critical points are degenerate")
    kappa = max(kappas)
    lam_abs_min = min(abs_min_eigs)

    c_hat = f.third_derivative_bound
    if c_hat is not None and c_hat > 0.0 and r > lam_abs_min / c_hat:
        raise AssumptionViolation(
            "r <= |lambda|_min / C_hat",
            f"r={r:g} exceeds {lam_abs_min / c_hat:g}",
        )

    # pairwise separation of critical points inside the working ball
    for ii in range(len(inside_R)):
        for jj in range(ii + 1, len(inside_R)):
            a, b = crit_pts[inside_R[ii]], crit_pts[inside_R[jj]]
            sep = float(np.linalg.norm(a - b))
            if sep < 2.0 * r:
                raise AssumptionViolation(
                    "critical points separated by at least 2r",
                    f"pair at distance {sep:g} < {2 * r:g}",
                )

    grid = _grid_in_ball(R, d, r / 10.0, seed)
    crit_arr = np.stack(crit_pts)
    fvals = np.array([abs(f.value(p)) for p in grid])
    crit_fvals = [abs(f.value(p)) for p in crit_pts
                  if float(np.linalg.norm(p)) <= R]
    M = 1.01 * max(float(fvals.max()), max(crit_fvals, default=0.0))

    dists = np.linalg.norm(grid[:, None, :] - crit_arr[None, :, :], axis=2)
    outside = np.min(dists, axis=1) > r
    if not outside.any():
        raise AssumptionViolation(
            "gradient floor region nonempty",
            "every grid point lies within r of a critical point",
        )
    gnorms = np.array([float(np.linalg.norm(f.gradient(p)))
                       for p in grid[outside]])
    sampled_floor = float(gnorms.min())
    if nu is None:
        nu = sampled_floor
    elif sampled_floor <= nu:
        raise AssumptionViolation(
            "|grad f| > nu outside the r-balls",
            f"sampled gradient norm {sampled_floor:g} <= nu={nu:g}",
        )
    if nu <= 0.0:
        raise AssumptionViolation("nu > 0", f"nu={nu:g}")

    bound = 2.0 * M / nu + C * math.sqrt(kappa) * (R + r) ** d / r ** (d - 1)

    conv_tol = convergence_radius(cfg.grad_stop, lam_abs_min)
    rng = np.random.default_rng(seed)
    ics = sample_in_ball(rng, np.zeros(d), R, n_ic)

    def one(ic: Array) -> ConvergenceRecord:
        traj = integrate(f, NGD, ic, cfg)
        end = traj.states[-1]
        dist_to_crit = np.linalg.norm(crit_arr - end[None, :], axis=1)
        j = int(np.argmin(dist_to_crit))
        nearest_dist = float(dist_to_crit[j])
        converged = (
            traj.termination.kind is TerminationKind.CRITICAL_POINT_REACHED
            and crit_cls[j] == "minimum"
            and nearest_dist <= conv_tol
        )
        left = bool(np.max(np.linalg.norm(traj.states, axis=1)) > R)
        return ConvergenceRecord(
            ic=ic, time=traj.t_end, termination=traj.termination.kind,
            terminal_point=end, nearest_class=crit_cls[j],
            nearest_distance=nearest_dist, converged_to_minimum=converged,
            left_ball=left,
        )

    records = tuple(_map_ordered(one, list(ics)))
    n_left = sum(1 for rec in records if rec.left_ball)
    if strict_invariance and n_left:
        raise AssumptionViolation(
            "trajectories remain in B_R(0)",
            f"{n_left} of {n_ic} runs left the ball of radius {R:g}",
        )
    report = GlobalBoundReport(M=M, nu=nu, R=R, r=r, d=d, C=C, kappa=kappa,
                               bound=bound, measured=records, n_ic=n_ic,
                               seed=seed, n_left_ball=n_left)
    for rec in records:
        if not rec.converged_to_minimum:
            raise BoundViolation(
                f"run from {np.array2string(rec.ic, precision=4)} ended by "
                f"{rec.termination.value} near a {rec.nearest_class} "
                f"(distance {rec.nearest_distance:.3g}) instead of a minimum",
                ic=rec.ic, occupancy=rec.time, report=report,
            )
        if rec.time > bound:
            raise BoundViolation(
                f"convergence time {rec.time:.6g} exceeds bound {bound:.6g}",
                ic=rec.ic, occupancy=rec.time, report=report,
            )
    return report


# ---------------------------------------------------------------------------
# Orbit comparison


@dataclass(frozen=True, eq=False)
class OrbitComparison:
    x0: Array
    s_grid: Array
    gd_points: Array
    ngd_points: Array
    sup_error: float
    s_max: float
    unit_speed_deviation: float  # max |L(t) - t| over the unit-speed nodes


def compare_orbits(f: ObjectiveFunction, x0: Array,
                   cfg_gd: IntegratorConfig | None = None,
                   cfg_ngd: IntegratorConfig | None = None,
                   n_s: int = 600) -> OrbitComparison:
    """Integrate both flows from x0 and compare them as curves: the
    gradient flow reparametrized by arc length should coincide with the
    unit-speed flow on the shared arc-length range."""
    cfg_gd = cfg_gd or IntegratorConfig(escape_radius=100.0)
    cfg_ngd = cfg_ngd or IntegratorConfig(t_max=8.0, escape_radius=100.0)
    x0 = np.asarray(x0, dtype=float)
    traj_gd = integrate(f, GD, x0, cfg_gd)
    traj_ngd = integrate(f, NGD, x0, cfg_ngd)
    s_max = min(traj_gd.total_arc_length, traj_ngd.total_arc_length)
    s_grid = np.linspace(0.0, s_max, n_s)
    gd_pts = reparametrize_by_arc_length(traj_gd, s_grid)
    ngd_pts = reparametrize_by_arc_length(traj_ngd, s_grid)
    sup_err = float(np.max(np.linalg.norm(gd_pts - ngd_pts, axis=1)))
    dev = float(np.max(np.abs(traj_ngd.arc_lengths - traj_ngd.times)))
    return OrbitComparison(x0=x0, s_grid=s_grid, gd_points=gd_pts,
                           ngd_points=ngd_pts, sup_error=sup_err,
                           s_max=s_max, unit_speed_deviation=dev)
