"""Descent-flow integration with dense output and event refinement.

Two continuous flows are supported: plain gradient descent
x' = -grad f(x) and its unit-speed counterpart x' = -grad f / ||grad f||,
which shares the same orbits but traverses them at speed one. Both are
integrated with an embedded Dormand-Prince 4(5) pair whose free quartic
interpolant provides dense output; ball crossings and stopping events are
refined by bisection on that interpolant.

Explicit Euler discretizations of both fields are available through
:func:`step_discrete`.
"""

from __future__ import annotations

import math
import warnings
import weakref
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import (
    CriticalPointReached,
    IntegrationError,
    OutOfRangeError,
    TangencyWarning,
)
from .objectives import ObjectiveFunction

Array = np.ndarray

__all__ = [
    "FlowVariant",
    "FlowKind",
    "GD",
    "NGD",
    "DISCRETE_GD",
    "DISCRETE_NGD",
    "IntegratorConfig",
    "TerminationKind",
    "Termination",
    "Trajectory",
    "BallOccupancy",
    "gd_field",
    "ngd_field",
    "integrate",
    "step_discrete",
    "iterate_discrete",
    "arc_length_at",
    "reparametrize_by_arc_length",
    "ball_occupancy",
    "trajectory_csv_header",
    "write_trajectory_csv",
]


class FlowVariant(str, Enum):
    GD = "gd"
    NGD = "ngd"
    DISCRETE_GD = "discrete-gd"
    DISCRETE_NGD = "discrete-ngd"


@dataclass(frozen=True)
class FlowKind:
    """A flow family plus, for the discrete variants, its step sizes.

    step_sizes must be given exactly when the variant is discrete (an
    empty tuple is allowed as a family marker; per-step sizes can also
    be passed to the steppers directly).
    """

    variant: FlowVariant
    step_sizes: tuple[float, ...] | None = None

    def __post_init__(self):
        discrete = self.variant in (FlowVariant.DISCRETE_GD, FlowVariant.DISCRETE_NGD)
        if discrete != (self.step_sizes is not None):
            raise ValueError("step_sizes must be present exactly for the "
                             "discrete variants")
        if self.step_sizes is not None:
            object.__setattr__(self, "step_sizes", tuple(float(a) for a in self.step_sizes))
            if any(a <= 0 for a in self.step_sizes):
                raise ValueError("step sizes must be positive")

    @property
    def is_continuous(self) -> bool:
        return self.variant in (FlowVariant.GD, FlowVariant.NGD)


GD = FlowKind(FlowVariant.GD)
NGD = FlowKind(FlowVariant.NGD)
DISCRETE_GD = FlowKind(FlowVariant.DISCRETE_GD, ())
DISCRETE_NGD = FlowKind(FlowVariant.DISCRETE_NGD, ())


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and limits for :func:`integrate`.

    ``event_time_tol`` bounds the width of the bisection bracket used to
    refine event times and must not exceed ``max_step``. ``grad_stop`` is
    the gradient norm at which a trajectory is declared to have reached a
    critical point. ``escape_radius`` is the norm at which it is declared
    divergent.
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_step: float = 0.05
    t_max: float = 50.0
    grad_stop: float = 1e-10
    event_time_tol: float = 1e-9
    escape_radius: float = 1e6

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "max_step", "t_max", "grad_stop",
                     "event_time_tol", "escape_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.event_time_tol > self.max_step:
            raise ValueError("event_time_tol must not exceed max_step")


class TerminationKind(str, Enum):
    HORIZON_REACHED = "horizon_reached"
    CRITICAL_POINT_REACHED = "critical_point_reached"
    DIVERGED = "diverged"
    REGION_EXITED = "region_exited"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    point: Array | None = None


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) tableau with the order-4 dense-output polynomial.

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = (
    np.array([], dtype=float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                  -17253 / 339200, 22 / 525, -1 / 40])
_DP_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

# When the gradient norm falls below NEAR_CRITICAL_GRAD the step size is
# capped at NEAR_CRITICAL_MAX_STEP so the sharp turning of unit-speed
# orbits next to a critical point stays resolved by the dense output.
NEAR_CRITICAL_GRAD = 1e-4
NEAR_CRITICAL_MAX_STEP = 1e-3

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_STEP_FLOOR = 1e-14

# 5-point Gauss-Legendre nodes and weights mapped to [0, 1]
_GL_X = (np.array([-0.906179845938664, -0.538469310105683, 0.0,
                   0.538469310105683, 0.906179845938664]) + 1.0) / 2.0
_GL_W = np.array([0.236926885056189, 0.478628670499366, 0.568888888888889,
                  0.478628670499366, 0.236926885056189]) / 2.0


# ---------------------------------------------------------------------------
# Fields


def gd_field(f: ObjectiveFunction, x: Array) -> Array:
    """The gradient-descent field -grad f(x)."""
    return -f.gradient(np.asarray(x, dtype=float))


def ngd_field(f: ObjectiveFunction, x: Array, grad_stop: float = 1e-10) -> Array:
    """The unit-speed descent field -grad f / ||grad f||.

    Raises CriticalPointReached when the gradient norm is at or below
    ``grad_stop``, where the field is undefined.
    """
    x = np.asarray(x, dtype=float)
    g = f.gradient(x)
    norm = float(np.linalg.norm(g))
    if norm <= grad_stop:
        raise CriticalPointReached(x, norm)
    return -g / norm


# ---------------------------------------------------------------------------
# Trajectory


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Result of one continuous-flow integration.

    Node arrays share the same length; ``arc_lengths`` accumulates the
    per-step Gauss quadrature of the speed along the dense output. The
    trajectory is queryable at any interior time through :meth:`at`, with
    interpolation error consistent with the integration tolerances.
    """

    flow: FlowKind
    objective: ObjectiveFunction
    config: IntegratorConfig
    times: Array
    states: Array
    f_values: Array
    arc_lengths: Array
    termination: Termination
    _h: Array = field(repr=False)
    _dense: Array = field(repr=False)  # (n_steps, d, 4) interpolant coefficients

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def total_arc_length(self) -> float:
        return float(self.arc_lengths[-1])

    def _locate(self, t: float) -> int:
        pad = 1e-12 * max(1.0, abs(self.t_end))
        if t < self.t0 - pad or t > self.t_end + pad:
            raise OutOfRangeError(
                f"t={t!r} outside trajectory interval [{self.t0}, {self.t_end}]"
            )
        return int(np.clip(np.searchsorted(self.times, t, side="right") - 1,
                           0, len(self._h) - 1))

    def at(self, t: float) -> Array:
        """Dense-output state at time t."""
        i = self._locate(float(t))
        theta = (t - self.times[i]) / self._h[i]
        powers = theta ** np.arange(1, 5)
        return self.states[i] + self._h[i] * (self._dense[i] @ powers)

    def at_many(self, ts: Array) -> Array:
        """Vectorized dense-output evaluation (rows follow ``ts``)."""
        ts = np.asarray(ts, dtype=float)
        idx = np.clip(np.searchsorted(self.times, ts, side="right") - 1,
                      0, len(self._h) - 1)
        theta = (ts - self.times[idx]) / self._h[idx]
        powers = theta[:, None] ** np.arange(1, 5)[None, :]
        return self.states[idx] + self._h[idx, None] * np.einsum(
            "sdj,sj->sd", self._dense[idx], powers
        )

    def speed_at(self, t: float) -> float:
        """Speed ||x'(t)|| of the flow at time t (exactly 1 for the
        unit-speed variant)."""
        if self.flow.variant is FlowVariant.NGD:
            return 1.0
        return float(np.linalg.norm(self.objective.gradient(self.at(t))))


def _quad_speed(traj_like, a: float, b: float) -> float:
    """Gauss quadrature of the speed over [a, b] on the dense output."""
    if b <= a:
        return 0.0
    ts = a + (b - a) * _GL_X
    total = 0.0
    for t, w in zip(ts, _GL_W):
        total += w * traj_like(t)
    return (b - a) * total


# ---------------------------------------------------------------------------
# The adaptive stepper


def _make_rhs(f: ObjectiveFunction, variant: FlowVariant):
    grad = f.gradient
    if variant is FlowVariant.GD:
        def rhs(x: Array):
            g = grad(x)
            n = float(np.linalg.norm(g))
            return -g, n
    else:
        def rhs(x: Array):
            g = grad(x)
            n = float(np.linalg.norm(g))
            if n == 0.0 or not math.isfinite(n):
                return np.full_like(g, np.nan), n
            return g / -n, n
    return rhs


def _rms(v: Array) -> float:
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(rhs, x0, f0, cap, abs_tol, rel_tol):
    scale = abs_tol + rel_tol * np.abs(x0)
    d0 = _rms(x0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, cap)
    y1 = x0 + h0 * f0
    f1, _ = rhs(y1)
    if np.all(np.isfinite(f1)):
        d2 = _rms((f1 - f0) / scale) / h0
        if max(d1, d2) > 1e-15:
            h1 = (0.01 / max(d1, d2)) ** 0.2
            return min(100 * h0, h1, cap)
    return min(100 * h0, cap)


def _golden_min(g: Callable[[float], float], a: float, b: float,
                max_iter: int = 80) -> tuple[float, float]:
    """Golden-section minimizer of g on [a, b]; returns (argmin, min)."""
    m1 = a + 0.381966011 * (b - a)
    m2 = b - 0.381966011 * (b - a)
    g1, g2 = g(m1), g(m2)
    for _ in range(max_iter):
        if g1 <= g2:
            b, m2, g2 = m2, m1, g1
            m1 = a + 0.381966011 * (b - a)
            g1 = g(m1)
        else:
            a, m1, g1 = m1, m2, g2
            m2 = b - 0.381966011 * (b - a)
            g2 = g(m2)
        if b - a <= 1e-13 * max(1.0, abs(b)):
            break
    tm = 0.5 * (a + b)
    return tm, g(tm)


def _bisect(g: Callable[[float], float], lo: float, hi: float,
            xtol: float, target_residual: float | None = None,
            max_iter: int = 120) -> float:
    """Bisection for a sign change of g on [lo, hi]; g(lo) and g(hi) must
    have opposite (non-strict) signs. Optionally keeps halving until the
    midpoint residual drops below ``target_residual``."""
    flo = g(lo)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = g(mid)
        if (fm <= 0.0) == (flo <= 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
        width = hi - lo
        if width <= xtol and (target_residual is None or abs(fm) <= target_residual):
            break
        if width <= 1e-16 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def integrate(
    f: ObjectiveFunction,
    kind: FlowKind,
    x0: Array,
    cfg: IntegratorConfig | None = None,
    stop_region: tuple[Array, float] | None = None,
) -> Trajectory:
    """Integrate a continuous descent flow from ``x0``.

    Termination causes, checked in this order on every accepted step:
      * the gradient norm falls to ``cfg.grad_stop`` (critical point),
      * the state norm exceeds ``cfg.escape_radius`` (divergence),
      * the state leaves ``stop_region`` = (center, radius) if given,
      * the horizon ``cfg.t_max`` is reached.
    Event times are refined by bisection on the dense output to within
    ``cfg.event_time_tol``. For the unit-speed variant, starting at a
    point with gradient norm at or below ``grad_stop`` raises
    CriticalPointReached.
    """
    cfg = cfg or IntegratorConfig()
    if not kind.is_continuous:
        raise ValueError("integrate handles the continuous flow variants; "
                         "use step_discrete for the Euler schemes")
    x0 = np.array(x0, dtype=float)
    if x0.ndim != 1 or x0.size != f.dimension:
        raise ValueError(f"x0 must be a vector of length {f.dimension}")

    rhs = _make_rhs(f, kind.variant)
    k0, gnorm0 = rhs(x0)
    if kind.variant is FlowVariant.NGD and gnorm0 <= cfg.grad_stop:
        raise CriticalPointReached(x0, gnorm0, t=0.0)
    if not np.all(np.isfinite(k0)):
        raise IntegrationError("field is not finite at the initial point")

    center = radius = None
    if stop_region is not None:
        center = np.asarray(stop_region[0], dtype=float)
        radius = float(stop_region[1])

    d = x0.size
    times = [0.0]
    states = [x0.copy()]
    f_values = [f.value(x0)]
    arcs = [0.0]
    hs: list[float] = []
    denses: list[Array] = []

    K = np.empty((7, d))
    K[0] = k0
    gnorm_node = gnorm0
    t = 0.0
    y = x0.copy()

    def seg_speed(Q: Array, y0: Array, h: float, t0: float):
        if kind.variant is FlowVariant.NGD:
            return lambda tau: 1.0
        def speed(tau: float) -> float:
            theta = (tau - t0) / h
            powers = theta ** np.arange(1, 5)
            return float(np.linalg.norm(f.gradient(y0 + h * (Q @ powers))))
        return speed

    cap_global = cfg.max_step
    h = _initial_step(rhs, x0, k0, cap_global, cfg.abs_tol, cfg.rel_tol)
    termination: Termination | None = None

    while termination is None:
        remaining = cfg.t_max - t
        if remaining <= max(_STEP_FLOOR, 1e-12 * cfg.t_max):
            termination = Termination(TerminationKind.HORIZON_REACHED, None)
            break
        cap = cap_global
        if gnorm_node < NEAR_CRITICAL_GRAD:
            cap = min(cap, NEAR_CRITICAL_MAX_STEP)
        # snap onto the horizon so no sliver step is left over
        h = min(h, cap)
        final_step = h >= remaining * (1.0 - 1e-12)
        if final_step:
            h = remaining
        if h < max(_STEP_FLOOR, 4e-16 * max(1.0, t)):
            raise IntegrationError(
                f"step size underflow at t={t:.6g} (h={h:.3e}, "
                f"gradient norm {gnorm_node:.3e})"
            )

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            bad_stage = False
            for i in range(1, 6):
                yi = y + h * (K[:i].T @ _DP_A[i])
                if not np.all(np.isfinite(yi)):
                    bad_stage = True
                    break
                K[i], _ = rhs(yi)
            if bad_stage:
                h *= 0.25
                continue
            y1 = y + h * (K[:6].T @ _DP_A[6])
            if not np.all(np.isfinite(y1)):
                h *= 0.25
                continue
            K[6], gnorm1 = rhs(y1)
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y1))
            err = _rms((h * (K.T @ _DP_E)) / scale)

        if not math.isfinite(err):
            h *= 0.25
            continue
        if err > 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            continue

        # accepted
        Q = K.T @ _DP_P  # (d, 4)
        t0_seg, t1 = t, (cfg.t_max if final_step else t + h)
        speed = seg_speed(Q, y, h, t0_seg)

        def dense_local(tau: float) -> Array:
            theta = (tau - t0_seg) / h
            powers = theta ** np.arange(1, 5)
            return y + h * (Q @ powers)

        # collect candidate termination events in [t, t1]
        cut: tuple[float, Termination] | None = None

        def seg_gnorm(tau: float) -> float:
            return float(np.linalg.norm(f.gradient(dense_local(tau))))

        stop_hi: float | None = None
        if gnorm1 <= cfg.grad_stop:
            stop_hi = t1
        elif float(K[0] @ K[6]) < 0.0:
            # the field direction reversed across this accepted step, so
            # the dense path passed a critical point in the interior even
            # though both endpoint gradient norms sit above the threshold;
            # without this check the stepper chatters across the stable
            # manifold forever
            tau_m, g_m = _golden_min(seg_gnorm, t0_seg, t1)
            if g_m <= cfg.grad_stop:
                stop_hi = tau_m
        if stop_hi is not None:
            tau = _bisect(lambda s: seg_gnorm(s) - cfg.grad_stop,
                          t0_seg, stop_hi, cfg.event_time_tol)
            cut = (tau, Termination(TerminationKind.CRITICAL_POINT_REACHED,
                                    dense_local(tau)))
        norm1 = float(np.linalg.norm(y1))
        if norm1 >= cfg.escape_radius and (cut is None):
            def g_div(tau: float) -> float:
                return cfg.escape_radius - float(np.linalg.norm(dense_local(tau)))
            tau = _bisect(g_div, t0_seg, t1, cfg.event_time_tol)
            cut = (tau, Termination(TerminationKind.DIVERGED, dense_local(tau)))
        if center is not None and cut is None:
            if float(np.linalg.norm(y1 - center)) >= radius:
                def g_reg(tau: float) -> float:
                    return radius - float(np.linalg.norm(dense_local(tau) - center))
                if g_reg(t0_seg) > 0.0:
                    tau = _bisect(g_reg, t0_seg, t1, cfg.event_time_tol)
                else:
                    tau = t0_seg
                cut = (tau, Termination(TerminationKind.REGION_EXITED,
                                        dense_local(tau)))

        if cut is not None:
            tau, termination = cut
            ycut = dense_local(tau)
            times.append(tau)
            states.append(ycut)
            f_values.append(f.value(ycut))
            arcs.append(arcs[-1] + _quad_speed(speed, t0_seg, tau))
            hs.append(h)
            denses.append(Q)
            break

        times.append(t1)
        states.append(y1)
        f_values.append(f.value(y1))
        arcs.append(arcs[-1] + _quad_speed(speed, t0_seg, t1))
        hs.append(h)
        denses.append(Q)

        t, y = t1, y1
        K[0] = K[6]
        gnorm_node = gnorm1
        if err == 0.0:
            h *= _MAX_FACTOR
        else:
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))

    if not hs:
        # zero-length trajectory (immediate horizon); keep a degenerate segment
        hs = [1.0]
        denses = [np.zeros((d, 4))]
        times.append(times[0])
        states.append(states[0].copy())
        f_values.append(f_values[0])
        arcs.append(arcs[0])

    return Trajectory(
        flow=kind,
        objective=f,
        config=cfg,
        times=np.asarray(times),
        states=np.asarray(states),
        f_values=np.asarray(f_values),
        arc_lengths=np.asarray(arcs),
        termination=termination,
        _h=np.asarray(hs),
        _dense=np.asarray(denses),
    )


# ---------------------------------------------------------------------------
# Discrete steppers


def step_discrete(f: ObjectiveFunction, kind: FlowKind, x: Array,
                  alpha: float, grad_stop: float = 1e-10) -> Array:
    """One explicit Euler step of the chosen discrete scheme."""
    if kind.variant is FlowVariant.DISCRETE_GD:
        return np.asarray(x, dtype=float) + alpha * gd_field(f, x)
    if kind.variant is FlowVariant.DISCRETE_NGD:
        return np.asarray(x, dtype=float) + alpha * ngd_field(f, x, grad_stop)
    raise ValueError("step_discrete handles the discrete variants only")


def iterate_discrete(f: ObjectiveFunction, kind: FlowKind, x0: Array,
                     alphas: Sequence[float] | None = None,
                     grad_stop: float = 1e-10) -> Array:
    """Run a sequence of Euler steps; returns the (n+1, d) state history.

    ``alphas`` defaults to the kind's own step_sizes. Stops early
    (truncating the history) if the unit-speed scheme lands on a point
    where its field is undefined.
    """
    if alphas is None:
        alphas = kind.step_sizes or ()
    out = [np.array(x0, dtype=float)]
    for a in alphas:
        try:
            out.append(step_discrete(f, kind, out[-1], float(a), grad_stop))
        except CriticalPointReached:
            break
    return np.asarray(out)


# ---------------------------------------------------------------------------
# Arc length and reparametrization


def arc_length_at(traj: Trajectory, t: float) -> float:
    """Cumulative arc length L(t), by Gauss quadrature of the speed on
    the dense output. Raises OutOfRangeError outside the trajectory."""
    i = traj._locate(float(t))
    base = float(traj.arc_lengths[i])
    lo = float(traj.times[i])
    if t <= lo:
        return base
    return base + _quad_speed(traj.speed_at, lo, float(t))


# Refined (time, arc, speed) tables per trajectory, built on first use;
# each integration step is halved so the local Hermite model of L(t)
# stays within ~1e-9 of the quadrature truth.
_ARC_TABLES: "weakref.WeakKeyDictionary[Trajectory, tuple[Array, Array, Array]]" \
    = weakref.WeakKeyDictionary()


def _arc_table(traj: Trajectory) -> tuple[Array, Array, Array]:
    cached = _ARC_TABLES.get(traj)
    if cached is not None:
        return cached
    n = len(traj._h)
    tau = np.empty(2 * n + 1)
    L = np.empty(2 * n + 1)
    v = np.empty(2 * n + 1)
    tau[::2] = traj.times
    L[::2] = traj.arc_lengths
    for i in range(n):
        t0, t1 = float(traj.times[i]), float(traj.times[i + 1])
        tm = 0.5 * (t0 + t1)
        tau[2 * i + 1] = tm
        L[2 * i + 1] = L[2 * i] + _quad_speed(traj.speed_at, t0, tm)
    for j, t in enumerate(tau):
        v[j] = traj.speed_at(float(t))
    table = (tau, L, v)
    _ARC_TABLES[traj] = table
    return table


def reparametrize_by_arc_length(traj: Trajectory, s_grid: Array) -> Array:
    """States of the trajectory at the requested arc lengths.

    Inverts the monotone map t -> L(t) with a safeguarded Newton
    iteration on a per-bracket cubic Hermite model of L (monotonicity
    holds away from critical points; near them the speed factor keeps
    the position error small even where t(s) is ill-conditioned) and
    evaluates the dense output there. s values must lie in
    [0, total_arc_length]; anything beyond raises OutOfRangeError.
    """
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
    total = traj.total_arc_length
    pad = 1e-9 * max(1.0, total)
    tau, L, v = _arc_table(traj)
    out = np.empty((s_grid.size, traj.states.shape[1]))
    for j, s in enumerate(s_grid):
        if s < -pad or s > total + pad:
            raise OutOfRangeError(f"arc length {s!r} outside [0, {total}]")
        s = min(max(s, 0.0), total)
        i = int(np.clip(np.searchsorted(L, s, side="right") - 1, 0, len(tau) - 2))
        h = float(tau[i + 1] - tau[i])
        dL = float(L[i + 1] - L[i])
        target = s - float(L[i])
        if dL <= 0.0 or h <= 0.0:
            out[j] = traj.at(float(tau[i]))
            continue
        # cubic Hermite of L on the bracket, in theta = (t - tau_i)/h
        c0, c1 = 0.0, h * float(v[i])
        c2 = 3.0 * dL - h * (2.0 * float(v[i]) + float(v[i + 1]))
        c3 = -2.0 * dL + h * (float(v[i]) + float(v[i + 1]))
        theta = target / dL
        for _ in range(12):
            val = c0 + theta * (c1 + theta * (c2 + theta * c3)) - target
            der = c1 + theta * (2.0 * c2 + 3.0 * theta * c3)
            if der <= 0.0:
                break
            step = val / der
            theta -= step
            theta = min(max(theta, 0.0), 1.0)
            if abs(step) <= 1e-14:
                break
        out[j] = traj.at(float(tau[i]) + h * theta)
    return out


# ---------------------------------------------------------------------------
# Ball occupancy


@dataclass(frozen=True)
class BallOccupancy:
    """Time the trajectory spends inside a ball, as disjoint intervals."""

    center: Array
    radius: float
    intervals: tuple[tuple[float, float], ...]
    total_time: float


def _scan_grid(traj: Trajectory, resolution: float,
               t_lo: float, t_hi: float) -> Array:
    """Node times restricted to [t_lo, t_hi], refined so consecutive
    samples are at most ``resolution`` apart."""
    nodes = traj.times[(traj.times > t_lo) & (traj.times < t_hi)]
    knots = np.concatenate(([t_lo], nodes, [t_hi]))
    pieces = [np.array([t_lo])]
    for a, b in zip(knots[:-1], knots[1:]):
        gap = b - a
        if gap <= 0:
            continue
        n = max(1, int(math.ceil(gap / resolution)))
        pieces.append(a + gap * (np.arange(1, n + 1) / n))
    return np.concatenate(pieces)


def ball_occupancy(traj: Trajectory, center: Array, r: float,
                   t_window: tuple[float, float] | None = None) -> BallOccupancy:
    """Occupancy of the ball B_r(center) along the trajectory.

    The signed boundary distance is sampled on the dense output at
    resolution ``config.max_step`` and every sign change is refined by
    bisection to ``config.event_time_tol`` (and until the boundary
    residual is at most 1e-8 * r). Grazing contacts, where a local
    minimum of the distance comes within 1e-9 of r, emit TangencyWarning
    and are re-scanned at resolution ``max_step / 100``.

    ``t_window`` restricts the measurement to a sub-interval, which makes
    occupancy additive under splitting.
    """
    center = np.asarray(center, dtype=float)
    r = float(r)
    t_lo, t_hi = (traj.t0, traj.t_end) if t_window is None else (
        max(traj.t0, float(t_window[0])), min(traj.t_end, float(t_window[1])))
    if t_hi <= t_lo:
        return BallOccupancy(center, r, (), 0.0)

    def g_of(ts: Array) -> Array:
        return np.linalg.norm(traj.at_many(ts) - center, axis=1) - r

    def g_scalar(t: float) -> float:
        return float(np.linalg.norm(traj.at(t) - center)) - r

    # a ball smaller than one step could be jumped over entirely, so the
    # scan pitch is also capped at a fraction of the radius
    resolution = min(traj.config.max_step, r / 3.0)
    grid = _scan_grid(traj, resolution, t_lo, t_hi)
    g = g_of(grid)

    # grazing contacts: refine local minima of the boundary distance
    interior = np.nonzero((g[1:-1] < g[:-2]) & (g[1:-1] < g[2:]) & (g[1:-1] > 0))[0] + 1
    extra: list[Array] = []
    for i in interior:
        lo, hi = grid[i - 1], grid[i + 1]
        tm, _gm = _golden_min(g_scalar, lo, hi, max_iter=60)
        if abs(g_scalar(tm)) <= 1e-9:
            warnings.warn(
                f"grazing ball contact near t={tm:.6g} "
                f"(min |distance - r| = {abs(g_scalar(tm)):.2e})",
                TangencyWarning,
            )
            fine = np.linspace(lo, hi, max(3, int(math.ceil(
                (hi - lo) / (traj.config.max_step / 100.0)))) + 1)
            extra.append(fine)
    if extra:
        grid = np.unique(np.concatenate([grid] + extra))
        g = g_of(grid)

    inside = g <= 0.0
    xtol = traj.config.event_time_tol
    residual_target = 5e-9 * r
    crossings: list[float] = []
    for i in np.nonzero(inside[:-1] != inside[1:])[0]:
        crossings.append(_bisect(g_scalar, float(grid[i]), float(grid[i + 1]),
                                 xtol, target_residual=residual_target))

    intervals: list[tuple[float, float]] = []
    open_at = t_lo if inside[0] else None
    for c in crossings:
        if open_at is None:
            open_at = c
        else:
            if c > open_at:
                intervals.append((open_at, c))
            open_at = None
    if open_at is not None:
        intervals.append((open_at, t_hi))

    total = float(sum(b - a for a, b in intervals))
    return BallOccupancy(center, r, tuple(intervals), total)


# ---------------------------------------------------------------------------
# CSV export


def trajectory_csv_header(dimension: int) -> str:
    cols = ["t"] + [f"x_{i}" for i in range(dimension)] + ["f", "arclen"]
    return ",".join(cols)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write the node history as CSV with 17-significant-digit floats
    (round-trip exact)."""
    d = traj.states.shape[1]
    with open(path, "w") as fh:
        fh.write(trajectory_csv_header(d) + "\n")
        for i in range(len(traj.times)):
            row = [traj.times[i], *traj.states[i], traj.f_values[i],
                   traj.arc_lengths[i]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
