"""Forced mechanical right-hand sides, integrators, and trajectory recording.

Two independent routes to the same dynamics are provided: the direct
Christoffel form q''^k = -Gamma^k_ij q'^i q'^j - g^ki dV_i + u^a Y_a^k and the
covariant Euler-Lagrange route through an explicit Lagrangian Hessian. The
adaptive integrator is an embedded Dormand-Prince 5(4) pair with
feasibility-aware step rejection: trial stages that leave the declared feasible
region reject the step, since exact solutions never do. Events (escape guards)
are located by bisection on cubic Hermite interpolants.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InfeasibleInitialState, SingularHessian, StepSizeUnderflow
from .geometry import MetricField, ScalarField, central_diff4, metric_inverse

# Dormand-Prince 5(4) tableau (FSAL)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4

_MIN_STEP = 1e-14


@dataclass(frozen=True)
class MechState:
    """Configuration, velocity, and time."""

    q: np.ndarray
    qdot: np.ndarray
    t: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.q, dtype=float),
                               np.asarray(self.qdot, dtype=float)])

    @staticmethod
    def from_vector(x: np.ndarray, t: float = 0.0) -> "MechState":
        x = np.asarray(x, dtype=float)
        n = x.size // 2
        return MechState(q=x[:n].copy(), qdot=x[n:].copy(), t=t)


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration scheme and tolerances.

    scheme 'rk45' is the adaptive embedded 5(4) pair (default); 'rk4' is the
    classical fixed-step method retained for convergence studies. `atol` may be
    a scalar or per-component vector; components whose magnitude collapses
    toward zero (metric-barrier coordinates) want a tiny or zero entry so the
    error control stays relative.
    """

    scheme: str = "rk45"
    rtol: float = 1e-9
    atol: Union[float, Sequence[float]] = 1e-12
    step: float = 1e-3
    h0: float = 1e-4
    max_step: float = 1.0
    max_steps: int = 5_000_000


@dataclass
class RawResult:
    ts: np.ndarray
    xs: np.ndarray
    fs: np.ndarray
    status: str           # 'done' | 'event' | 'failure'
    nfev: int
    naccept: int
    nreject: int
    event_time: Optional[float] = None
    event_state: Optional[np.ndarray] = None
    failure_time: Optional[float] = None


def _hermite(t0, x0, f0, t1, x1, f1, t):
    """Cubic Hermite interpolation on one accepted step."""
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * x0 + h10 * h * f0 + h01 * x1 + h11 * h * f1


def integrate_raw(rhs: Callable[[float, np.ndarray], np.ndarray],
                  t0: float,
                  x0: np.ndarray,
                  t1: float,
                  cfg: IntegratorConfig,
                  feasible: Optional[Callable[[float, np.ndarray], bool]] = None,
                  event: Optional[Callable[[float, np.ndarray], float]] = None) -> RawResult:
    """Adaptive Dormand-Prince 5(4) with feasibility and NaN rejection.

    `feasible` gates every trial stage; `event` is a scalar guard, positive
    while safe, whose first nonpositive crossing terminates the run (crossing
    time refined by bisection on the Hermite interpolant of the final step).
    """
    x = np.asarray(x0, dtype=float).copy()
    t = float(t0)
    atol = np.broadcast_to(np.asarray(cfg.atol, dtype=float), x.shape).copy()
    rtol = cfg.rtol
    k = np.empty((7, x.size))
    f_now = np.asarray(rhs(t, x), dtype=float)
    if not np.all(np.isfinite(f_now)):
        raise InfeasibleInitialState("right-hand side not finite at the initial state")
    k[0] = f_now
    nfev, naccept, nreject = 1, 0, 0
    ts, xs, fs = [t], [x.copy()], [f_now.copy()]
    h = min(cfg.h0, cfg.max_step, t1 - t0) if t1 > t0 else cfg.h0
    ev_prev = event(t, x) if event is not None else None
    if ev_prev is not None and ev_prev <= 0.0:
        return RawResult(np.array(ts), np.array(xs), np.array(fs), "event",
                         nfev, 0, 0, event_time=t, event_state=x.copy())

    while t < t1:
        h = min(h, t1 - t, cfg.max_step)
        bad = False
        for i in range(1, 7):
            xi = x + h * sum(a * k[j] for j, a in enumerate(_DP_A[i]))
            if feasible is not None and not feasible(t + _DP_C[i] * h, xi):
                bad = True
                break
            ki = np.asarray(rhs(t + _DP_C[i] * h, xi), dtype=float)
            nfev += 1
            if not np.all(np.isfinite(ki)):
                bad = True
                break
            k[i] = ki
        if bad:
            nreject += 1
            h *= 0.5
            if h < _MIN_STEP:
                return RawResult(np.array(ts), np.array(xs), np.array(fs), "failure",
                                 nfev, naccept, nreject, failure_time=t)
            continue
        x_new = x + h * (_DP_B5 @ k)
        err = h * (_DP_E @ k)
        scale = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(err == 0.0, 0.0, np.abs(err) / np.maximum(scale, 1e-300))
        enorm = float(np.sqrt(np.mean(ratio ** 2)))
        if enorm <= 1.0:
            t_prev, x_prev, f_prev = t, x, k[0].copy()
            t = t + h
            x = x_new
            k[0] = k[6]  # FSAL
            naccept += 1
            ts.append(t)
            xs.append(x.copy())
            fs.append(k[0].copy())
            if event is not None:
                ev_now = event(t, x)
                if ev_now <= 0.0:
                    lo, hi = t_prev, t
                    for _ in range(80):
                        mid = 0.5 * (lo + hi)
                        xm = _hermite(t_prev, x_prev, f_prev, t, x, k[0], mid)
                        if event(mid, xm) <= 0.0:
                            hi = mid
                        else:
                            lo = mid
                        if hi - lo <= 1e-12 * max(1.0, abs(t)):
                            break
                    te = hi
                    xe = _hermite(t_prev, x_prev, f_prev, t, x, k[0], te)
                    ts[-1] = te
                    xs[-1] = xe
                    fs[-1] = np.asarray(rhs(te, xe), dtype=float)
                    return RawResult(np.array(ts), np.array(xs), np.array(fs), "event",
                                     nfev + 1, naccept, nreject,
                                     event_time=te, event_state=xe)
                ev_prev = ev_now
            h *= min(5.0, max(0.2, 0.9 * enorm ** -0.2)) if enorm > 0 else 5.0
            if naccept > cfg.max_steps:
                return RawResult(np.array(ts), np.array(xs), np.array(fs), "failure",
                                 nfev, naccept, nreject, failure_time=t)
        else:
            nreject += 1
            h *= max(0.2, 0.9 * enorm ** -0.2)
            if h < _MIN_STEP:
                return RawResult(np.array(ts), np.array(xs), np.array(fs), "failure",
                                 nfev, naccept, nreject, failure_time=t)
    return RawResult(np.array(ts), np.array(xs), np.array(fs), "done", nfev, naccept, nreject)


def integrate_rk4(rhs, t0, x0, t1, step) -> RawResult:
    """Classical fixed-step RK4 over a uniform grid."""
    if step <= 0:
        raise ValueError("step must be positive")
    n_steps = max(1, int(round((t1 - t0) / step)))
    h = (t1 - t0) / n_steps
    t = float(t0)
    x = np.asarray(x0, dtype=float).copy()
    ts, xs, fs = [t], [x.copy()], [np.asarray(rhs(t, x), dtype=float)]
    nfev = 1
    for _ in range(n_steps):
        k1 = np.asarray(rhs(t, x), dtype=float)
        k2 = np.asarray(rhs(t + 0.5 * h, x + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(rhs(t + 0.5 * h, x + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(rhs(t + h, x + h * k3), dtype=float)
        nfev += 4
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        if not np.all(np.isfinite(x)):
            return RawResult(np.array(ts), np.array(xs), np.array(fs), "failure",
                             nfev, len(ts) - 1, 0, failure_time=t)
        ts.append(t)
        xs.append(x.copy())
        fs.append(np.asarray(rhs(t, x), dtype=float))
        nfev += 1
    return RawResult(np.array(ts), np.array(xs), np.array(fs), "done", nfev, len(ts) - 1, 0)


def sample_raw(res: RawResult, t_grid: np.ndarray) -> np.ndarray:
    """Hermite-resample a raw solution onto a time grid within its span."""
    t_grid = np.asarray(t_grid, dtype=float)
    out = np.empty((t_grid.size, res.xs.shape[1]))
    idx = np.searchsorted(res.ts, t_grid, side="right") - 1
    idx = np.clip(idx, 0, len(res.ts) - 2) if len(res.ts) > 1 else np.zeros_like(idx)
    for m, tq in enumerate(t_grid):
        i = int(idx[m])
        if len(res.ts) == 1 or tq <= res.ts[0]:
            out[m] = res.xs[0]
        elif tq >= res.ts[-1]:
            out[m] = res.xs[-1]
        else:
            out[m] = _hermite(res.ts[i], res.xs[i], res.fs[i],
                              res.ts[i + 1], res.xs[i + 1], res.fs[i + 1], tq)
    return out


# ---------------------------------------------------------------------------
# Mechanical right-hand sides
# ---------------------------------------------------------------------------

def free_acceleration(metric: MetricField, potential: Optional[ScalarField], q, qdot) -> np.ndarray:
    """q'' of the free system (metric, V): -Gamma qd qd - g^{-1} dV."""
    from .geometry import christoffel_contraction
    acc = -christoffel_contraction(metric, q, qdot)
    if potential is not None:
        acc = acc - metric_inverse(metric, q) @ potential.gradient_at(q)
    return acc


def forced_rhs(system, feedback, state: MechState):
    """(q', q'') of the controlled system under a feedback law (or None)."""
    q, qdot = np.asarray(state.q, dtype=float), np.asarray(state.qdot, dtype=float)
    system.feasible.require(q)
    acc = free_acceleration(system.g, system.V, q, qdot)
    if feedback is not None:
        u = np.atleast_1d(feedback.evaluate(q, qdot))
        acc = acc + u @ system.controls(q)
    return qdot, acc


def closed_loop_rhs(system, feedback) -> Callable[[float, np.ndarray], np.ndarray]:
    """First-order RHS closure x' = (q', q'') for the integrators (no feasibility
    gate here; the integrator owns that)."""
    g = system.g
    V = system.V
    controls = system.controls
    m = controls.count if controls is not None else 0
    ev = feedback.evaluate if feedback is not None else None

    def rhs(t, x):
        n = x.size // 2
        q, qdot = x[:n], x[n:]
        acc = free_acceleration(g, V, q, qdot)
        if ev is not None and m:
            u = np.atleast_1d(ev(q, qdot))
            acc = acc + u @ controls(q)
        return np.concatenate([qdot, acc])

    return rhs


def covariant_rhs(target_metric: MetricField, potential: Optional[ScalarField],
                  state: MechState, fd_rel: float = 1e-4):
    """(q', q'') from the Euler-Lagrange form of L = 1/2 qd^T G(q) qd - V(q).

    Uses only evaluations of G and V (finite differences in q), so it is an
    independent computation path from the Christoffel route:
    q''^j = -W^{ij} (d^2 L/(dqd_i dq^k) qd^k - dL/dq^i), W = G.
    """
    q = np.asarray(state.q, dtype=float)
    qdot = np.asarray(state.qdot, dtype=float)
    n = q.size
    W = target_metric(q)
    try:
        Winv_check = np.linalg.cond(W)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise SingularHessian(state, str(exc)) from exc
    if not np.isfinite(Winv_check) or Winv_check > 1e14:
        raise SingularHessian(state, f"condition number {Winv_check:.3e}")

    h = fd_rel * max(1.0, float(np.max(np.abs(q))))

    def momentum(p):
        return target_metric(p) @ qdot

    def lagrangian_q(p):
        val = 0.5 * qdot @ target_metric(p) @ qdot
        if potential is not None:
            val -= potential(p)
        return np.array(val)

    M1 = np.stack([central_diff4(momentum, q, kk, h) for kk in range(n)], axis=1)
    dLdq = np.array([float(central_diff4(lagrangian_q, q, kk, h)) for kk in range(n)])
    qddot = np.linalg.solve(W, dLdq - M1 @ qdot)
    return qdot, qddot


def energies(system, completed, state: MechState):
    """(E, E_Lf): kinetic+potential in the base metric and in the completed one."""
    q, qdot = np.asarray(state.q, dtype=float), np.asarray(state.qdot, dtype=float)
    v = float(system.V(q)) if system.V is not None else 0.0
    e = 0.5 * qdot @ system.g(q) @ qdot + v
    gf = completed.metric(q) if completed is not None else system.g(q)
    e_lf = 0.5 * qdot @ gf @ qdot + v
    return e, e_lf


# ---------------------------------------------------------------------------
# Trajectory recording
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Time-sampled closed-loop run with per-sample annotations."""

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    u: np.ndarray
    E: np.ndarray
    E_Lf: np.ndarray
    phi: np.ndarray
    status: str                      # 'horizon' | 'event' | 'failure'
    scheme: str
    steps: int
    rejected: int
    nfev: int
    event_time: Optional[float] = None
    failure_time: Optional[float] = None

    def __len__(self):
        return self.t.size

    def state(self, i: int) -> MechState:
        return MechState(q=self.q[i], qdot=self.qdot[i], t=float(self.t[i]))


def integrate(system, feedback, x0: MechState, cfg: IntegratorConfig,
              horizon: float, guards=None, n_samples: int = 1001) -> Trajectory:
    """Integrate the closed loop and record an annotated trajectory.

    Guard events terminate the run with status 'event'; the feasible region of
    the system gates all trial stages. Samples lie on a uniform grid (plus the
    event endpoint when one fires).
    """
    from .completion import EscapeGuards

    region = system.feasible
    x0v = x0.as_vector()
    if not region.contains(x0v[: x0v.size // 2]):
        raise InfeasibleInitialState(f"q0={x0.q}")
    rhs = closed_loop_rhs(system, feedback)
    n = x0v.size // 2

    def feas(t, x):
        return region.contains(x[:n])

    ev = None
    if guards is not None:
        if guards is True:
            guards = EscapeGuards()

        def ev(t, x):
            return min(guards.position_bound - float(np.max(np.abs(x[:n]))),
                       guards.speed_bound - float(np.max(np.abs(x[n:]))),
                       region.margin(x[:n]) - guards.boundary_margin)

    if cfg.scheme == "rk4":
        res = integrate_rk4(rhs, x0.t, x0v, x0.t + horizon, cfg.step)
    else:
        res = integrate_raw(rhs, x0.t, x0v, x0.t + horizon, cfg, feasible=feas, event=ev)
    if res.status == "failure":
        raise StepSizeUnderflow(res.failure_time if res.failure_time is not None else res.ts[-1])

    # sample at accepted step points (always feasible), thinned to n_samples;
    # interpolated states could dip outside M by roundoff near a metric wall
    npts = res.ts.size
    if npts > n_samples:
        idx = np.unique(np.round(np.linspace(0, npts - 1, n_samples)).astype(int))
    else:
        idx = np.arange(npts)
    grid = res.ts[idx]
    states = res.xs[idx]

    m = system.controls.count if system.controls is not None else 0
    u = np.zeros((grid.size, m))
    E = np.zeros(grid.size)
    E_Lf = np.zeros(grid.size)
    phi = np.zeros(grid.size)
    completed = getattr(system, "completed", None)
    for i in range(grid.size):
        qi, qdi = states[i, :n], states[i, n:]
        if feedback is not None and m:
            u[i] = np.atleast_1d(feedback.evaluate(qi, qdi))
        E[i], E_Lf[i] = energies(system, completed, MechState(qi, qdi, grid[i]))
        phi[i] = region.phi(qi)

    status = {"done": "horizon", "event": "event", "failure": "failure"}[res.status]
    return Trajectory(t=grid, q=states[:, :n], qdot=states[:, n:], u=u,
                      E=E, E_Lf=E_Lf, phi=phi, status=status, scheme=cfg.scheme,
                      steps=res.naccept, rejected=res.nreject, nfev=res.nfev,
                      event_time=res.event_time, failure_time=res.failure_time)
