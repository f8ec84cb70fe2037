"""Constructions that turn incomplete metrics into complete ones.

The central object is the rank-one completion g~ = g + df (x) df built from a
barrier function f that blows up at the boundary of the feasible region
M = {phi < 0}. Closed forms for the inverse and the connection correction are
implemented and cross-checkable against the generic geometry routines. A metric
blend s*g0 + t*g1 and two numeric probes (escape time, potential growth) round
out the module.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonPositiveCoefficient, OutsideFeasibleRegion
from .geometry import (MetricField, ScalarField, christoffel,
                       christoffel_contraction, covariant_hessian,
                       metric_inverse)


@dataclass(frozen=True)
class Ray:
    """A straight sampling ray q(t) = start + t*(stop - start), t in [0, 1).

    `stop` sits on (or just past) the region boundary; samples approach it.
    """

    start: np.ndarray
    stop: np.ndarray


@dataclass(frozen=True)
class BarrierFunction:
    """Feasible region M = {phi < 0} together with a barrier f defined on M.

    f is declared proper (|f| -> infinity toward the boundary); the declaration
    is probed, not proved, by `properness_witness`. A barrier with f=None marks
    a region-only bundle (no rank-one completion term).
    """

    phi: ScalarField
    f: Optional[ScalarField] = None
    rays: Sequence[Ray] = ()

    def contains(self, q) -> bool:
        return self.phi(q) < 0.0

    def margin(self, q) -> float:
        """Positive inside M."""
        return -self.phi(q)

    def require(self, q) -> None:
        if not self.contains(q):
            raise OutsideFeasibleRegion(np.asarray(q, dtype=float))

    def f_value(self, q) -> float:
        self.require(q)
        return self.f(q)

    def properness_witness(self, growth_min: float = 1.5, samples: int = 60) -> dict:
        """Sample |f| along the declared rays toward the boundary.

        Samples sit at geometrically shrinking distances from the boundary end
        of each ray. A proper barrier keeps growing without bound, so |f| at
        the deepest feasible sample must exceed `growth_min` times its value at
        half that depth (any finite threshold is eventually beaten only by an
        unbounded f; absolute thresholds are not float-samplable for slowly
        diverging barriers). This witnesses properness on the sample only --
        completeness guarantees are conditional on f actually being proper.
        """
        if self.f is None:
            return {"passed": False, "reason": "no barrier declared", "rays": []}
        per_ray = []
        for ray in self.rays:
            start = np.asarray(ray.start, dtype=float)
            stop = np.asarray(ray.stop, dtype=float)
            vals = []
            for k in range(1, samples + 1):
                t = 1.0 - 0.5 ** k
                q = start + t * (stop - start)
                if not self.contains(q) or np.allclose(q, stop):
                    break
                vals.append(abs(self.f(q)))
            if len(vals) < 4:
                per_ray.append({"max_abs_f": max(vals, default=-np.inf),
                                "growth": 0.0, "passed": False})
                continue
            deep = vals[-1]
            mid = vals[(len(vals) - 1) // 2]
            growth = deep / mid if mid > 0 else np.inf
            per_ray.append({"max_abs_f": max(vals), "growth": float(growth),
                            "passed": bool(growth >= growth_min)})
        passed = bool(per_ray) and all(r["passed"] for r in per_ray)
        return {"passed": passed, "growth_min": growth_min, "rays": per_ray}


@dataclass(frozen=True)
class CompletedMetric:
    """g~ = g + df (x) df for a base metric g and barrier f."""

    base: MetricField
    barrier: BarrierFunction

    @property
    def dim(self) -> int:
        return self.base.dim

    def components(self, q):
        """Return (g~_ij, g~^ij, Gamma~^k_ij) at q using the closed forms.

        g~^ij = g^ij - f^i f^j / (1 + |grad f|^2) and
        Gamma~^k_ij = Gamma^k_ij + f_ij f^k / (1 + |grad f|^2), with f_ij the
        covariant Hessian of f in the base metric.
        """
        self.barrier.require(q)
        G = self.base(q)
        Ginv = metric_inverse(self.base, q)
        if self.barrier.f is None:
            return G, Ginv, christoffel(self.base, q)
        df = self.barrier.f.gradient_at(q)
        fsharp = Ginv @ df
        denom = 1.0 + df @ fsharp
        Gt = G + np.outer(df, df)
        Gtinv = Ginv - np.outer(fsharp, fsharp) / denom
        fjk = covariant_hessian(self.base, self.barrier.f, q)
        gamma = christoffel(self.base, q) + np.einsum('k,ij->kij', fsharp, fjk) / denom
        return Gt, Gtinv, gamma

    def metric(self, q) -> np.ndarray:
        if self.barrier.f is None:
            return self.base(q)
        df = self.barrier.f.gradient_at(q)
        return self.base(q) + np.outer(df, df)

    def metric_partials(self, q) -> np.ndarray:
        """Exact partials of g~ from base partials and the barrier Hessian."""
        P = self.base.partials_at(q)
        if self.barrier.f is None:
            return P
        df = self.barrier.f.gradient_at(q)
        H = self.barrier.f.hessian_at(q)  # H[k, i] = d^2 f / dq^k dq^i
        corr = np.einsum('ki,j->kij', H, df) + np.einsum('i,kj->kij', df, H)
        return P + corr

    def as_metric_field(self) -> MetricField:
        """Expose g~ as an opaque MetricField (generic-route cross-checks)."""
        return MetricField(dim=self.dim, eval=self.metric, partials=self.metric_partials)

    def christoffel_contraction(self, q, qdot) -> np.ndarray:
        """Gamma~^k_ij qd^i qd^j via the closed-form correction."""
        base = christoffel_contraction(self.base, q, qdot)
        if self.barrier.f is None:
            return base
        qdot = np.asarray(qdot, dtype=float)
        df = self.barrier.f.gradient_at(q)
        fsharp = metric_inverse(self.base, q) @ df
        denom = 1.0 + df @ fsharp
        fjk = covariant_hessian(self.base, self.barrier.f, q)
        return base + (qdot @ fjk @ qdot) / denom * fsharp


def blend_metrics(g0: MetricField, g1: MetricField, s: float, t: float) -> MetricField:
    """Pointwise blend s*g0 + t*g1 (requires s > 0, t >= 0)."""
    if not (s > 0.0):
        raise NonPositiveCoefficient(f"s must be positive, got {s}")
    if t < 0.0:
        raise NonPositiveCoefficient(f"t must be nonnegative, got {t}")
    if g0.dim != g1.dim:
        raise ValueError("blend requires metrics of equal dimension")

    def ev(q):
        return s * g0(q) + t * g1(q)

    partials = None
    if g0.partials is not None and g1.partials is not None:
        def partials(q):
            return s * g0.partials_at(q) + t * g1.partials_at(q)

    return MetricField(dim=g0.dim, eval=ev, partials=partials)


class ProbeStatus(Enum):
    SURVIVED_HORIZON = "SurvivedHorizon"
    ESCAPED = "EscapedAt"
    HIT_BOUNDARY = "HitBoundaryAt"
    INTEGRATOR_FAILURE = "IntegratorFailure"


@dataclass(frozen=True)
class ProbeVerdict:
    status: ProbeStatus
    time: Optional[float] = None

    def __str__(self):
        if self.status is ProbeStatus.SURVIVED_HORIZON:
            return self.status.value
        return f"{self.status.value}({self.time:.6g})"


@dataclass(frozen=True)
class EscapeGuards:
    """Event thresholds for the escape probe."""

    position_bound: float = 1e6
    speed_bound: float = 1e6
    boundary_margin: float = 1e-6


def escape_probe(rhs: Callable[[float, np.ndarray], np.ndarray],
                 x0: np.ndarray,
                 horizon: float,
                 guards: EscapeGuards = EscapeGuards(),
                 region: Optional[BarrierFunction] = None,
                 rtol: float = 1e-9,
                 atol: float = 1e-12) -> ProbeVerdict:
    """Integrate a first-order system and report the first guard crossing.

    The state layout is (q, qdot). Guard events are statuses, not errors;
    crossing times are refined by bisection to step resolution.
    """
    from .dynamics import IntegratorConfig, integrate_raw

    if region is not None and not region.contains(x0[: x0.size // 2]):
        from .errors import InfeasibleInitialState
        raise InfeasibleInitialState(f"x0={x0}")

    n = x0.size // 2

    def guard(t, x):
        # positive while safe; first nonpositive value fires the event
        vals = [guards.position_bound - float(np.max(np.abs(x[:n]))),
                guards.speed_bound - float(np.max(np.abs(x[n:])))]
        if region is not None:
            vals.append(region.margin(x[:n]) - guards.boundary_margin)
        return min(vals)

    feasible = None
    if region is not None:
        def feasible(t, x):
            return region.contains(x[:n])

    cfg = IntegratorConfig(rtol=rtol, atol=atol, max_step=min(1.0, horizon / 10.0))
    res = integrate_raw(rhs, 0.0, np.asarray(x0, dtype=float), horizon, cfg,
                        feasible=feasible, event=guard)
    if res.status == "event":
        # classify which guard fired at the event state
        t, x = res.event_time, res.event_state
        if np.max(np.abs(x[:n])) >= guards.position_bound or np.max(np.abs(x[n:])) >= guards.speed_bound:
            return ProbeVerdict(ProbeStatus.ESCAPED, t)
        return ProbeVerdict(ProbeStatus.HIT_BOUNDARY, t)
    if res.status == "done":
        return ProbeVerdict(ProbeStatus.SURVIVED_HORIZON)
    return ProbeVerdict(ProbeStatus.INTEGRATOR_FAILURE, res.ts[-1])


def runaway_rhs(epsilon: float) -> Callable[[float, np.ndarray], np.ndarray]:
    """1-D escape-time system x'' = (1+eps) x^(1+2eps) (state (x, xdot))."""
    def rhs(t, x):
        pos, vel = x
        return np.array([vel, (1.0 + epsilon) * np.sign(pos) * np.abs(pos) ** (1.0 + 2.0 * epsilon)])

    return rhs


def runaway_completed_rhs(epsilon: float) -> Callable[[float, np.ndarray], np.ndarray]:
    """The same potential under the completed metric 1 + x^4 (barrier f = x^3/3).

    -V grows like the squared completed distance, so the completed system is
    forward complete; used as the survives-the-horizon counterpart of the probe.
    """
    def rhs(t, x):
        pos, vel = x
        mass = 1.0 + pos ** 4
        mp = 4.0 * pos ** 3
        force = (1.0 + epsilon) * np.sign(pos) * np.abs(pos) ** (1.0 + 2.0 * epsilon)
        return np.array([vel, (0.5 * mp * vel * vel + force - mp * vel * vel) / mass])

    return rhs


def runaway_escape_oracle(epsilon: float) -> float:
    """Escape time of the runaway system from x(0)=1, x'(0)=0 by quadrature.

    The energy relation gives t(x) = int_1^x ds/sqrt(s^(2(1+eps)) - 1); the
    substitution s = 1/u maps the improper integral to [0, 1].
    """
    from scipy.integrate import quad

    val, _err = quad(lambda u: u ** (epsilon - 1.0) / np.sqrt(1.0 - u ** (2.0 + 2.0 * epsilon)),
                     0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=300)
    return float(val)


@dataclass(frozen=True)
class GrowthReport:
    """Quadratic-growth fit of -V along a sampled ray."""

    holds: bool
    a: float
    b: float
    max_excess: float
    distances: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)


def potential_growth_probe(g: MetricField, V: ScalarField, q0, ray: Ray,
                           samples: int = 100, slack: float = 1e-9) -> GrowthReport:
    """Check -V(q) <= a + b*d_g(q0, q)^2 along one sampled ray.

    The metric distance is approximated by the polyline length of the sample
    chain (an upper bound on the true distance suffices for the diagnostic).
    Fits the smallest (a, b) via least squares on the sampled excess and
    reports whether the bound holds with that fit.
    """
    q0 = np.asarray(q0, dtype=float)
    start = np.asarray(ray.start, dtype=float)
    stop = np.asarray(ray.stop, dtype=float)
    pts = [q0] + [start + t * (stop - start) for t in np.linspace(0.0, 1.0, samples)]
    dists = np.zeros(len(pts))
    for i in range(1, len(pts)):
        seg = pts[i] - pts[i - 1]
        mid = 0.5 * (pts[i] + pts[i - 1])
        dists[i] = dists[i - 1] + float(np.sqrt(max(seg @ g(mid) @ seg, 0.0)))
    vals = np.array([-V(p) for p in pts])
    d2 = dists ** 2
    # fit -V ~ a + b d^2 (b >= 0) on the near half, then demand the envelope
    # keep dominating on the far half: a genuinely super-quadratic -V escapes
    # any quadratic fitted on an inner window.
    half = max(len(pts) // 2, 2)
    A = np.vstack([np.ones(half), d2[:half]]).T
    coef, *_ = np.linalg.lstsq(A, vals[:half], rcond=None)
    a_fit, b_fit = float(coef[0]), max(float(coef[1]), 0.0)
    a_fit += max(float(np.max(vals[:half] - (a_fit + b_fit * d2[:half]))), 0.0)
    resid = vals - (a_fit + b_fit * d2)
    max_excess = float(np.max(resid))
    scale = max(1.0, float(np.max(np.abs(vals))))
    holds = bool(max_excess <= slack * scale)
    return GrowthReport(holds=holds, a=a_fit, b=b_fit, max_excess=max_excess,
                        distances=dists, values=vals)
