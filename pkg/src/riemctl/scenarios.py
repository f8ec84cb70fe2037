"""Catalog of the eight worked systems.

Each scenario bundles the open-loop mechanical data (metric, potential,
control fields), the feasible region and barrier, closed-form reference
controls where they exist, figure initial conditions, a feasible-state
sampler for regression batteries, and integrator defaults. Conformal
"bouncing" metrics are stored with the sign that makes them positive definite
on the component of the feasible region containing the default initial state
(Euler-Lagrange dynamics are unchanged by an overall sign).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .completion import BarrierFunction, Ray
from .control import (ControlledSystem, FeedbackLaw, barrier_control,
                      constrained_cl_control, dissipation_simple,
                      dissipation_storage)
from .dynamics import IntegratorConfig, MechState
from .errors import ParameterOutOfRange
from .geometry import MetricField, ScalarField, VectorFieldSet, euclidean_metric

SCENARIO_IDS = (
    "Landing",
    "PoincareBounce",
    "PoincareStrip",
    "Square",
    "DiskAvoid",
    "DiskBounce",
    "PendulumCartDown",
    "PendulumCartUp",
)


@dataclass(frozen=True)
class Scenario:
    """A fully-populated worked system; doubles as a test fixture."""

    id: str
    system: ControlledSystem
    parameters: Dict[str, float]
    default_initial: MechState
    default_horizon: float
    integrator: IntegratorConfig
    reference_control: Optional[FeedbackLaw] = None
    reference_dissipation: Optional[Callable[[float], FeedbackLaw]] = None
    variant_control: Optional[FeedbackLaw] = None
    sample_state: Optional[Callable[[np.random.Generator], np.ndarray]] = None
    equilibrium_guess: Optional[np.ndarray] = None
    default_dissipation_gain: float = 0.0
    storage_config: Optional[Dict[str, float]] = None
    guard_margin: float = 1e-6
    equivalence_floor: float = 0.0
    confinement_note: str = ""

    def synthesized_control(self, check: bool = False, rng_seed: int = 0,
                            grid: int = 200, tol: float = 1e-6) -> FeedbackLaw:
        """The library-synthesized feedback for this scenario.

        With `check`, the synthesis hypotheses are verified on a quasi-random
        feasible grid drawn from the scenario sampler.
        """
        pts = states = None
        if check and self.sample_state is not None:
            rng = np.random.default_rng(rng_seed)
            states = [self.sample_state(rng) for _ in range(grid)]
            pts = [x[: x.size // 2] for x in states]
        if self.system.shaped is not None:
            return constrained_cl_control(self.system, check_points=pts,
                                          check_states=states, tol=tol)
        return barrier_control(self.system, check_points=pts, tol=tol)

    def default_feedback(self) -> FeedbackLaw:
        """Synthesized control plus the scenario's default dissipation."""
        law = self.synthesized_control()
        if self.default_dissipation_gain:
            law = law + dissipation_simple(self.system, gain=self.default_dissipation_gain)
        return law

    def storage_feedback(self) -> FeedbackLaw:
        """Synthesized control plus the storage-dissipation stack."""
        if not self.storage_config:
            raise ParameterOutOfRange(f"scenario {self.id} has no storage configuration")
        cfg = self.storage_config
        law = self.synthesized_control() + dissipation_storage(
            self.system, e_star=cfg["e_star"], gain=cfg["gain"])
        if cfg.get("viscous_gain", 0.0):
            law = law + dissipation_simple(self.system, gain=cfg["viscous_gain"])
        return law


def _region(phi_eval, phi_grad=None):
    return ScalarField(eval=phi_eval, gradient=phi_grad)


def _uniform(rng, lo, hi):
    return float(rng.uniform(lo, hi))


# ---------------------------------------------------------------------------
# Landing
# ---------------------------------------------------------------------------

def _build_landing(p):
    G = p["G"]
    g = euclidean_metric(2)
    V = ScalarField(eval=lambda q: G * q[1],
                    gradient=lambda q: np.array([0.0, G]),
                    hessian=lambda q: np.zeros((2, 2)))
    Y = VectorFieldSet(count=1, dim=2, eval=lambda q: np.array([[0.0, 1.0]]))
    f = ScalarField(eval=lambda q: math.log(q[1]),
                    gradient=lambda q: np.array([0.0, 1.0 / q[1]]),
                    hessian=lambda q: np.array([[0.0, 0.0], [0.0, -1.0 / q[1] ** 2]]))
    barrier = BarrierFunction(
        phi=_region(lambda q: -q[1], lambda q: np.array([0.0, -1.0])),
        f=f,
        rays=(Ray(start=np.array([0.0, 0.5]), stop=np.array([0.0, 0.0])),),
    )
    system = ControlledSystem(g=g, V=V, controls=Y, feasible=barrier)

    def u_ref(q, qdot):
        y, yd = q[1], qdot[1]
        return np.array([(G * y + yd * yd) / (y ** 3 + y)])

    def sample(rng):
        q = np.array([_uniform(rng, -2, 2), _uniform(rng, 0.2, 3.0)])
        qd = rng.uniform(-2, 2, 2)
        return np.concatenate([q, qd])

    return Scenario(
        id="Landing", system=system, parameters=dict(p),
        default_initial=MechState(q=np.array([0.5, 0.5]), qdot=np.array([0.5, 1.0])),
        default_horizon=50.0,
        # the landing approaches y = 0 exponentially (that is the point of the
        # example); below y ~ 1e-7 the closed-loop composition u - G is pure
        # roundoff, so equivalence runs stop at a floor guard while long runs
        # keep y > 0 by stage-feasibility rejection alone (margin guard off)
        integrator=IntegratorConfig(rtol=1e-9, atol=1e-13),
        reference_control=FeedbackLaw.from_callable(u_ref),
        sample_state=sample,
        guard_margin=0.0,
        equivalence_floor=1e-8,
        confinement_note="y > 0",
    )


# ---------------------------------------------------------------------------
# Conformal bouncing metrics (fully actuated)
# ---------------------------------------------------------------------------

def _conformal_system(factor, factor_grad, phi_eval, dim=2):
    shaped = MetricField(
        dim=dim,
        eval=lambda q: factor(q) * np.eye(dim),
        partials=lambda q: np.asarray(factor_grad(q), dtype=float)[:, None, None] * np.eye(dim)[None, :, :],
    )
    Y = VectorFieldSet(count=dim, dim=dim, eval=lambda q: np.eye(dim))
    barrier = BarrierFunction(phi=_region(phi_eval), f=None)
    return ControlledSystem(g=euclidean_metric(dim), V=None, controls=Y,
                            feasible=barrier, shaped=shaped)


def _build_poincare_bounce(p):
    kap = p["kappa"]
    y_min = math.sqrt(2.0 / kap)

    def factor(q):
        return 1.0 - 2.0 / (kap * q[1] ** 2)

    def factor_grad(q):
        return np.array([0.0, 4.0 / (kap * q[1] ** 3)])

    system = _conformal_system(factor, factor_grad, lambda q: y_min - q[1])

    def u_ref(q, qdot):
        y = q[1]
        xd, yd = qdot
        den = y * (kap * y * y - 2.0)
        return np.array([-4.0 * xd * yd / den, 2.0 * (xd * xd - yd * yd) / den])

    def sample(rng):
        q = np.array([_uniform(rng, -3, 3), _uniform(rng, 0.1, 3.0)])
        return np.concatenate([q, rng.uniform(-2, 2, 2)])

    x0 = MechState(q=np.array([0.0, 1.0]), qdot=np.array([1.0, -0.5]))
    if factor(x0.q) <= 0:
        raise ParameterOutOfRange("bounce metric not positive definite at the initial state "
                                  f"(requires y > sqrt(2/kappa) = {y_min:.4g})")
    return Scenario(
        id="PoincareBounce", system=system, parameters=dict(p),
        default_initial=x0, default_horizon=50.0,
        integrator=IntegratorConfig(rtol=1e-9, atol=1e-12),
        reference_control=FeedbackLaw.from_callable(u_ref),
        sample_state=sample,
        confinement_note="y > 0",
    )


def _build_poincare_strip(p):
    kap = p["kappa"]

    def factor(q):
        y = q[1]
        return 1.0 - 2.0 / (kap * y * y) - 2.0 / (kap * (y - 1.0) ** 2)

    def factor_grad(q):
        y = q[1]
        return np.array([0.0, 4.0 / (kap * y ** 3) + 4.0 / (kap * (y - 1.0) ** 3)])

    def phi(q):
        y = q[1]
        if not (0.0 < y < 1.0):
            return 1.0
        return 2.0 / (kap * y * y) + 2.0 / (kap * (y - 1.0) ** 2) - 1.0

    system = _conformal_system(factor, factor_grad, phi)

    def u_ref(q, qdot):
        y = q[1]
        xd, yd = qdot
        u1 = (-4.0 * xd * yd * (1.0 / (kap * y ** 3) + 1.0 / (kap * (y - 1.0) ** 3))
              / (-2.0 / (kap * y * y) - 2.0 / (kap * (y - 1.0) ** 2) + 1.0))
        u2 = (2.0 * (2.0 * kap * y ** 3 - 3.0 * kap * y * y + 3.0 * kap * y - kap) * (xd * xd - yd * yd)
              / ((y - 1.0) * y * (kap ** 2 * y ** 4 - 2.0 * kap ** 2 * y ** 3
                                  + (kap * (kap - 2.0) - 2.0 * kap) * y * y
                                  + 4.0 * kap * y - 2.0 * kap)))
        return np.array([u1, u2])

    def sample(rng):
        q = np.array([_uniform(rng, -3, 3), _uniform(rng, 0.1, 0.9)])
        return np.concatenate([q, rng.uniform(-2, 2, 2)])

    return Scenario(
        id="PoincareStrip", system=system, parameters=dict(p),
        default_initial=MechState(q=np.array([0.0, 0.5]), qdot=np.array([1.0, -0.5])),
        default_horizon=50.0,
        integrator=IntegratorConfig(rtol=1e-9, atol=1e-12),
        reference_control=FeedbackLaw.from_callable(u_ref),
        sample_state=sample,
        confinement_note="0 < y < 1",
    )


def _build_square(p):
    kap = p["kappa"]

    def inv_terms(x):
        return 1.0 / x ** 2 + 1.0 / (x - 1.0) ** 2

    def factor(q):
        return 1.0 - (2.0 / kap) * (inv_terms(q[0]) + inv_terms(q[1]))

    def factor_grad(q):
        def d(x):
            return (2.0 / kap) * (2.0 / x ** 3 + 2.0 / (x - 1.0) ** 3)
        return np.array([d(q[0]), d(q[1])])

    def phi(q):
        x, y = q
        if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
            return 1.0
        return (2.0 / kap) * (inv_terms(x) + inv_terms(y)) - 1.0

    system = _conformal_system(factor, factor_grad, phi)

    def sample(rng):
        q = rng.uniform(0.1, 0.9, 2)
        return np.concatenate([q, rng.uniform(-2, 2, 2)])

    return Scenario(
        id="Square", system=system, parameters=dict(p),
        default_initial=MechState(q=np.array([0.2, 0.5]), qdot=np.array([0.5, -0.7])),
        default_horizon=50.0,
        integrator=IntegratorConfig(rtol=1e-9, atol=1e-12),
        sample_state=sample,
        confinement_note="0 < x < 1 and 0 < y < 1",
    )


def _build_disk_bounce(p):
    kap = p["kappa"]
    r2_max = 1.0 - 1.0 / math.sqrt(kap)

    def factor(q):
        w = q[0] ** 2 + q[1] ** 2 - 1.0
        return 1.0 - 1.0 / (kap * w * w)

    def factor_grad(q):
        w = q[0] ** 2 + q[1] ** 2 - 1.0
        return (2.0 / (kap * w ** 3)) * np.array([2.0 * q[0], 2.0 * q[1]])

    def phi(q):
        return q[0] ** 2 + q[1] ** 2 - r2_max

    system = _conformal_system(factor, factor_grad, phi)

    def sample(rng):
        rr = math.sqrt(_uniform(rng, 0.0, 0.81))
        th = _uniform(rng, 0, 2 * math.pi)
        q = np.array([rr * math.cos(th), rr * math.sin(th)])
        return np.concatenate([q, rng.uniform(-2, 2, 2)])

    return Scenario(
        id="DiskBounce", system=system, parameters=dict(p),
        default_initial=MechState(q=np.array([0.5, 0.0]), qdot=np.array([0.1, 0.1])),
        default_horizon=50.0,
        integrator=IntegratorConfig(rtol=1e-9, atol=1e-12),
        sample_state=sample,
        confinement_note="x^2 + y^2 < 1",
    )


# ---------------------------------------------------------------------------
# DiskAvoid (radial single control)
# ---------------------------------------------------------------------------

def _build_disk_avoid(p):
    k = p["barrier_scale"]
    g = euclidean_metric(2)
    Y = VectorFieldSet(count=1, dim=2, eval=lambda q: np.array([[q[0], q[1]]]))

    def w_of(q):
        return q[0] ** 2 + q[1] ** 2 - 1.0

    f = ScalarField(
        eval=lambda q: k * math.log(w_of(q)),
        gradient=lambda q: (2.0 * k / w_of(q)) * np.array([q[0], q[1]]),
        hessian=lambda q: (2.0 * k / w_of(q)) * np.eye(2)
        - (4.0 * k / w_of(q) ** 2) * np.outer([q[0], q[1]], [q[0], q[1]]),
    )
    barrier = BarrierFunction(
        phi=_region(lambda q: 1.0 - (q[0] ** 2 + q[1] ** 2),
                    lambda q: np.array([-2.0 * q[0], -2.0 * q[1]])),
        f=f,
        rays=(Ray(start=np.array([2.0, 0.0]), stop=np.array([1.0, 0.0])),
              Ray(start=np.array([2.0, 0.0]), stop=np.array([50.0, 0.0]))),
    )
    system = ControlledSystem(g=g, V=None, controls=Y, feasible=barrier)

    def u_ref(q, qdot):
        x, y = q
        xd, yd = qdot
        num = 2.0 * (4.0 * x * y * xd * yd - y * y * xd * xd + x * x * xd * xd + xd * xd
                     - x * x * yd * yd + y * y * yd * yd + yd * yd)
        den = ((x * x + y * y - 1.0)
               * (30.0 * x * x * y * y + 15.0 * x ** 4 - 28.0 * x * x
                  + 15.0 * y ** 4 - 28.0 * y * y + 15.0))
        return np.array([num / den])

    def sample(rng):
        rr = _uniform(rng, 1.2, 3.0)
        th = _uniform(rng, 0, 2 * math.pi)
        q = np.array([rr * math.cos(th), rr * math.sin(th)])
        return np.concatenate([q, rng.uniform(-2, 2, 2)])

    return Scenario(
        id="DiskAvoid", system=system, parameters=dict(p),
        default_initial=MechState(q=np.array([-2.0, 0.2]), qdot=np.array([1.0, 0.53])),
        default_horizon=50.0,
        integrator=IntegratorConfig(rtol=1e-9, atol=1e-12),
        reference_control=FeedbackLaw.from_callable(u_ref),
        sample_state=sample,
        confinement_note="x^2 + y^2 > 1",
    )


# ---------------------------------------------------------------------------
# Pendulum on a cart
# ---------------------------------------------------------------------------

def _cart_metric(alpha, beta, gamma):
    def ev(q):
        c = math.cos(q[0])
        return np.array([[alpha, beta * c], [beta * c, gamma]])

    def partials(q):
        sn = math.sin(q[0])
        P = np.zeros((2, 2, 2))
        P[0] = np.array([[0.0, -beta * sn], [-beta * sn, 0.0]])
        return P

    return MetricField(dim=2, eval=ev, partials=partials)


def _cart_potential(D, offset=0.0):
    return ScalarField(
        eval=lambda q: -D * math.cos(q[0]) + offset,
        gradient=lambda q: np.array([D * math.sin(q[0]), 0.0]),
        hessian=lambda q: np.array([[D * math.cos(q[0]), 0.0], [0.0, 0.0]]),
    )


def _cart_controls(alpha, beta, gamma):
    def ev(q):
        c = math.cos(q[0])
        det = alpha * gamma - beta * beta * c * c
        return np.array([[-beta * c / det, alpha / det]])

    return VectorFieldSet(count=1, dim=2, eval=ev)


def _build_pendulum_down(p):
    alpha, beta, gamma, D = p["alpha"], p["beta"], p["gamma"], p["D"]
    if alpha * gamma <= beta * beta:
        raise ParameterOutOfRange("cart metric requires alpha*gamma > beta^2")
    g = _cart_metric(alpha, beta, gamma)
    V = _cart_potential(D)
    Y = _cart_controls(alpha, beta, gamma)

    def sigma(s):
        return 1.0 / math.sqrt(1.0 - s * s)

    f = ScalarField(
        eval=lambda q: math.asin(q[1]),
        gradient=lambda q: np.array([0.0, sigma(q[1])]),
        hessian=lambda q: np.array([[0.0, 0.0], [0.0, q[1] * sigma(q[1]) ** 3]]),
    )
    barrier = BarrierFunction(
        phi=_region(lambda q: q[1] ** 2 - 1.0, lambda q: np.array([0.0, 2.0 * q[1]])),
        f=f,
        rays=(Ray(start=np.array([0.0, 0.0]), stop=np.array([0.0, 1.0])),),
    )
    system = ControlledSystem(g=g, V=V, controls=Y, feasible=barrier)

    def u_ref(q, qdot):
        phi_, s = q
        c, sn = math.cos(phi_), math.sin(phi_)
        det = alpha * gamma - beta * beta * c * c
        rho = alpha / (det * (1.0 - s * s))
        phid, sd = qdot
        return np.array([-(rho / (1.0 + rho))
                         * ((beta / alpha) * sn * (alpha * phid ** 2 + D * c)
                            + (det / alpha) * (s / (1.0 - s * s)) * sd ** 2)])

    def u_dis_ref(gain):
        return FeedbackLaw(evaluate=lambda q, qdot: np.array([-gain * qdot[1]]),
                           provenance="reference-closed-form")

    def sample(rng):
        q = np.array([_uniform(rng, -math.pi, math.pi), _uniform(rng, -0.9, 0.9)])
        return np.concatenate([q, rng.uniform(-1, 1, 2)])

    return Scenario(
        id="PendulumCartDown", system=system, parameters=dict(p),
        default_initial=MechState(q=np.array([math.pi - 0.25, 0.0]),
                                  qdot=np.array([0.0, 0.03])),
        default_horizon=50.0,
        integrator=IntegratorConfig(rtol=1e-9, atol=1e-12),
        reference_control=FeedbackLaw.from_callable(u_ref),
        reference_dissipation=u_dis_ref,
        sample_state=sample,
        equilibrium_guess=np.array([math.pi, 0.0, 0.0, 0.0]),
        default_dissipation_gain=p["k_d"],
        confinement_note="|s| < 1",
    )


def _build_pendulum_up(p):
    alpha, beta, gamma, D = p["alpha"], p["beta"], p["gamma"], p["D"]
    kappa, kb, r = p["kappa"], p["k_b"], p["r"]
    if alpha * gamma <= beta * beta:
        raise ParameterOutOfRange("cart metric requires alpha*gamma > beta^2")
    if alpha * gamma <= (1.0 + kappa) * beta * beta:
        raise ParameterOutOfRange(
            "shaped cart metric requires alpha*gamma > (1+kappa)*beta^2 to stay "
            "positive definite (completion needs a Riemannian shaped metric)")
    if r <= 0 or kb < 0:
        raise ParameterOutOfRange("need r > 0 and k_b >= 0")
    bg = kappa * beta / gamma
    g = _cart_metric(alpha, beta, gamma)
    # rest level of the stabilized equilibrium normalized to E = 1 (matches the
    # storage target; potentials are defined modulo constants)
    V = _cart_potential(D, offset=1.0 + D)
    Y = _cart_controls(alpha, beta, gamma)

    def gbar_ev(q):
        c = math.cos(q[0])
        return np.array([
            [alpha + kappa * (kappa + 1.0) * (beta ** 2 / gamma) * c * c, (1.0 + kappa) * beta * c],
            [(1.0 + kappa) * beta * c, gamma],
        ])

    def gbar_partials(q):
        c, sn = math.cos(q[0]), math.sin(q[0])
        P = np.zeros((2, 2, 2))
        P[0] = np.array([
            [-2.0 * kappa * (kappa + 1.0) * (beta ** 2 / gamma) * c * sn, -(1.0 + kappa) * beta * sn],
            [-(1.0 + kappa) * beta * sn, 0.0],
        ])
        return P

    gbar = MetricField(dim=2, eval=gbar_ev, partials=gbar_partials)

    def zof(q):
        return q[1] + bg * math.sin(q[0])

    # proper barrier phi(z) = (k_b^2/r) artanh(z/r); phi'(0) = k_b^2/r^2
    def Pp(z):
        return kb * kb / (r * r - z * z)

    def Ppp(z):
        return 2.0 * kb * kb * z / (r * r - z * z) ** 2

    if kb > 0:
        f = ScalarField(
            eval=lambda q: (kb * kb / r) * math.atanh(zof(q) / r),
            gradient=lambda q: Pp(zof(q)) * np.array([bg * math.cos(q[0]), 1.0]),
            hessian=lambda q: _up_barrier_hessian(q, bg, Pp, Ppp, zof),
        )
        barrier = BarrierFunction(
            phi=_region(lambda q: zof(q) ** 2 - r * r,
                        lambda q: 2.0 * zof(q) * np.array([bg * math.cos(q[0]), 1.0])),
            f=f,
            rays=(Ray(start=np.zeros(2), stop=np.array([0.0, r])),),
        )
    else:
        # k_b = 0: pure shaping, no configuration constraint (the contrast run
        # is allowed to leave |z| < r)
        barrier = BarrierFunction(phi=_region(lambda q: -1.0), f=None)
    system = ControlledSystem(g=g, V=V, controls=Y, feasible=barrier, shaped=gbar)

    def detg(c):
        return alpha * gamma - beta * beta * c * c

    def detgbar(c):
        return alpha * gamma - (1.0 + kappa) * beta * beta * c * c

    def u_bar_ref(q, qdot):
        # barrier component of the constrained shaping law, in closed form:
        # ubar = -(|g_o|/|gbar|)/(1+rho) [ beta P'^2 sin(phi)(alpha phid^2
        #        + D cos(phi))/|gbar| + P' P'' zdot^2 ],  rho = delta P'^2/|gbar|
        phi_ = q[0]
        c, sn = math.cos(phi_), math.sin(phi_)
        z = zof(q)
        p1, p2 = Pp(z), Ppp(z)
        delta = alpha - kappa * (beta ** 2 / gamma) * c * c
        rho = (delta / detgbar(c)) * p1 * p1
        zdot = qdot[1] + bg * c * qdot[0]
        bracket = (beta * p1 * p1 * sn * (alpha * qdot[0] ** 2 + D * c) / detgbar(c)
                   + p1 * p2 * zdot * zdot)
        return np.array([-(detg(c) / detgbar(c)) / (1.0 + rho) * bracket])

    def u_bar_variant(q, qdot):
        # alternate catalogued closed form for the same barrier component; the
        # discrepancy tests document that it is NOT the synthesized law (it
        # fails the closed-loop equivalence that defines the control)
        phi_ = q[0]
        c, sn = math.cos(phi_), math.sin(phi_)
        z = zof(q)
        p1, p2 = Pp(z), Ppp(z)
        delta = alpha - kappa * (beta ** 2 / gamma) * c * c
        rho = (delta / detgbar(c)) * p1 * p1
        phid, sd = qdot
        bracket = ((beta / delta) * sn * ((kappa + 1.0) * delta * phid ** 2 + D * c)
                   - bg * sn * phid ** 2 * p1 * p1
                   + p1 * p2 * (sd + bg * c * phid) ** 2)
        return np.array([-(rho / (1.0 + rho)) * bracket])

    def u_dis_ref(gain):
        def ev(q, qdot):
            return np.array([-gain * (qdot[1] + bg * math.cos(q[0]) * qdot[0])])

        return FeedbackLaw(evaluate=ev, provenance="reference-closed-form")

    def sample(rng):
        for _ in range(200):
            q = np.array([_uniform(rng, -0.3, 0.3), _uniform(rng, -0.7, 0.7)])
            if abs(zof(q)) < 0.8 * r:
                return np.concatenate([q, rng.uniform(-1, 1, 2)])
        raise RuntimeError("sampler failed to find a feasible state")

    return Scenario(
        id="PendulumCartUp", system=system, parameters=dict(p),
        default_initial=MechState(q=np.array([0.25, 0.0]), qdot=np.array([0.0, 0.03])),
        default_horizon=50.0,
        integrator=IntegratorConfig(rtol=1e-9, atol=1e-12),
        reference_control=FeedbackLaw.from_callable(u_bar_ref),
        variant_control=FeedbackLaw.from_callable(u_bar_variant),
        reference_dissipation=u_dis_ref,
        sample_state=sample,
        equilibrium_guess=np.zeros(4),
        default_dissipation_gain=p["k_d"],
        storage_config={"e_star": p["E_star"], "gain": p["k_d_storage"],
                        "viscous_gain": p["k_viscous_storage"]},
        confinement_note="|z| < r with z = s + kappa*(beta/gamma)*sin(phi)",
    )


def _up_barrier_hessian(q, bg, Pp, Ppp, zof):
    c, sn = math.cos(q[0]), math.sin(q[0])
    z = zof(q)
    p1, p2 = Pp(z), Ppp(z)
    return np.array([
        [p2 * (bg * c) ** 2 - p1 * bg * sn, p2 * bg * c],
        [p2 * bg * c, p2],
    ])


_DEFAULTS: Dict[str, Dict[str, float]] = {
    "Landing": {"G": 9.81},
    "PoincareBounce": {"kappa": 1e4},
    "PoincareStrip": {"kappa": 1e4},
    "Square": {"kappa": 1e4},
    "DiskAvoid": {"barrier_scale": 1.0 / math.sqrt(30.0)},
    "DiskBounce": {"kappa": 1e3},
    "PendulumCartDown": {"alpha": 2.0, "beta": 1.0, "gamma": 2.0, "D": -1.0, "k_d": 0.3},
    "PendulumCartUp": {"alpha": 2.0, "beta": 1.0, "gamma": 2.0, "D": 1.0,
                       "kappa": 1.2, "k_b": 0.1, "r": 1.0, "k_d": 0.3,
                       "E_star": 1.0, "k_d_storage": 1.0, "k_viscous_storage": 0.2},
}

_BUILDERS = {
    "Landing": _build_landing,
    "PoincareBounce": _build_poincare_bounce,
    "PoincareStrip": _build_poincare_strip,
    "Square": _build_square,
    "DiskAvoid": _build_disk_avoid,
    "DiskBounce": _build_disk_bounce,
    "PendulumCartDown": _build_pendulum_down,
    "PendulumCartUp": _build_pendulum_up,
}


def default_parameters(scenario_id: str) -> Dict[str, float]:
    if scenario_id not in _DEFAULTS:
        raise ParameterOutOfRange(f"unknown scenario id: {scenario_id!r}")
    return dict(_DEFAULTS[scenario_id])


def build(scenario_id: str, **overrides) -> Scenario:
    """Build a scenario by id with optional parameter overrides."""
    params = default_parameters(scenario_id)
    for key, val in overrides.items():
        if key not in params:
            raise ParameterOutOfRange(f"unknown parameter {key!r} for scenario {scenario_id}")
        params[key] = float(val)
    for key, val in params.items():
        if key in ("kappa", "r", "G") and val <= 0:
            raise ParameterOutOfRange(f"{key} must be positive, got {val}")
    return _BUILDERS[scenario_id](params)
