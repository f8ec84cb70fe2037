"""Feedback synthesis.

The barrier law cancels exactly the difference between the open system and the
free dynamics of the completed metric g + df (x) df; the constrained shaping
law does the same against gbar + df (x) df for a matching shaped metric gbar.
Both dissipation injections contract the completed metric with the control
fields, which makes the completed energy (or its storage function) provably
non-increasing along the closed loop.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from .completion import BarrierFunction, CompletedMetric
from .dynamics import free_acceleration
from .errors import (DependentControlFields, HypothesisViolated,
                     MatchingViolated)
from .geometry import MetricField, ScalarField, VectorFieldSet


@dataclass(frozen=True)
class FeedbackLaw:
    """A state-feedback u(q, qdot) with a provenance tag.

    Laws compose additively (`a + b`), which is how dissipation terms are
    stacked on top of a synthesized law.
    """

    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    provenance: str
    parts: Optional[Callable[[np.ndarray, np.ndarray], dict]] = None

    def __add__(self, other: "FeedbackLaw") -> "FeedbackLaw":
        def ev(q, qdot):
            return np.atleast_1d(self.evaluate(q, qdot)) + np.atleast_1d(other.evaluate(q, qdot))

        return FeedbackLaw(evaluate=ev, provenance="sum")

    @staticmethod
    def from_callable(fn, provenance="reference-closed-form") -> "FeedbackLaw":
        return FeedbackLaw(evaluate=lambda q, qdot: np.atleast_1d(fn(q, qdot)), provenance=provenance)


@dataclass(frozen=True)
class ControlledSystem:
    """Bundle (g, V, control fields, feasible region + barrier, optional gbar)."""

    g: MetricField
    V: Optional[ScalarField]
    controls: VectorFieldSet
    feasible: BarrierFunction
    shaped: Optional[MetricField] = None

    @property
    def dim(self) -> int:
        return self.g.dim

    def completed_target(self) -> CompletedMetric:
        """The target metric gbar_f = (shaped or g) + df (x) df."""
        return CompletedMetric(base=self.shaped if self.shaped is not None else self.g,
                               barrier=self.feasible)

    # `dynamics.integrate` looks this up for energy annotations
    @property
    def completed(self) -> CompletedMetric:
        return self.completed_target()


def _geodesic_contraction(G, P, qdot):
    a = np.einsum('i,ijl,j->l', qdot, P, qdot)
    b = np.einsum('lij,i,j->l', P, qdot, qdot)
    return np.linalg.solve(G, a - 0.5 * b)


def gram(system: ControlledSystem, q):
    """Control Gram matrix C_ab = g(Y_a, Y_b) and its inverse."""
    G = system.g(q)
    Y = system.controls(q)
    C = Y @ G @ Y.T
    C = 0.5 * (C + C.T)
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise DependentControlFields(np.asarray(q, dtype=float), str(exc)) from exc
    Linv = np.linalg.inv(L)
    return C, Linv.T @ Linv


def span_residual(system: ControlledSystem, q, metric: Optional[MetricField] = None) -> float:
    """Metric norm of the component of grad f orthogonal to span{Y_a}.

    `metric` defaults to the system metric; the shaped variant is used for the
    constrained-shaping hypothesis (df in span of the gbar-flats of the Y_a).
    """
    if system.feasible.f is None:
        return 0.0
    system.feasible.require(q)
    g = metric if metric is not None else system.g
    G = g(q)
    Y = system.controls(q)
    df = system.feasible.f.gradient_at(q)
    fsharp = np.linalg.solve(G, df)
    C = Y @ G @ Y.T
    rhs = Y @ df
    lam = np.linalg.solve(0.5 * (C + C.T), rhs)
    resid = fsharp - Y.T @ lam
    return float(np.sqrt(max(resid @ G @ resid, 0.0)))


def _check_span(system, metric, points, tol, what):
    worst = 0.0
    for q in points:
        worst = max(worst, span_residual(system, q, metric=metric))
    if worst > tol:
        raise HypothesisViolated(f"{what}: max span residual {worst:.3e} > {tol:.1e} on the check grid")
    return worst


def barrier_control(system: ControlledSystem,
                    check_points: Optional[Sequence[np.ndarray]] = None,
                    tol: float = 1e-6,
                    debug: bool = False) -> FeedbackLaw:
    """Feedback that renders the closed loop the free (g + df (x) df, V) system.

    u^a = C^{ab} (1 + |grad f|^2)^{-1} (f^j dV_j - f_jk qd^j qd^k) <df, Y_b>.
    The span hypothesis grad f in span{Y_a} is checked on `check_points` at
    synthesis time and, when `debug`, per call.
    """
    if check_points is not None:
        _check_span(system, None, check_points, tol, "barrier hypothesis")
    g, V, controls, region = system.g, system.V, system.controls, system.feasible
    f = region.f

    def ev(q, qdot):
        region.require(q)
        if debug and span_residual(system, q) > tol:
            raise HypothesisViolated(f"span residual above {tol:.1e} at q={q}")
        if f is None:
            return np.zeros(controls.count)
        G = g(q)
        P = g.partials_at(q)
        Y = controls(q)
        df = f.gradient_at(q)
        fsharp = np.linalg.solve(G, df)
        denom = 1.0 + df @ fsharp
        gam = _geodesic_contraction(G, P, qdot)
        fjk_qdqd = qdot @ f.hessian_at(q) @ qdot - df @ gam
        fv = fsharp @ V.gradient_at(q) if V is not None else 0.0
        C = Y @ G @ Y.T
        core = (fv - fjk_qdqd) / denom
        return np.linalg.solve(0.5 * (C + C.T), core * (Y @ df))

    return FeedbackLaw(evaluate=ev, provenance="barrier")


def annihilator_basis(system: ControlledSystem, q) -> np.ndarray:
    """Orthonormal rows spanning the annihilator of span{Y_a} at q.

    Rows w satisfy <w, Y_a> = 0 for all a. Continuity across points is not
    enforced; only residual norms are consumed downstream.
    """
    Y = system.controls(q)
    N = null_space(Y)
    return N.T  # (n - m, n)


def matching_residual(system: ControlledSystem, q, qdot) -> np.ndarray:
    """Annihilator components of the difference of the shaped and open free
    dynamics; identically zero exactly when the shaped metric is realizable by
    the available controls."""
    if system.shaped is None:
        raise MatchingViolated("no shaped metric on this system")
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    a_open = free_acceleration(system.g, system.V, q, qdot)
    a_shaped = free_acceleration(system.shaped, system.V, q, qdot)
    mu = annihilator_basis(system, q)
    return mu @ (a_shaped - a_open)


def constrained_cl_control(system: ControlledSystem,
                           check_points: Optional[Sequence[np.ndarray]] = None,
                           check_states: Optional[Sequence[np.ndarray]] = None,
                           tol: float = 1e-6) -> FeedbackLaw:
    """Shaping-plus-barrier feedback for a matching shaped metric gbar.

    The closed loop equals the free dynamics of (gbar + df (x) df, V). With a
    constant barrier the law reduces to pure metric shaping; with gbar = g it
    reduces to `barrier_control`. The law's `parts` callable exposes the
    shaping and barrier components separately.
    """
    if system.shaped is None:
        raise MatchingViolated("constrained shaping requires a shaped metric")
    gbar = system.shaped
    if check_points is not None and system.feasible.f is not None:
        _check_span(system, gbar, check_points, tol, "shaped barrier hypothesis")
    if check_states is not None:
        worst = 0.0
        for x in check_states:
            n = x.size // 2
            worst = max(worst, float(np.max(np.abs(matching_residual(system, x[:n], x[n:])))))
        if worst > tol:
            raise MatchingViolated(f"max matching residual {worst:.3e} > {tol:.1e} on the check grid")

    g, V, controls, region = system.g, system.V, system.controls, system.feasible
    f = region.f

    def parts(q, qdot):
        region.require(q)
        q = np.asarray(q, dtype=float)
        qdot = np.asarray(qdot, dtype=float)
        G = g(q)
        Gb = gbar(q)
        Y = controls(q)
        mu = Y @ G                       # rows flat_g(Y_a)
        C = Y @ G @ Y.T
        Cinv_rhs = lambda v: np.linalg.solve(0.5 * (C + C.T), v)
        gam = _geodesic_contraction(G, g.partials_at(q), qdot)
        gamb = _geodesic_contraction(Gb, gbar.partials_at(q), qdot)
        dV = V.gradient_at(q) if V is not None else np.zeros_like(q)
        diff = (gam - gamb) + (np.linalg.solve(G, dV) - np.linalg.solve(Gb, dV))
        shaping = Cinv_rhs(mu @ diff)
        if f is None:
            return {"shaping": shaping, "barrier": np.zeros_like(shaping)}
        df = f.gradient_at(q)
        fbsharp = np.linalg.solve(Gb, df)
        denom = 1.0 + df @ fbsharp
        fjk_qdqd = qdot @ f.hessian_at(q) @ qdot - df @ gamb
        fv = fbsharp @ dV
        Cb = Y @ Gb @ Y.T
        barrier = np.linalg.solve(0.5 * (Cb + Cb.T), ((fv - fjk_qdqd) / denom) * (Y @ df))
        return {"shaping": shaping, "barrier": barrier}

    def ev(q, qdot):
        p = parts(q, qdot)
        return p["shaping"] + p["barrier"]

    return FeedbackLaw(evaluate=ev, provenance="constrained-CL", parts=parts)


def dissipation_simple(system: ControlledSystem, gain: float = 1.0) -> FeedbackLaw:
    """u_dis^a = -gain * gf(Y_a, qdot) with gf the completed target metric.

    Along the closed loop this makes dE_Lf/dt = -gain * sum_a gf(Y_a, qdot)^2.
    """
    completed = system.completed_target()
    controls = system.controls

    def ev(q, qdot):
        gf = completed.metric(q)
        Y = controls(q)
        return -gain * (Y @ gf @ np.asarray(qdot, dtype=float))

    return FeedbackLaw(evaluate=ev, provenance="dissipation-simple")


def dissipation_storage(system: ControlledSystem, e_star: float, gain: float = 1.0) -> FeedbackLaw:
    """Storage-function dissipation for H = (E_Lf - E*)^2 / 2.

    u_dis^a = -gain * (E_Lf - E*) * gf(Y_a, qdot); then dH/dt <= 0 along the
    closed loop.
    """
    completed = system.completed_target()
    controls = system.controls
    V = system.V

    def ev(q, qdot):
        qdot = np.asarray(qdot, dtype=float)
        gf = completed.metric(q)
        e_lf = 0.5 * qdot @ gf @ qdot + (float(V(q)) if V is not None else 0.0)
        Y = controls(q)
        return -gain * (e_lf - e_star) * (Y @ gf @ qdot)

    return FeedbackLaw(evaluate=ev, provenance="dissipation-storage")


def force_decomposition(system: ControlledSystem, q, qddot_observed, qdot):
    """Project an observed acceleration onto the control coframe.

    Returns (u, annihilator_residual): u reconstructs the control inputs from
    trajectory data via mu_a = flat_g(Y_a); a nonzero annihilator residual
    flags accelerations that no admissible force can produce.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    qddot_observed = np.asarray(qddot_observed, dtype=float)
    G = system.g(q)
    P = system.g.partials_at(q)
    dV = system.V.gradient_at(q) if system.V is not None else np.zeros_like(q)
    resid_vec = qddot_observed + _geodesic_contraction(G, P, qdot) + np.linalg.solve(G, dV)
    Y = system.controls(q)
    C, Cinv = gram(system, q)
    u = Cinv @ (Y @ G @ resid_vec)
    mu_alpha = annihilator_basis(system, q)
    ann = mu_alpha @ resid_vec if mu_alpha.size else np.zeros(0)
    return u, ann
