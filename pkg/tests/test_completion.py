import math

import numpy as np
import pytest

from riemctl.completion import (BarrierFunction, CompletedMetric, EscapeGuards,
                                ProbeStatus, Ray, blend_metrics, escape_probe,
                                potential_growth_probe, runaway_completed_rhs,
                                runaway_escape_oracle, runaway_rhs)
from riemctl.errors import NonPositiveCoefficient, OutsideFeasibleRegion
from riemctl.geometry import (MetricField, ScalarField, christoffel,
                              euclidean_metric, metric_inverse)


def poincare_metric():
    return MetricField(
        dim=2,
        eval=lambda q: np.eye(2) / q[1] ** 2,
        partials=lambda q: np.stack([np.zeros((2, 2)), -2.0 * np.eye(2) / q[1] ** 3]),
    )


def half_plane_barrier(f=None):
    return BarrierFunction(phi=ScalarField(eval=lambda q: -q[1]), f=f,
                           rays=(Ray(start=np.array([0.0, 1.0]), stop=np.array([0.0, 0.0])),))


def log_y_field():
    return ScalarField(eval=lambda q: math.log(q[1]),
                       gradient=lambda q: np.array([0.0, 1.0 / q[1]]),
                       hessian=lambda q: np.diag([0.0, -1.0 / q[1] ** 2]))


class TestCompletedComponents:
    def test_constant_barrier_is_identity(self):
        cm = CompletedMetric(base=poincare_metric(),
                             barrier=half_plane_barrier(ScalarField.constant(3.0)))
        q = np.array([0.4, 1.7])
        Gt, Gtinv, gamma = cm.components(q)
        np.testing.assert_allclose(Gt, poincare_metric()(q), atol=1e-14)
        np.testing.assert_allclose(gamma, christoffel(poincare_metric(), q), atol=1e-10)

    def test_landing_values_at_unit_height(self):
        # f = ln y at y=1: f_y = 1, |grad f|^2 = 1, f_yy^cov = -1:
        # g~ = diag(1, 2), g~^yy = 1 - 1/2 = 0.5, corrected Gamma^y_yy = -0.5
        cm = CompletedMetric(base=euclidean_metric(2), barrier=half_plane_barrier(log_y_field()))
        q = np.array([0.0, 1.0])
        Gt, Gtinv, gamma = cm.components(q)
        np.testing.assert_allclose(Gt, np.diag([1.0, 2.0]), atol=1e-14)
        assert Gtinv[1, 1] == pytest.approx(0.5, abs=1e-12)
        assert gamma[1, 1, 1] == pytest.approx(-0.5, abs=1e-12)

    def test_disk_case_unscaled_log(self):
        # f = ln(x^2+y^2-1) at (2, 0): f_x = 4/3, g~_xx = 1 + 16/9, matching the
        # quadratic form of the catalogued obstacle Lagrangian
        def w(q):
            return q[0] ** 2 + q[1] ** 2 - 1.0

        f = ScalarField(eval=lambda q: math.log(w(q)),
                        gradient=lambda q: (2.0 / w(q)) * np.array([q[0], q[1]]))
        barrier = BarrierFunction(phi=ScalarField(eval=lambda q: 1.0 - q[0] ** 2 - q[1] ** 2), f=f)
        cm = CompletedMetric(base=euclidean_metric(2), barrier=barrier)
        q = np.array([2.0, 0.0])
        Gt = cm.metric(q)
        assert f.gradient_at(q)[0] == pytest.approx(4.0 / 3.0)
        assert Gt[0, 0] == pytest.approx(1.0 + 16.0 / 9.0, abs=1e-12)
        # cross-check the full quadratic form against the catalogued Lagrangian:
        # L_extra = (4x^2 xd^2 + 8xy xd yd + 4y^2 yd^2) / (2 w^2)
        qd = np.array([0.7, -1.2])
        x, y = q
        expected = (4 * x * x * qd[0] ** 2 + 8 * x * y * qd[0] * qd[1]
                    + 4 * y * y * qd[1] ** 2) / (2 * w(q) ** 2)
        assert 0.5 * qd @ (Gt - np.eye(2)) @ qd == pytest.approx(expected, rel=1e-12)

    def test_closed_form_inverse_matches_direct(self, rng, scenarios):
        for sid in ("Landing", "DiskAvoid", "PendulumCartDown", "PendulumCartUp"):
            sc = scenarios[sid]
            cm = sc.system.completed_target()
            for _ in range(100):
                x = sc.sample_state(rng)
                q = x[:2]
                Gt, Gtinv, _ = cm.components(q)
                np.testing.assert_allclose(Gt @ Gtinv, np.eye(2), atol=1e-9)
                direct = np.linalg.inv(Gt)
                assert np.max(np.abs(Gtinv - direct)) < 1e-9

    def test_gamma_matches_generic_route(self, rng, scenarios):
        for sid in ("Landing", "DiskAvoid", "PendulumCartUp"):
            sc = scenarios[sid]
            cm = sc.system.completed_target()
            gt_opaque = MetricField(dim=2, eval=cm.metric)  # finite-difference partials
            for _ in range(20):
                x = sc.sample_state(rng)
                q = x[:2]
                _, _, gamma = cm.components(q)
                generic = christoffel(gt_opaque, q)
                assert np.max(np.abs(gamma - generic)) < 1e-6

    def test_outside_region_raises(self):
        cm = CompletedMetric(base=euclidean_metric(2), barrier=half_plane_barrier(log_y_field()))
        with pytest.raises(OutsideFeasibleRegion):
            cm.components(np.array([0.0, -0.5]))


class TestBlend:
    def test_identity_blend(self):
        g0 = poincare_metric()
        g = blend_metrics(g0, euclidean_metric(2), 1.0, 0.0)
        q = np.array([0.1, 0.7])
        np.testing.assert_allclose(g(q), g0(q))

    def test_scaling(self):
        g = blend_metrics(euclidean_metric(2), euclidean_metric(2), 2.0, 0.0)
        np.testing.assert_allclose(g([0, 0]), 2.0 * np.eye(2))

    def test_euclid_plus_poincare(self):
        g = blend_metrics(euclidean_metric(2), poincare_metric(), 1.0, 1.0)
        np.testing.assert_allclose(g([0.0, 1.0]), np.diag([2.0, 2.0]))

    def test_bad_coefficients(self):
        with pytest.raises(NonPositiveCoefficient):
            blend_metrics(euclidean_metric(2), poincare_metric(), 0.0, 1.0)
        with pytest.raises(NonPositiveCoefficient):
            blend_metrics(euclidean_metric(2), poincare_metric(), 1.0, -0.1)

    def test_positive_definite_where_g0_is(self, rng):
        g = blend_metrics(euclidean_metric(2), poincare_metric(), 0.5, 2.0)
        for _ in range(50):
            q = np.array([rng.uniform(-3, 3), rng.uniform(0.05, 5)])
            evals = np.linalg.eigvalsh(g(q))
            assert evals[0] > 0


class TestEscapeProbe:
    def test_runaway_escape_time_vs_quadrature(self):
        oracle = runaway_escape_oracle(1.0)
        verdict = escape_probe(runaway_rhs(1.0), np.array([1.0, 0.0]), horizon=10.0,
                               rtol=1e-10, atol=1e-12)
        assert verdict.status is ProbeStatus.ESCAPED
        assert abs(verdict.time - oracle) / oracle < 0.02

    def test_escape_times_decrease_with_epsilon(self):
        times = []
        for eps in (0.5, 1.0, 2.0):
            v = escape_probe(runaway_rhs(eps), np.array([1.0, 0.0]), horizon=10.0)
            assert v.status is ProbeStatus.ESCAPED
            times.append(v.time)
            oracle = runaway_escape_oracle(eps)
            assert abs(v.time - oracle) / oracle < 0.02
        assert times[0] > times[1] > times[2]

    def test_free_euclidean_geodesic_survives(self):
        def rhs(t, x):
            return np.array([x[2], x[3], 0.0, 0.0])

        v = escape_probe(rhs, np.array([0.0, 0.0, 1.0, 0.5]), horizon=20.0,
                         guards=EscapeGuards(position_bound=np.inf))
        assert v.status is ProbeStatus.SURVIVED_HORIZON

    def test_completed_runaway_survives_long_horizon(self):
        v = escape_probe(runaway_completed_rhs(1.0), np.array([1.0, 0.0]), horizon=100.0)
        assert v.status is ProbeStatus.SURVIVED_HORIZON

    def test_landing_closed_loop_survives(self, scenarios, laws):
        # the landing sinks below any positive margin threshold (y -> 0 is the
        # point of the example), so its scenario disables the margin guard
        from riemctl.dynamics import closed_loop_rhs
        sc = scenarios["Landing"]
        rhs = closed_loop_rhs(sc.system, laws["Landing"])
        v = escape_probe(rhs, sc.default_initial.as_vector(), horizon=20.0,
                         guards=EscapeGuards(boundary_margin=sc.guard_margin),
                         region=sc.system.feasible,
                         rtol=1e-9, atol=1e-13)
        assert v.status is ProbeStatus.SURVIVED_HORIZON

    def test_infeasible_start_raises(self, scenarios):
        from riemctl.dynamics import closed_loop_rhs
        from riemctl.errors import InfeasibleInitialState
        sc = scenarios["Landing"]
        rhs = closed_loop_rhs(sc.system, None)
        with pytest.raises(InfeasibleInitialState):
            escape_probe(rhs, np.array([0.0, -1.0, 0.0, 0.0]), horizon=1.0,
                         region=sc.system.feasible)


class TestGrowthProbe:
    def test_bound_holds_for_positive_potential(self):
        V = ScalarField(eval=lambda q: q[0] ** 2)
        ray = Ray(start=np.zeros(1), stop=np.array([10.0]))
        rep = potential_growth_probe(euclidean_metric(1), V, np.zeros(1), ray)
        assert rep.holds
        assert rep.b == pytest.approx(0.0, abs=1e-6)

    def test_exact_quadratic(self):
        V = ScalarField(eval=lambda q: -q[0] ** 2)
        ray = Ray(start=np.zeros(1), stop=np.array([10.0]))
        rep = potential_growth_probe(euclidean_metric(1), V, np.zeros(1), ray)
        assert rep.holds
        assert rep.a == pytest.approx(0.0, abs=1e-6)
        assert rep.b == pytest.approx(1.0, rel=1e-6)

    def test_quartic_fails(self):
        V = ScalarField(eval=lambda q: -0.5 * q[0] ** 4)
        ray = Ray(start=np.zeros(1), stop=np.array([10.0]))
        rep = potential_growth_probe(euclidean_metric(1), V, np.zeros(1), ray)
        assert not rep.holds


class TestPropernessWitness:
    def test_landing_barrier_is_proper_toward_wall(self, scenarios):
        report = scenarios["Landing"].system.feasible.properness_witness()
        assert report["passed"]

    def test_up_barrier_is_proper(self, scenarios):
        report = scenarios["PendulumCartUp"].system.feasible.properness_witness()
        assert report["passed"]

    def test_arcsin_barrier_is_not_proper(self, scenarios):
        # |arcsin| <= pi/2 on (-1, 1): it saturates instead of diverging, so
        # the growth witness fails; the cart barrier is not actually proper
        report = scenarios["PendulumCartDown"].system.feasible.properness_witness()
        assert not report["passed"]
        assert report["rays"][0]["max_abs_f"] < math.pi / 2 + 1e-9
