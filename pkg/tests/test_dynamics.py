import math

import numpy as np
import pytest

from riemctl.completion import BarrierFunction
from riemctl.control import ControlledSystem
from riemctl.dynamics import (IntegratorConfig, MechState, closed_loop_rhs,
                              covariant_rhs, energies, forced_rhs, integrate,
                              integrate_raw, integrate_rk4)
from riemctl.geometry import (MetricField, ScalarField, VectorFieldSet,
                              euclidean_metric)


def poincare_metric():
    return MetricField(
        dim=2,
        eval=lambda q: np.eye(2) / q[1] ** 2,
        partials=lambda q: np.stack([np.zeros((2, 2)), -2.0 * np.eye(2) / q[1] ** 3]),
    )


def free_system(metric, region_phi=lambda q: -1.0):
    Y = VectorFieldSet(count=2, dim=2, eval=lambda q: np.eye(2))
    return ControlledSystem(g=metric, V=None, controls=Y,
                            feasible=BarrierFunction(phi=ScalarField(eval=region_phi)))


class TestForcedRhs:
    def test_flat_free_is_straight(self):
        sys_ = free_system(euclidean_metric(2))
        qdot, acc = forced_rhs(sys_, None, MechState(np.array([1.0, 2.0]), np.array([0.3, -0.4])))
        np.testing.assert_allclose(acc, 0.0, atol=1e-14)

    def test_poincare_geodesic_values(self):
        # at ((0,1),(1,0)): xdd = -2 Gamma^x_xy xd yd = 0, ydd = -Gamma^y_xx xd^2 = -1
        sys_ = free_system(poincare_metric(), region_phi=lambda q: -q[1])
        _, acc = forced_rhs(sys_, None, MechState(np.array([0.0, 1.0]), np.array([1.0, 0.0])))
        np.testing.assert_allclose(acc, [0.0, -1.0], atol=1e-12)

    def test_landing_accel_value(self, scenarios, laws):
        # with G = 1 at (y, yd) = (1, 0): u = 1/2, ydd = u - G = -1/2
        from riemctl.scenarios import build
        sc = build("Landing", G=1.0)
        law = sc.synthesized_control()
        _, acc = forced_rhs(sc.system, law, MechState(np.array([0.0, 1.0]), np.array([0.0, 0.0])))
        assert acc[1] == pytest.approx(-0.5, abs=1e-12)


class TestCovariantRhs:
    def test_reduces_to_free_dynamics(self, rng):
        g = poincare_metric()
        V = ScalarField(eval=lambda q: 0.5 * q[0] ** 2,
                        gradient=lambda q: np.array([q[0], 0.0]))
        sys_ = free_system(g, region_phi=lambda q: -q[1])
        sys_v = ControlledSystem(g=g, V=V, controls=sys_.controls, feasible=sys_.feasible)
        for _ in range(10):
            q = np.array([rng.uniform(-1, 1), rng.uniform(0.5, 2)])
            qd = rng.uniform(-1, 1, 2)
            _, acc_direct = forced_rhs(sys_v, None, MechState(q, qd))
            _, acc_cov = covariant_rhs(g, V, MechState(q, qd))
            np.testing.assert_allclose(acc_cov, acc_direct, atol=1e-9)

    def test_landing_completed_both_paths(self):
        # L = (xd^2 + (1 + y^-2) yd^2)/2 - G y at (y, yd) = (1, 1)
        G0 = 9.81

        def ev(q):
            return np.diag([1.0, 1.0 + 1.0 / q[1] ** 2])

        def partials(q):
            P = np.zeros((2, 2, 2))
            P[1, 1, 1] = -2.0 / q[1] ** 3
            return P

        gt = MetricField(dim=2, eval=ev, partials=partials)
        V = ScalarField(eval=lambda q: G0 * q[1], gradient=lambda q: np.array([0.0, G0]))
        q = np.array([0.2, 1.0])
        qd = np.array([0.5, 1.0])
        _, acc_cov = covariant_rhs(gt, V, MechState(q, qd))
        from riemctl.geometry import christoffel_contraction, metric_inverse
        acc_direct = -christoffel_contraction(gt, q, qd) - metric_inverse(gt, q) @ V.gradient_at(q)
        np.testing.assert_allclose(acc_cov, acc_direct, atol=1e-10)

    def test_constant_coefficients(self):
        A = np.array([[2.0, 0.3], [0.3, 1.0]])
        gt = MetricField(dim=2, eval=lambda q: A, partials=lambda q: np.zeros((2, 2, 2)))
        V = ScalarField(eval=lambda q: q[0] + 2.0 * q[1],
                        gradient=lambda q: np.array([1.0, 2.0]))
        _, acc = covariant_rhs(gt, V, MechState(np.array([0.4, -0.2]), np.array([1.0, 1.0])))
        np.testing.assert_allclose(acc, -np.linalg.solve(A, [1.0, 2.0]), atol=1e-9)

    def test_singular_hessian_raises(self):
        from riemctl.errors import SingularHessian
        gt = MetricField(dim=2, eval=lambda q: np.diag([1.0, 0.0]))
        with pytest.raises(SingularHessian):
            covariant_rhs(gt, None, MechState(np.zeros(2), np.ones(2)))


class TestIntegrate:
    def test_equilibrium_stays_put(self):
        V = ScalarField(eval=lambda q: 0.5 * (q[0] ** 2 + q[1] ** 2),
                        gradient=lambda q: q.copy())
        sys_ = ControlledSystem(g=euclidean_metric(2), V=V,
                                controls=VectorFieldSet(count=2, dim=2, eval=lambda q: np.eye(2)),
                                feasible=BarrierFunction(phi=ScalarField(eval=lambda q: -1.0)))
        traj = integrate(sys_, None, MechState(np.zeros(2), np.zeros(2)),
                         IntegratorConfig(), horizon=5.0)
        assert traj.status == "horizon"
        assert np.max(np.abs(traj.q)) < 1e-12
        assert np.max(np.abs(traj.qdot)) < 1e-12

    def test_infeasible_start(self, scenarios):
        from riemctl.errors import InfeasibleInitialState
        sc = scenarios["Landing"]
        with pytest.raises(InfeasibleInitialState):
            integrate(sc.system, None, MechState(np.array([0.0, -1.0]), np.zeros(2)),
                      IntegratorConfig(), horizon=1.0)

    def test_event_bracketing(self):
        # xdot = 1 crossing x = 1 at t = 1 exactly
        def rhs(t, x):
            return np.array([1.0, 0.0])

        res = integrate_raw(rhs, 0.0, np.array([0.0, 0.0]), 5.0, IntegratorConfig(),
                            event=lambda t, x: 1.0 - x[0])
        assert res.status == "event"
        assert res.event_time == pytest.approx(1.0, abs=1e-9)

    def test_raw_determinism(self, scenarios, laws):
        sc = scenarios["DiskAvoid"]
        rhs = closed_loop_rhs(sc.system, laws["DiskAvoid"])
        cfg = IntegratorConfig(rtol=1e-8)
        r1 = integrate_raw(rhs, 0.0, sc.default_initial.as_vector(), 5.0, cfg)
        r2 = integrate_raw(rhs, 0.0, sc.default_initial.as_vector(), 5.0, cfg)
        assert np.array_equal(r1.xs, r2.xs) and np.array_equal(r1.ts, r2.ts)

    def test_trajectory_time_strictly_increasing(self, scenarios, laws):
        sc = scenarios["PoincareBounce"]
        traj = integrate(sc.system, laws["PoincareBounce"], sc.default_initial,
                         IntegratorConfig(rtol=1e-8), horizon=10.0)
        assert np.all(np.diff(traj.t) > 0)
        assert np.all(np.isfinite(traj.q)) and np.all(np.isfinite(traj.u))


class TestRK4:
    def test_matches_adaptive_on_smooth_problem(self):
        def rhs(t, x):
            return np.array([x[1], -x[0]])

        res4 = integrate_rk4(rhs, 0.0, np.array([1.0, 0.0]), 6.0, 1e-3)
        ref = integrate_raw(rhs, 0.0, np.array([1.0, 0.0]), 6.0,
                            IntegratorConfig(rtol=1e-12, atol=1e-14))
        assert np.max(np.abs(res4.xs[-1] - ref.xs[-1])) < 1e-9

    def test_convergence_order_on_landing(self, scenarios, laws):
        sc = scenarios["Landing"]
        rhs = closed_loop_rhs(sc.system, laws["Landing"])
        x0 = sc.default_initial.as_vector()
        T = 3.0
        ref = integrate_raw(rhs, 0.0, x0, T, IntegratorConfig(rtol=1e-13, atol=1e-15))
        errs = []
        steps = [0.02, 0.01, 0.005, 0.0025]
        for h in steps:
            res = integrate_rk4(rhs, 0.0, x0, T, h)
            errs.append(np.max(np.abs(res.xs[-1] - ref.xs[-1])))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        for p in orders:
            assert 3.7 <= p <= 4.3, orders


class TestEnergies:
    def test_rest_state(self, scenarios):
        sc = scenarios["Landing"]
        e, e_lf = energies(sc.system, sc.system.completed_target(),
                           MechState(np.array([0.0, 1.0]), np.zeros(2)))
        assert e == pytest.approx(9.81)
        assert e_lf == pytest.approx(9.81)

    def test_landing_values(self):
        # at (y, yd) = (1, 1) with G = 1: E = 1/2 + 1, E_Lf = (1/2)*2 + 1
        from riemctl.scenarios import build
        sc = build("Landing", G=1.0)
        e, e_lf = energies(sc.system, sc.system.completed_target(),
                           MechState(np.array([0.0, 1.0]), np.array([0.0, 1.0])))
        assert e == pytest.approx(1.5, abs=1e-12)
        assert e_lf == pytest.approx(2.0, abs=1e-12)

    def test_completed_dominates(self, rng, scenarios):
        sc = scenarios["DiskAvoid"]
        cm = sc.system.completed_target()
        for _ in range(25):
            x = sc.sample_state(rng)
            st = MechState(x[:2], x[2:])
            e, e_lf = energies(sc.system, cm, st)
            assert e_lf >= e - 1e-12
