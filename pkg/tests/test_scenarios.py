import math

import numpy as np
import pytest

from riemctl.errors import ParameterOutOfRange
from riemctl.scenarios import SCENARIO_IDS, build, default_parameters


class TestBuild:
    def test_landing_defaults(self, scenarios):
        sc = scenarios["Landing"]
        np.testing.assert_allclose(sc.default_initial.as_vector(), [0.5, 0.5, 0.5, 1.0])
        assert sc.parameters["G"] == 9.81

    def test_cart_up_defaults(self, scenarios):
        sc = scenarios["PendulumCartUp"]
        assert sc.parameters["kappa"] == 1.2
        assert sc.parameters["k_b"] == 0.1
        assert sc.parameters["r"] == 1.0
        np.testing.assert_allclose(sc.default_initial.as_vector(), [0.25, 0.0, 0.0, 0.03])

    def test_square_defaults(self, scenarios):
        sc = scenarios["Square"]
        np.testing.assert_allclose(sc.default_initial.as_vector(), [0.2, 0.5, 0.5, -0.7])
        assert sc.parameters["kappa"] == 1e4

    def test_unknown_id(self):
        with pytest.raises(ParameterOutOfRange):
            build("NoSuchScenario")

    def test_unknown_parameter(self):
        with pytest.raises(ParameterOutOfRange):
            build("Landing", nonsense=3.0)

    def test_override(self):
        sc = build("Landing", G=1.0)
        assert sc.parameters["G"] == 1.0

    def test_bounce_validity_range(self):
        # with kappa small the initial state sits in the degenerate zone
        with pytest.raises(ParameterOutOfRange):
            build("PoincareBounce", kappa=1.0)

    def test_cart_up_shaped_metric_validity(self):
        # kappa too large makes the shaped metric indefinite
        with pytest.raises(ParameterOutOfRange):
            build("PendulumCartUp", kappa=5.0)

    def test_default_parameters_copy(self):
        p = default_parameters("Landing")
        p["G"] = 0.0
        assert default_parameters("Landing")["G"] == 9.81

    def test_all_initial_states_feasible(self, scenarios):
        for sid in SCENARIO_IDS:
            sc = scenarios[sid]
            assert sc.system.feasible.contains(sc.default_initial.q), sid

    def test_metrics_positive_definite_on_samples(self, scenarios, rng):
        for sid in SCENARIO_IDS:
            sc = scenarios[sid]
            cm = sc.system.completed_target()
            for _ in range(25):
                x = sc.sample_state(rng)
                evals = np.linalg.eigvalsh(cm.metric(x[:2]))
                assert evals[0] > 0, sid


class TestReferenceVsSynthesized:
    """The primary regression oracle: closed forms against synthesis."""

    TOLS = {"Landing": 1e-9, "PoincareBounce": 1e-9, "PoincareStrip": 1e-8,
            "DiskAvoid": 1e-8, "PendulumCartDown": 1e-8, "PendulumCartUp": 1e-9}

    @pytest.mark.parametrize("sid", ["Landing", "PoincareBounce", "PoincareStrip",
                                     "DiskAvoid", "PendulumCartDown", "PendulumCartUp"])
    def test_deviation(self, sid, scenarios, laws, rng):
        sc = scenarios[sid]
        law = laws[sid]
        use_parts = sc.system.shaped is not None and sc.system.feasible.f is not None
        worst = 0.0
        for _ in range(100):
            x = sc.sample_state(rng)
            q, qd = x[:2], x[2:]
            if use_parts:
                u = law.parts(q, qd)["barrier"]
            else:
                u = np.atleast_1d(law.evaluate(q, qd))
            ref = np.atleast_1d(sc.reference_control.evaluate(q, qd))
            worst = max(worst, float(np.max(np.abs(u - ref))))
        assert worst < self.TOLS[sid], worst

    def test_cart_down_restricted_band(self, scenarios, laws, rng):
        # the catalogued rho-form, sampled strictly inside |s| < 0.9
        sc = scenarios["PendulumCartDown"]
        p = sc.parameters
        a, b, g, D = p["alpha"], p["beta"], p["gamma"], p["D"]
        for _ in range(100):
            x = sc.sample_state(rng)
            (phi_, s), (phid, sd) = x[:2], x[2:]
            det = a * g - b * b * math.cos(phi_) ** 2
            rho = a / (det * (1 - s * s))
            u_ref = -(rho / (1 + rho)) * ((b / a) * math.sin(phi_) * (a * phid ** 2 + D * math.cos(phi_))
                                          + (det / a) * (s / (1 - s * s)) * sd ** 2)
            u = laws["PendulumCartDown"].evaluate(x[:2], x[2:])[0]
            assert abs(u - u_ref) < 1e-8


class TestCartUpBound:
    def test_position_bound_constant(self, scenarios):
        # |z| < r forces max |s| <= r + kappa*beta/gamma
        p = scenarios["PendulumCartUp"].parameters
        assert p["r"] + p["kappa"] * p["beta"] / p["gamma"] == pytest.approx(1.6)

    def test_zero_kb_has_no_constraint(self):
        sc = build("PendulumCartUp", k_b=0.0)
        assert sc.system.feasible.f is None
        assert sc.system.feasible.contains(np.array([0.0, 50.0]))
