"""riemctl: barrier-enforcing feedback control via complete Riemannian metrics.

A toolkit that completes an incomplete metric with a proper barrier function
(g -> g + df (x) df), synthesizes the feedback realizing the completed free
dynamics on the original actuated system, simulates the closed loop, and
certifies local stability.
"""

from .completion import (BarrierFunction, CompletedMetric, EscapeGuards,
                         ProbeStatus, ProbeVerdict, Ray, blend_metrics,
                         escape_probe, potential_growth_probe)
from .control import (ControlledSystem, FeedbackLaw, barrier_control,
                      constrained_cl_control, dissipation_simple,
                      dissipation_storage, force_decomposition, gram,
                      matching_residual, span_residual)
from .analysis import (StabilityReport, characteristic_and_routh,
                       find_equilibrium, linearize)
from .dynamics import (IntegratorConfig, MechState, Trajectory, covariant_rhs,
                       energies, forced_rhs, integrate)
from .geometry import (MetricField, ScalarField, VectorFieldSet, christoffel,
                       covariant_hessian, euclidean_metric, flat, grad_metric,
                       metric_inverse, sharp)
from .scenarios import SCENARIO_IDS, Scenario, build

__version__ = "0.1.0"
