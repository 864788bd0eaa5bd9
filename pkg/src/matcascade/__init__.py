"""Matrix multiplicative cascades, the bindweed walk and their classification parameter."""

__version__ = "0.1.0"

from .errors import CapabilityError, CapacityError, CountOverflowError, DomainError  # noqa: E402
from .tree import (Constant, Explicit, Periodic, branching_number, children,  # noqa: E402
                   growth_rates, level_size, min_cutset_value)
from .matenv import (Environment, FiniteSupport, Fixed, IIDEntries, LogNormal,  # noqa: E402
                     PointMass, RateLaw, Rates, Scaled, TwoPoint, Uniform, cascade_matrix,
                     check_conditions, rates_to_matrix, sample_matrix)
from .lyap import (estimate_k, estimate_lambda, lambda_shortcut, operator_norm_l1,  # noqa: E402
                   spectral_radius)
from .cascade import (CascadeFrame, CascadeSeries, expected_psi, mc_mean_psi,  # noqa: E402
                      psi_quadform, root_frame, run_cascade, step_level)
from .bindweed import (EMPTY, State, Trajectory, classify_phase, enabled_transitions,  # noqa: E402
                       exact_stationary_truncated, recurrence_experiment, run_replicas, simulate)
from .chaos import ChaosReport, ParticlePopulation, chaos_diagnose, chaos_iterate  # noqa: E402
