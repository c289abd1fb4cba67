"""First-passage times of continuous-time Markov chains: when they are
exponential, quasi-stationary laws, block lumping and Monte Carlo checks."""

__version__ = "0.1.0"

from .chain import (Generator, KilledGenerator, as_distribution, build_killed,
                    check_diff_condition, survival, survival_curve, time_grid, transient)
from .errors import CensoringError, ConvergenceError, FptError, ValidationError
from .exponentiality import (ExponentialityReport, LadderResult, alpha_of, check_exponentiality,
                             decay_rate, is_qsd, mu_ladder, quasi_stationary, yaglom_correction)
from .lumping import (LumpedGenerator, Partition, emergence_closed_form, lift_lumped_law,
                      solve_lumped_qsd, validate_partition)
from .simulation import (Envelope, SampleSet, envelope, simulate_direct, simulate_two_clock,
                         test_exponential)
from .branching import (BirthDeathSpec, TwoTypeSpec, bd_extinction_prob, bd_mu_alpha_coeffs,
                        bd_mu_alpha_gf, bd_q_inverse, bd_truncated_generator,
                        multitype_mu_alpha_gf)
