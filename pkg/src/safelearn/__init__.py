"""Safe learning of dynamical systems via exact conic reformulations.

Decide whether unknown discrete-time dynamics can be learned exactly while
every visited state stays inside a polyhedral safety region, and run the
safe-learning loops: a linear program per query for linear dynamics with a
polytopic prior, a semidefinite program for two-step safety under an
ellipsoidal prior, and a second-order cone program for norm-bounded
nonlinear dynamics.
"""

from . import (cli, conic, geometry, harness, linear_onestep, linear_twostep,
               nonlinear_onestep)
from .conic import ConicProgram, QuadraticForm, Solution, SolveSettings, SolveStatus
from .geometry import (BasisSet, Halfspace, LiftedPolyhedron, Polygon2D,
                       Polyhedron)
from .harness import (AuditReport, ExperimentConfig, RunLog, StepRecord,
                      TrueSystem, audit, load_config, observe, run)
from .linear_onestep import (LearnOutcome, MatrixPolytope, MeasurementSet,
                             build_onestep_lp, cost_lower_bound,
                             disturbance_tighten, learn_offline, learn_online,
                             min_cost_safe_point, offline_cost_bound)
from .linear_twostep import (EllipsoidalMatrixUncertainty, TwoStepData,
                             build_twostep_sdp, consistent_subspace,
                             learn_two_step)
from .nonlinear_onestep import (NonlinearUncertainty, QuadraticVectorModel,
                                SOSCertificate, build_nonlinear_socp,
                                fit_least_squares, fit_sos_constrained, rmse,
                                safe_explore)

__version__ = "0.1.0"
