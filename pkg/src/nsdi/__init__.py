"""Upper bounds on device-independent secret key rates against non-signaling
adversaries: devices, the (2,2,2,2) polytope, minimal ensembles, the
squashed non-locality bound and the supporting numerics."""
from .devices import (Device, HrwParams, make_anti_pr, make_hrw, make_isotropic, make_local_vertex,
                      make_nonlocal_vertex, make_pr, validate)
from .ensembles import (BudgetExceeded, CompleteExtension, Ensemble, MinimalEnsemble,
                        build_complete_extension, enumerate_minimal_ensembles, is_minimal)
from .lp import LinearProgram, convex_combination_on_support, solve
from .norms import CcdState, brute_force_distinguisher, ns_norm_ccd, security_report
from .numerics import Channel, JointDistribution, intrinsic_information_upper
from .polytope import is_local, nonlocality_cost, nonlocality_fraction, vertices
from .squash import (BoundOptions, compute_curve, lower_convex_hull, nsq_upper,
                     squashed_cmi_over_ce, squashed_mutual_information)

__version__ = "0.1.0"
