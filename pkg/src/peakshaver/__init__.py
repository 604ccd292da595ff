"""Revenue-maximizing EV charging across stations under local and global peak caps."""

from .baseline import PreconditionError, run_greedy_rtl
from .gen import ConfigError, GenConfig, generate_instance, scaled_default, small_instance
from .metrics import (
    MetricsReport,
    compute_metrics,
    verify_bound,
    verify_dual_feasibility,
    verify_primal_feasibility,
)
from .model import (
    ChargingRequest,
    DualCertificate,
    Instance,
    InvalidInstanceError,
    Schedule,
    Station,
    UnboundedRatioError,
    approximation_bound,
    load_instance,
    marginal_value,
    save_instance,
    validate_instance,
)
from .oracle import brute_force_opt, max_flow_feasible, min_peak_among_optimal
from .scheduler import run_scs

__version__ = "0.1.0"
