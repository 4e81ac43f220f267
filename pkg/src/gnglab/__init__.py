"""gnglab: a laboratory for one-dimensional large-deviation rate functions
evolving under Hamiltonian characteristic flow.

The package evolves an initial rate function by pushing the graph of its
derivative along the Hamilton equations, detects loss and recovery of
differentiability through overhangs of the pushed graph, and cross-checks
the evolved function against dynamic-programming and monotone
finite-difference reconstructions.
"""

from .analysis import (
    HeatingThresholdReport,
    LinearizationData,
    Loop,
    OrderPreservationReport,
    RecoveryConstants,
    ScenarioTimeline,
    heating_threshold_report,
    linearization_data,
    linearization_threshold,
    loop_period,
    order_preservation_certificate,
    overhang_onset,
    recovery_constants,
    recovery_scan,
    rotating_loop,
    slope_sign_at,
)
from .errors import (
    BracketError,
    ConfigError,
    CoverageError,
    DomainError,
    EscapeError,
    GnglabError,
    InapplicableError,
    IntegrationFailureError,
    NonRotatingError,
    UnboundedVelocityError,
)
from .flow import (
    Alive,
    Corner,
    Escaped,
    ExtendedPoint,
    FlowResult,
    IntegratorConfig,
    PhasePoint,
    escape_time,
    extended_flow,
    integrate,
)
from .models import (
    CurieWeiss,
    CWEntropy,
    Diffusion,
    HamiltonianDerivatives,
    LagrangianValue,
    ModelSpec,
    PolynomialRate,
    RateFunctionSpec,
    RateValue,
    TabulatedRate,
    derivatives,
    hamiltonian,
    lagrangian,
    rate0,
    stationary_points,
)
from .pushforward import (
    Branch,
    GraphSample,
    OverhangReport,
    PushForward,
    TrajectoryPool,
    detect_overhangs,
    push_graph,
    push_graph_adaptive,
    sample_initial_graph,
)
from .rate_evolution import (
    NonDiffPoint,
    RateProfile,
    classify_differentiability,
    envelope,
    hj_fd_solve,
    hopf_lax_dp,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
