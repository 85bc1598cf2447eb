"""Downlink power control in multi-layer cellular networks.

System-level simulator and solver library: hexagonal macro layout with
wrap-around, Manhattan-grid microcell overlay, 3GPP-style urban link
budgets, and the closed-form / iterative / LP power-allocation solvers,
plus a Monte Carlo harness comparing single-layer and two-layer totals.
"""

__version__ = "0.1.0"

from .config import LayoutParams, OverlayParams, ScenarioConfig, load_config
from .errors import (
    ConfigurationError,
    DivergenceError,
    HetPowerError,
    InfeasibleError,
    NumericalError,
    PlacementError,
    ServingLinkError,
    SolutionValidityError,
)
from .gain_matrix import (
    LayeredGains,
    NormalizedSystem,
    build_multi_layer,
    build_single_layer,
    build_two_layer,
    microcell_association_mask,
    system_from_text,
)
from .geometry import (
    HexLayout,
    ManhattanOverlay,
    UserDrop,
    WrapAroundMap,
    build_hex_layout,
    build_manhattan_overlay,
    build_wrap_map,
    drop_users,
    wrapped_distance,
)
from .harness import (
    CampaignSummary,
    DropResult,
    Scene,
    build_scene,
    discard_users,
    run_campaign,
    run_drop,
    run_learning_phase,
)
from .propagation import (
    LinkGain,
    PropagationParams,
    link_gain,
    macro_path_loss_dB,
    macro_path_loss_general_dB,
    micro_path_loss_dB,
    micro_path_loss_general_dB,
    sector_antenna_gain_dB,
)
from .solvers import (
    FeasibilityReport,
    PowerAllocation,
    iterate_distributed,
    select_solver,
    solve_lp,
    solve_lp_system,
    solve_multi_layer,
    solve_single_layer,
    solve_two_layer,
    spectral_radius,
)
