"""Multi-scale 1-D traffic simulator: a macroscopic conservation-law solver
coupled with locally activated microscopic follow-the-leader dynamics."""

from .core import Grid1D, ScalingParams, SimState, Vehicle, cell_index, total_mass
from .coupling import (
    ActivationParams,
    Event,
    MultiscaleParams,
    complete_info_step,
    multiscale_step,
)
from .errors import (
    CflError,
    ConfigError,
    ConsistencyError,
    DegenerateGapError,
    DomainError,
    NumericalError,
    OutOfDomainError,
    TrafficError,
)
from .macro import VelocityLaw, godunov_flux, lwr_step
from .micro import ArzMicroParams, RingRoad, ZzParams, ring_init, run_ring
from .scenarios import (
    PRESETS,
    RunLog,
    ScenarioConfig,
    benchmark_cpu,
    build_scenario,
    fundamental_diagram,
    load_config,
    run,
    run_scenario,
)

__version__ = "0.1.0"
