"""Game-theoretic generation control of microgrids on a DC power network."""

from importlib import resources
from pathlib import Path

from .errors import (
    DimensionMismatch,
    DisconnectedNetwork,
    DuplicateBus,
    GridGameError,
    InfeasibleInitial,
    MaxIterationsExceeded,
    NoConvergentActiveSet,
    ParseError,
    SingularMatrix,
    SingularReducedSystem,
    UnknownBus,
    UnknownTarget,
    ValidationError,
)
from .grid import (
    Branch,
    Bus,
    BusKind,
    Network,
    ReducedSusceptance,
    SensitivityMatrix,
    build_reduced_susceptance,
    build_sensitivity,
    validate_lemma1,
)
from .powerflow import (
    AngleProfile,
    InjectionVector,
    injections_from_state,
    line_flows,
    slack_injection,
    solve_angles,
)
from .game import (
    Equilibrium,
    GameSpec,
    Market,
    PlayerDerived,
    PlayerParams,
    PlayerStatus,
    best_response,
    brute_force_best_response,
    cost,
    derive_player,
    loss_of_efficiency,
    solve_ne_direct,
    solve_team,
)
from .dynamics import (
    ContractionReport,
    Scheme,
    SchemeConfig,
    Trajectory,
    check_conditions,
    contraction_diagnostic,
    measured_aggregate,
    run,
    step_iua,
    step_pda,
    step_rua,
)
from .faults import (
    FaultEvent,
    GeneratorOutage,
    LineTrip,
    MicrogridShutdown,
    ScenarioTimeline,
    apply_fault,
    post_fault_equilibrium,
)
from .cli import load_scenario, scenario_from_dict, scenario_to_dict


def ieee14_scenario_path() -> Path:
    """Filesystem path of the bundled 14-bus scenario."""
    return Path(str(resources.files("gridgame").joinpath("data/ieee14.json")))


__all__ = [name for name in dir() if not name.startswith("_")]
