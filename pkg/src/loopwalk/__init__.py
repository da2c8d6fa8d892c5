"""Simulation and synthesis toolkit for four-mode walks in a looped
two-arm interferometer.

The walker carries a traveling direction (clockwise or counterclockwise
through the loop) and a polarization (H or V); walks on the line, on
rings, and on two rings sharing a node are all driven by programmable
coins built from waveplate and modulator settings or given directly as
four-by-four unitaries.
"""

from .analysis import (
    ErrorBarReport,
    SimilarityReport,
    WalkSetup,
    average_similarity,
    equidistribution_similarity,
    find_revivals,
    monte_carlo_error_bars,
    similarity,
    similarity_report,
)
from .coin_synthesis import (
    OneTripFactors,
    OneTripWitness,
    UniversalFactorization,
    factor_universal,
    one_trip_reconstruct,
    one_trip_test,
    one_trip_test_independent,
    su2_normalize,
    three_step_schedule,
)
from .config import ConfigError, RunConfig, parse_config, parse_config_dict
from .dispersion import (
    Crossing,
    DispersionSpectrum,
    SplitStepBands,
    SplitStepParams,
    Wavefront,
    WavefrontSet,
    band_structure,
    bloch_operator,
    classify_crossings,
    group_velocities,
    shift_bloch,
    split_step_bands,
    wavefront_speeds,
)
from .graph_programs import (
    CircleSpec,
    FigureEightSpec,
    MappedRecord,
    SiteMap,
    circle_map,
    circle_program,
    figure_eight_map,
    figure_eight_program,
    line_program,
    line_program_from_elements,
    map_sites,
)
from .linalg_core import (
    assert_unitary,
    eig_unitary,
    equal_up_to_global_phase,
    is_unitary,
    random_su2,
    random_unitary,
    unitarity_defect,
    wrap_phase,
)
from .optics import (
    ArmSetting,
    OpticalElement,
    arm_operator,
    certified_coin,
    coin_ab,
    coin_ll,
    coin_ll_independent,
    eom_matrix,
    full_coin,
    full_coin_independent,
    hwp_matrix,
    loop_operator,
    qwp_matrix,
)
from .walk_engine import (
    CH,
    CCH,
    CCV,
    CV,
    MODE_NAMES,
    CoinProgram,
    ElementCoin,
    IntensityRecord,
    ProgramError,
    RawCoin,
    constant_program,
    effective_2d_evolve,
    evolve,
    evolve_states,
    final_state,
    make_initial,
    trace_intensities,
)

__version__ = "0.1.0"

__all__ = [
    "ArmSetting",
    "CH",
    "CCH",
    "CCV",
    "CV",
    "CircleSpec",
    "CoinProgram",
    "ConfigError",
    "Crossing",
    "DispersionSpectrum",
    "ElementCoin",
    "ErrorBarReport",
    "FigureEightSpec",
    "IntensityRecord",
    "MODE_NAMES",
    "MappedRecord",
    "OneTripFactors",
    "OpticalElement",
    "ProgramError",
    "RawCoin",
    "RunConfig",
    "SimilarityReport",
    "SiteMap",
    "SplitStepBands",
    "SplitStepParams",
    "OneTripWitness",
    "UniversalFactorization",
    "WalkSetup",
    "Wavefront",
    "WavefrontSet",
    "arm_operator",
    "assert_unitary",
    "average_similarity",
    "band_structure",
    "bloch_operator",
    "certified_coin",
    "circle_map",
    "circle_program",
    "classify_crossings",
    "coin_ab",
    "coin_ll",
    "coin_ll_independent",
    "constant_program",
    "effective_2d_evolve",
    "eig_unitary",
    "eom_matrix",
    "equal_up_to_global_phase",
    "equidistribution_similarity",
    "evolve",
    "evolve_states",
    "factor_universal",
    "figure_eight_map",
    "figure_eight_program",
    "final_state",
    "find_revivals",
    "full_coin",
    "full_coin_independent",
    "group_velocities",
    "hwp_matrix",
    "is_unitary",
    "line_program",
    "line_program_from_elements",
    "loop_operator",
    "make_initial",
    "map_sites",
    "monte_carlo_error_bars",
    "one_trip_reconstruct",
    "one_trip_test",
    "one_trip_test_independent",
    "parse_config",
    "parse_config_dict",
    "qwp_matrix",
    "random_su2",
    "random_unitary",
    "shift_bloch",
    "similarity",
    "similarity_report",
    "split_step_bands",
    "su2_normalize",
    "three_step_schedule",
    "trace_intensities",
    "unitarity_defect",
    "wrap_phase",
]
