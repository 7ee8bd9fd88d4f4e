"""Entanglement-swapping simulator for quantum-dot cascade photon sources.

Modules:
    quantum     density operators, Bell states, fidelity, concurrence
    source      cascade pair states and coherence factors
    swap        partial BSM, heralded state, analytic/numeric fidelity
    tomography  settings, count simulation, MLE reconstruction, errors
    timetags    detector stream synthesis, histograms, rate budget
    config      parameter files and seed derivation
    cli         the `swapsim` command-line tool
"""

from .quantum import (
    BellKind,
    DensityOperator,
    Projector,
    bell_state,
    concurrence,
    fidelity,
    is_physical,
    maximally_mixed,
    project,
    tensor,
    werner_state,
)
from .source import (
    HBAR_UEV_NS,
    CoherenceFactors,
    SourceParams,
    cascade_state_at,
    coherence_factors,
    pair_state,
    source_fidelity,
)
from .swap import (
    BsmModel,
    ContourGrid,
    IdealizationReport,
    SwapResult,
    bsm_operator,
    fidelity_contour,
    idealization_report,
    swap_fidelity_analytic,
    swap_fidelity_numeric,
    swapped_state,
)
from .tomography import (
    CountRecord,
    CountTable,
    MeasurementSetting,
    ReconstructionResult,
    enumerate_settings,
    linear_reconstruct,
    mle_reconstruct,
    monte_carlo_errors,
    simulate_counts,
)
from .timetags import (
    CorrelationHistogram,
    ExperimentConfig,
    RateBudget,
    TimeTagStream,
    build_g3,
    correlation_visibility,
    extract_tomography_counts,
    find_bsm_coincidences,
    fourfold_rate,
    reduce_g2,
    synthesize_timetags,
)

__version__ = "0.1.0"
