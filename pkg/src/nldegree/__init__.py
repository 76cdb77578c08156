"""Sparse time-frequency decomposition and nonlinearity-degree analysis."""

from .decompose import (
    DecompositionConfig,
    DecompositionResult,
    ImfFit,
    PhaseDictionary,
    ShapeFit,
    build_basis,
    decompose,
    extract_imf,
    fit_shape_function,
    init_phase,
)
from .errors import NldegreeError
from .odelab import (
    CompositeSignal,
    NoiseSpec,
    OdeScenario,
    add_noise,
    composite_signal,
    duffing_theta_dot,
    imf_to_ode_coefficients,
    integrate,
    scenario_catalog,
)
from .pipeline import (
    AnalysisConfig,
    AnalysisPoint,
    AnalysisResult,
    CutoffSpec,
    analyze,
    analyze_point,
    eno_analyze,
    localize,
)
from .series import (
    Imf,
    TimeSeries,
    differentiate,
    evaluate_imf,
    inner_product,
    instantaneous_frequency,
    read_csv,
    write_csv,
)
from .sysid import (
    PolynomialPair,
    SparseSolveConfig,
    TestFunctionSet,
    WeakSystem,
    assemble_weak_system,
    build_test_functions,
    degrees_of_nonlinearity,
    refine_support,
    solve_l1_strong,
    solve_l1_weak,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
