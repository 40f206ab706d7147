"""Flux-noise spectroscopy with CPMG filter functions, and dielectric loss budgets."""

__version__ = "0.1.0"

from .dephasing import (
    CPMGTrace,
    CPMGTraceFitter,
    MonteCarloResult,
    TraceFit,
    coherence_exponent,
    coherence_exponents,
    cpmg_grid,
    decay_model,
    fit_trace,
    monte_carlo_coherence,
    simulate_signal,
)
from .errors import (
    DegeneracyError,
    DegenerateRegimeError,
    DomainError,
    EmptyEstimateError,
    ExtrapolationError,
    FitError,
    NumericalError,
    QubitNoiseError,
    ResourceError,
    SchemaError,
    UnidentifiableError,
)
from .filters import (
    CPMGSequence,
    RectFilter,
    dimensionless_filter,
    filter_function,
    filter_table,
    rectangular_approximation,
    switching_function,
)
from .loss import (
    LossFit,
    LossModel,
    LossTangentRegressor,
    ParticipationRow,
    ParticipationTable,
    ResonantChannel,
    fit_loss_tangents,
    guide_curves,
    t1_limit,
    t1_vs_frequency,
)
from .noise import (
    NoiseTrajectory,
    PowerLawPSD,
    PSDEstimate,
    periodogram,
    psd_eval,
    synthesize_ensemble,
    synthesize_trajectory,
)
from .spectroscopy import (
    FluxNoiseSpectrometer,
    PowerLawFit,
    PowerLawRegressor,
    extract_psd,
    fit_power_law,
    frequency_noise,
    invert_point,
)
from .transduction import FluxTuningCurve, TransmonModel, flux_sensitivity, qubit_freq
