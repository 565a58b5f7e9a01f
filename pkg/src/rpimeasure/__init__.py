"""Continuous non-minimally disturbing measurement and the Lindblad dynamics it induces."""

__version__ = "0.1.0"

from .errors import RPIError
from .master import (
    Liouvillian,
    build_liouvillian,
    evolve,
    rhs_double_commutator,
    rhs_lindblad,
    steady_state,
)
from .measurement import (
    MeasurementModel,
    effective_hamiltonian,
    effective_oscillator_frequency,
    hamiltonian_shift,
    lindblad_operator,
    oscillator_model,
)
from .moments import (
    MomentParams,
    MomentState,
    diffusion_negligible_horizon,
    integrate_moments,
    mean_energy,
    moments_from_density,
    steady_moments,
)
from .operators import (
    DensityMatrix,
    OscillatorOps,
    anticommutator,
    coherent_state,
    commutator,
    expectation,
    fock_state,
    make_oscillator_ops,
    thermal_state,
)
from .thermal import (
    Regime,
    ThermalSpec,
    diffusion_coefficient,
    lambda_from_temperature,
    nbar,
    regime_classify,
    temperature_from_lambda,
)
from .trajectories import (
    conditional_step,
    ensemble_average,
    run_trajectory,
    sample_readout,
)
