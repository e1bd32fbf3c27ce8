"""pulselink: shaped single-photon links between atom-cavity nodes.

Derive Rabi drives that emit photons with arbitrary target shapes, simulate
shaped-photon absorption with controllable probability, and run a time-bin
secure data-transfer protocol with eavesdropping checks over many channels.
"""

from .alphabet import (
    ConstraintReport,
    PulseAlphabet,
    build_alphabet,
    validate_alphabet,
)
from .control import (
    ControlEnvelope,
    EmissionScore,
    InversionReport,
    RefineOptions,
    catch_control,
    emission_fidelity,
    emission_report,
    invert_emission,
    refine_control,
)
from .dynamics import (
    AmplitudeState,
    AmplitudeTrajectory,
    CavityParams,
    adiabaticity_diagnostics,
    dark_state_absorption,
    dark_state_emission,
    evolve_absorption,
    evolve_emission,
    flux_balance,
    kernel_J,
    kernel_profile,
    simulation_grid,
)
from .errors import (
    AlphabetConstraintError,
    ConfigError,
    GridError,
    InversionError,
    PulseError,
    PulselinkError,
    StabilityError,
)
from .protocol import (
    CheckReport,
    EveStrategy,
    PhysicsCache,
    ProtocolConfig,
    SecurityThresholds,
    SessionResult,
    Transcript,
    decide_security,
    encode_bit,
    eve_apply,
    measure_atom,
    run_session,
    transmit_probabilities,
)
from .pulses import (
    SampledPulse,
    TimeGrid,
    gaussian_bin,
    gaussian_target,
    hermite_bin,
    make_grid,
    overlap,
    random_smooth_pulse,
    read_pulse_csv,
    three_gaussian_target,
    write_pulse_csv,
)

__version__ = "0.1.0"
