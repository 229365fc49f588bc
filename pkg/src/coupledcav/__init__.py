"""Phase-controlled interference and photon lifetime in coupled cavities."""

from .analysis import (
    ChainScaling,
    InterferenceVerdict,
    LifetimeResult,
    SweepAxis,
    SweepResult,
    SweepSpec,
    Verdict,
    chain_lifetime_scaling,
    classify_interference,
    photon_lifetime,
    q_from_decay,
    sweep_lifetime,
)
from .dynamics import (
    DecayTrace,
    DriveSpec,
    InitialState,
    ModeSpectrum,
    Trajectory,
    decay_protocol,
    eigenmodes,
    evolve_driven,
    evolve_free,
    steady_state,
)
from .errors import CavityError
from .lindblad import FockConfig, lindblad_evolve, lindblad_lifetime_sweep
from .model import (
    CableCoupling,
    CableFields,
    CavityParams,
    ChainSpec,
    DirectCoupling,
    EffectiveCoupling,
    LinearModel,
    build_cable_model,
    build_chain_model,
    build_direct_model,
    effective_coupling,
    eliminate_cable,
)

__version__ = "0.1.0"

__all__ = [
    "build_cable_model",
    "build_chain_model",
    "build_direct_model",
    "CableCoupling",
    "CableFields",
    "CavityError",
    "CavityParams",
    "chain_lifetime_scaling",
    "ChainScaling",
    "ChainSpec",
    "classify_interference",
    "decay_protocol",
    "DecayTrace",
    "DirectCoupling",
    "DriveSpec",
    "effective_coupling",
    "EffectiveCoupling",
    "eigenmodes",
    "eliminate_cable",
    "evolve_driven",
    "evolve_free",
    "FockConfig",
    "InitialState",
    "InterferenceVerdict",
    "LifetimeResult",
    "lindblad_evolve",
    "lindblad_lifetime_sweep",
    "LinearModel",
    "ModeSpectrum",
    "photon_lifetime",
    "q_from_decay",
    "steady_state",
    "sweep_lifetime",
    "SweepAxis",
    "SweepResult",
    "SweepSpec",
    "Trajectory",
    "Verdict",
]
