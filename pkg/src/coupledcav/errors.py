"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI echoes in
its JSON error line.
"""


class CavityError(ValueError):
    code = "cavity_error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class VariantMismatchError(CavityError):
    code = "variant_mismatch"


class InconsistentParamsError(CavityError):
    code = "inconsistent_params"


class CableResonanceError(CavityError):
    code = "cable_resonance_singularity"


class ZeroCouplingError(CavityError):
    code = "zero_coupling"


class ChainSizeError(CavityError):
    code = "chain_size"


class GridError(CavityError):
    code = "bad_time_grid"


class NonFiniteError(CavityError):
    code = "non_finite"


class UndriveablePortError(CavityError):
    code = "undriveable_port"


class NoSteadyStateError(CavityError):
    code = "no_steady_state"


class UndefinedLifetimeError(CavityError):
    code = "undefined_lifetime"


class FitWindowError(CavityError):
    code = "bad_fit_window"


class TruncationError(CavityError):
    code = "dimension_too_small"


class ConfigError(CavityError):
    code = "config_error"
