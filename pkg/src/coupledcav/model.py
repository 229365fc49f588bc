"""Cavity and coupling descriptions reduced to a linear rotating-frame model.

All rates are angular (rad/s).  A model is the generator ``M`` of

    dA/dt = M A - s,     s_j = sqrt(kappa_e_j) * a_in_j

for the slowly varying envelopes ``A_j = a_j exp(i * frame * t)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .errors import (
    CableResonanceError,
    ChainSizeError,
    InconsistentParamsError,
    NonFiniteError,
    VariantMismatchError,
    ZeroCouplingError,
)

TWO_PI = 2.0 * math.pi

# |1 - exp(2i*theta - gamma0L0)| below this is treated as a cable resonance
SINGULARITY_THRESHOLD = 1e-9


def wrap_phase(x: float) -> float:
    """Reduce an angle into [0, 2*pi)."""
    y = math.fmod(x, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    return 0.0 if y >= TWO_PI else y


@dataclass(frozen=True)
class CavityParams:
    """One cavity mode.

    ``gamma`` is the coupling rate into a connecting cable and must be zero
    for directly coupled systems.
    """

    omega: float
    kappa_i: float
    kappa_e: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("omega", "kappa_i", "kappa_e", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise NonFiniteError(f"{name} must be finite", field=name)
        if self.omega <= 0:
            raise InconsistentParamsError("omega must be positive", omega=self.omega)
        for name in ("kappa_i", "kappa_e", "gamma"):
            if getattr(self, name) < 0:
                raise InconsistentParamsError(
                    f"{name} must be non-negative", **{name: getattr(self, name)}
                )

    @property
    def kappa(self) -> float:
        """Total loss rate kappa_i + kappa_e + gamma."""
        return self.kappa_i + self.kappa_e + self.gamma

    @classmethod
    def from_loaded_q(cls, omega, q_loaded, kappa_e_fraction=0.0, gamma_fraction=0.0):
        """Split the total rate ``omega / q_loaded`` into internal, port and cable parts."""
        kappa = omega / q_loaded
        if kappa_e_fraction + gamma_fraction > 1.0:
            raise InconsistentParamsError(
                "port and cable fractions exceed the total rate",
                kappa_e_fraction=kappa_e_fraction,
                gamma_fraction=gamma_fraction,
            )
        kappa_e = kappa_e_fraction * kappa
        gamma = gamma_fraction * kappa
        return cls(omega, max(kappa - kappa_e - gamma, 0.0), kappa_e, gamma)


@dataclass(frozen=True)
class DirectCoupling:
    g: float

    def __post_init__(self):
        if not math.isfinite(self.g) or self.g < 0:
            raise InconsistentParamsError("g must be finite and non-negative", g=self.g)


@dataclass(frozen=True)
class CableCoupling:
    """Single-mode cable: one-way phase ``theta`` and attenuation exponent ``gamma0L0``.

    The one-way field prefactor is ``exp(i*theta - gamma0L0/2)``.
    """

    theta: float
    gamma0L0: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise NonFiniteError("theta must be finite", theta=self.theta)
        if not math.isfinite(self.gamma0L0) or self.gamma0L0 < 0:
            raise InconsistentParamsError(
                "gamma0L0 must be finite and non-negative", gamma0L0=self.gamma0L0
            )

    @property
    def one_way(self) -> complex:
        return cmath.exp(complex(-0.5 * self.gamma0L0, wrap_phase(self.theta)))

    @property
    def round_trip(self) -> complex:
        return cmath.exp(complex(-self.gamma0L0, wrap_phase(2.0 * self.theta)))

    def check_resonance(self):
        denom = 1.0 - self.round_trip
        if abs(denom) < SINGULARITY_THRESHOLD:
            raise CableResonanceError(
                "cable round trip is resonant (theta = m*pi with a lossless cable)",
                theta=self.theta,
                gamma0L0=self.gamma0L0,
            )
        return denom


CouplingSpec = Union[DirectCoupling, CableCoupling]


@dataclass(frozen=True)
class CableFields:
    b1: complex
    b2: complex


@dataclass(frozen=True)
class EffectiveCoupling:
    delta_omega_1: complex
    delta_omega_2: complex
    g_eff: complex
    zeta: float
    kappa_eff_1: float
    kappa_eff_2: float

    @property
    def delta_omega(self):
        return (self.delta_omega_1, self.delta_omega_2)

    @property
    def kappa_eff(self):
        return (self.kappa_eff_1, self.kappa_eff_2)


@dataclass(frozen=True)
class ChainSpec:
    n: int
    g: float
    kappa_i_per_cavity: tuple
    kappa_e_first: float
    kappa_e_last: float
    omega: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ChainSizeError("a chain needs at least two cavities", n=self.n)
        ki = self.kappa_i_per_cavity
        if np.isscalar(ki):
            ki = (float(ki),) * int(self.n)
        ki = tuple(float(k) for k in ki)
        if len(ki) != self.n:
            raise ChainSizeError(
                "kappa_i_per_cavity length does not match n", n=self.n, got=len(ki)
            )
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "kappa_i_per_cavity", ki)
        if self.g < 0 or min(ki) < 0 or self.kappa_e_first < 0 or self.kappa_e_last < 0:
            raise InconsistentParamsError("chain rates must be non-negative")
        if self.omega <= 0:
            raise InconsistentParamsError("omega must be positive", omega=self.omega)

    def with_n(self, n: int) -> "ChainSpec":
        """Same chain with ``n`` cavities; a uniform internal rate is carried over."""
        ki = self.kappa_i_per_cavity
        if len(set(ki)) != 1:
            raise ChainSizeError("cannot resize a chain with non-uniform kappa_i")
        return replace(self, n=n, kappa_i_per_cavity=(ki[0],) * n)

    def cavities(self):
        out = []
        for j, ki in enumerate(self.kappa_i_per_cavity):
            ke = 0.0
            if j == 0:
                ke += self.kappa_e_first
            if j == self.n - 1:
                ke += self.kappa_e_last
            out.append(CavityParams(self.omega, ki, ke))
        return out


def _freeze(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Rotating-frame generator plus per-mode port couplings."""

    matrix: np.ndarray
    input_couplings: np.ndarray
    frame_frequency: float
    mode_frequencies: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InconsistentParamsError("matrix must be square and non-empty")
        if not np.all(np.isfinite(m)):
            raise NonFiniteError("model matrix has non-finite entries")
        n = m.shape[0]
        ic = np.asarray(self.input_couplings, dtype=float)
        wf = np.asarray(self.mode_frequencies, dtype=float)
        if ic.shape != (n,) or wf.shape != (n,):
            raise InconsistentParamsError("per-mode vectors must match the matrix size")
        if np.any(m.diagonal().real > 1e-12 * max(1.0, np.abs(m).max())):
            raise InconsistentParamsError("diagonal gain is not allowed")
        labels = tuple(self.labels) or tuple(f"cavity{j + 1}" for j in range(n))
        object.__setattr__(self, "matrix", _freeze(m))
        object.__setattr__(self, "input_couplings", _freeze(ic))
        object.__setattr__(self, "mode_frequencies", _freeze(wf))
        object.__setattr__(self, "frame_frequency", float(self.frame_frequency))
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def with_frame(self, frame: float) -> "LinearModel":
        """Re-express the generator in a frame rotating at ``frame``."""
        shift = frame - self.frame_frequency
        m = self.matrix + 1j * shift * np.eye(self.dim)
        return replace(self, matrix=m, frame_frequency=frame)


def _default_frame(frame, c1):
    return c1.omega if frame is None else float(frame)


def build_single_model(c: CavityParams, frame: float | None = None) -> LinearModel:
    frame = _default_frame(frame, c)
    m = [[-1j * (c.omega - frame) - 0.5 * c.kappa]]
    return LinearModel(m, [math.sqrt(c.kappa_e)], frame, [c.omega])


def build_direct_model(
    c1: CavityParams,
    c2: CavityParams,
    coupling: DirectCoupling,
    frame: float | None = None,
) -> LinearModel:
    """Two cavities exchanging energy at rate ``coupling.g`` through mode overlap."""
    if not isinstance(coupling, DirectCoupling):
        raise VariantMismatchError(
            "build_direct_model needs a DirectCoupling", got=type(coupling).__name__
        )
    if c1.gamma != 0 or c2.gamma != 0:
        raise InconsistentParamsError(
            "directly coupled cavities must have gamma = 0", gamma1=c1.gamma, gamma2=c2.gamma
        )
    frame = _default_frame(frame, c1)
    g = coupling.g
    m = np.array(
        [
            [-1j * (c1.omega - frame) - 0.5 * c1.kappa, -1j * g],
            [-1j * g, -1j * (c2.omega - frame) - 0.5 * c2.kappa],
        ]
    )
    return LinearModel(
        m, [math.sqrt(c1.kappa_e), math.sqrt(c2.kappa_e)], frame, [c1.omega, c2.omega]
    )


def _require_cable(coupling):
    if not isinstance(coupling, CableCoupling):
        raise VariantMismatchError("a CableCoupling is required", got=type(coupling).__name__)


def eliminate_cable(
    a1: complex,
    a2: complex,
    coupling: CableCoupling,
    gamma1: float,
    gamma2: float,
) -> CableFields:
    """Solve the two junction equations for the cable end fields b1, b2.

    The pair ``b1 = r b2 + sqrt(gamma1) a1``, ``b2 = r b1 + sqrt(gamma2) a2``
    with ``r`` the one-way prefactor is solved as a 2x2 linear system.
    """
    _require_cable(coupling)
    coupling.check_resonance()
    r = coupling.one_way
    lhs = np.array([[1.0, -r], [-r, 1.0]], dtype=complex)
    rhs = np.array([math.sqrt(gamma1) * a1, math.sqrt(gamma2) * a2], dtype=complex)
    b1, b2 = np.linalg.solve(lhs, rhs)
    return CableFields(complex(b1), complex(b2))


def effective_coupling(
    c1: CavityParams, c2: CavityParams, coupling: CableCoupling
) -> EffectiveCoupling:
    """Complex frequency shifts, effective coupling and tunneling phase of a cable."""
    _require_cable(coupling)
    if c1.gamma <= 0 or c2.gamma <= 0:
        raise ZeroCouplingError(
            "both cavities need a positive cable coupling rate", gamma1=c1.gamma, gamma2=c2.gamma
        )
    denom = coupling.check_resonance()
    r = coupling.one_way
    r2 = coupling.round_trip
    dw1 = -1j * c1.gamma * r2 / denom
    dw2 = -1j * c2.gamma * r2 / denom
    g_eff = -1j * math.sqrt(c1.gamma * c2.gamma) * r / denom
    zeta = wrap_phase(1.5 * math.pi + cmath.phase(g_eff))
    return EffectiveCoupling(
        delta_omega_1=complex(dw1),
        delta_omega_2=complex(dw2),
        g_eff=complex(g_eff),
        zeta=zeta,
        kappa_eff_1=c1.kappa - 2.0 * dw1.imag,
        kappa_eff_2=c2.kappa - 2.0 * dw2.imag,
    )


def build_cable_model(
    c1: CavityParams,
    c2: CavityParams,
    coupling: CableCoupling,
    frame: float | None = None,
) -> LinearModel:
    """Reduced two-mode model with the cable fields eliminated.

    The complex shifts sit on the diagonal, so their imaginary parts change
    the decay exactly as the effective loss rates say.
    """
    eff = effective_coupling(c1, c2, coupling)
    frame = _default_frame(frame, c1)
    m = np.array(
        [
            [-1j * (c1.omega - frame + eff.delta_omega_1) - 0.5 * c1.kappa, -1j * eff.g_eff],
            [-1j * eff.g_eff, -1j * (c2.omega - frame + eff.delta_omega_2) - 0.5 * c2.kappa],
        ]
    )
    return LinearModel(
        m, [math.sqrt(c1.kappa_e), math.sqrt(c2.kappa_e)], frame, [c1.omega, c2.omega]
    )


def build_chain_model(spec: ChainSpec, frame: float | None = None) -> LinearModel:
    """Nearest-neighbour chain with ports on the first and last cavity."""
    cavs = spec.cavities()
    frame = spec.omega if frame is None else float(frame)
    n = spec.n
    m = np.zeros((n, n), dtype=complex)
    for j, c in enumerate(cavs):
        m[j, j] = -1j * (c.omega - frame) - 0.5 * c.kappa
    idx = np.arange(n - 1)
    m[idx, idx + 1] = -1j * spec.g
    m[idx + 1, idx] = -1j * spec.g
    return LinearModel(
        m, [math.sqrt(c.kappa_e) for c in cavs], frame, [c.omega for c in cavs]
    )


def build_model(
    cavities: Sequence[CavityParams],
    coupling: CouplingSpec | None = None,
    frame: float | None = None,
) -> LinearModel:
    """Dispatch on the coupling type."""
    if len(cavities) == 1:
        if coupling is not None:
            raise InconsistentParamsError("a single cavity takes no coupling")
        return build_single_model(cavities[0], frame)
    if len(cavities) != 2:
        raise InconsistentParamsError("pairwise models take exactly two cavities")
    if isinstance(coupling, CableCoupling):
        return build_cable_model(cavities[0], cavities[1], coupling, frame)
    if coupling is None:
        coupling = DirectCoupling(0.0)
    return build_direct_model(cavities[0], cavities[1], coupling, frame)
