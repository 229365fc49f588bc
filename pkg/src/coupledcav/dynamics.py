"""Time evolution, steady states and the drive-then-decay protocol."""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import (
    GridError,
    InconsistentParamsError,
    NoSteadyStateError,
    NonFiniteError,
    UndriveablePortError,
)
from .model import LinearModel, wrap_phase

RK_RTOL = 1e-10
RK_ATOL = 1e-12
COND_WARN = 1e12


@dataclass(frozen=True)
class DriveSpec:
    port: int
    amplitude: complex
    frequency: float

    def detunings(self, model: LinearModel) -> np.ndarray:
        """Drive frequency minus each mode's shifted resonance.

        The shifted resonance is read off the generator diagonal, so cable
        frequency shifts are included.
        """
        return self.frequency - (model.frame_frequency - model.matrix.diagonal().imag)


@dataclass(frozen=True)
class InitialState:
    """Coherent amplitudes, one per mode."""

    amplitudes: tuple

    def __post_init__(self):
        amps = tuple(complex(a) for a in np.atleast_1d(self.amplitudes))
        if not all(cmath.isfinite(a) for a in amps):
            raise NonFiniteError("initial amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def coherent_pair(cls, alpha: float, delta_phi: float, phi: float = 0.0):
        """Amplitudes ``alpha e^{i phi}`` and ``alpha e^{i (phi + delta_phi)}``."""
        return cls((alpha * cmath.exp(1j * phi), alpha * cmath.exp(1j * (phi + delta_phi))))

    @classmethod
    def vacuum(cls, n: int):
        return cls((0j,) * n)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.amplitudes, dtype=complex)

    @property
    def delta_phi(self) -> float:
        a1, a2 = self.amplitudes[:2]
        return wrap_phase(cmath.phase(a2) - cmath.phase(a1))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled envelopes, shape ``(n_modes, n_times)``."""

    times: np.ndarray
    amplitudes: np.ndarray
    frame_frequency: float

    @property
    def photon_numbers(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def n_modes(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True, eq=False)
class DecayTrace:
    trajectory: Trajectory
    output_power: np.ndarray
    steady_state: InitialState
    observe_port: int


@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    eigenvalues: np.ndarray
    frequencies: np.ndarray
    decay_rates: np.ndarray

    @property
    def q_factors(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.frequencies / self.decay_rates

    @property
    def splitting(self) -> float:
        """Frequency gap between the two outermost eigenmodes."""
        return float(self.frequencies[-1] - self.frequencies[0])


def check_grid(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise GridError("time grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(t)):
        raise GridError("time grid has non-finite entries")
    if t[0] != 0.0:
        raise GridError("time grid must start at 0", t0=float(t[0]))
    if np.any(np.diff(t) <= 0):
        raise GridError("time grid must be strictly increasing")
    return t


def uniform_grid(t_max: float, samples: int = 2000) -> np.ndarray:
    return np.linspace(0.0, t_max, samples)


def default_grid(model: LinearModel, samples: int = 2000, n_lifetimes: float = 8.0):
    """Grid spanning ``n_lifetimes`` of the slowest bare mode decay."""
    kappas = -2.0 * model.matrix.diagonal().real
    kappas = kappas[kappas > 0]
    if kappas.size == 0:
        raise NoSteadyStateError("no damped mode to set the time scale")
    return uniform_grid(n_lifetimes / kappas.min(), samples)


def _initial_vector(model, init):
    a0 = init.vector if isinstance(init, InitialState) else np.asarray(init, dtype=complex)
    if a0.shape != (model.dim,):
        raise InconsistentParamsError(
            "initial state size does not match the model", expected=model.dim, got=a0.shape
        )
    return a0


def _propagate_expm(gen, times, y0):
    # one exponential per sample keeps the error from accumulating over steps
    props = expm(gen[None, :, :] * times[:, None, None])
    return (props @ y0).T


def _propagate_rk(fun, times, y0):
    sol = solve_ivp(
        fun,
        (0.0, times[-1]),
        y0,
        method="RK45",
        t_eval=times,
        rtol=RK_RTOL,
        atol=RK_ATOL,
    )
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y


def evolve_free(model: LinearModel, init, times, method: str = "expm") -> Trajectory:
    """Undriven evolution ``A(t) = exp(M t) A(0)``.

    ``method="rk45"`` integrates the same equations adaptively; it exists as
    an independent cross-check of the exponential.
    """
    t = check_grid(times)
    a0 = _initial_vector(model, init)
    if len(t) == 1:
        amps = a0[:, None].copy()
    elif method == "expm":
        amps = _propagate_expm(model.matrix, t, a0)
    elif method == "rk45":
        m = model.matrix
        amps = _propagate_rk(lambda _t, y: m @ y, t, a0)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Trajectory(t, amps, model.frame_frequency)


def _source(model: LinearModel, drive: DriveSpec) -> np.ndarray:
    if not 0 <= drive.port < model.dim:
        raise UndriveablePortError("drive port out of range", port=drive.port)
    k = model.input_couplings[drive.port]
    if k == 0.0:
        raise UndriveablePortError("drive port has no external coupling", port=drive.port)
    s = np.zeros(model.dim, dtype=complex)
    s[drive.port] = k * drive.amplitude
    return s


def _in_drive_frame(model, drive):
    if model.frame_frequency != drive.frequency:
        return model.with_frame(drive.frequency)
    return model


def evolve_driven(model: LinearModel, init, drive: DriveSpec, times, method: str = "expm"):
    """Evolution under a constant coherent drive, in the drive's rotating frame.

    The model is re-framed to ``drive.frequency`` if needed, so the returned
    trajectory always carries the drive frame.
    """
    model = _in_drive_frame(model, drive)
    t = check_grid(times)
    a0 = _initial_vector(model, init)
    s = _source(model, drive)
    n = model.dim
    if len(t) == 1:
        amps = a0[:, None].copy()
    elif method == "expm":
        # augmented generator [[M, -s], [0, 0]] acting on (A, 1)
        gen = np.zeros((n + 1, n + 1), dtype=complex)
        gen[:n, :n] = model.matrix
        gen[:n, n] = -s
        y0 = np.append(a0, 1.0)
        amps = _propagate_expm(gen, t, y0)[:n]
    elif method == "rk45":
        m = model.matrix
        amps = _propagate_rk(lambda _t, y: m @ y - s, t, a0)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Trajectory(t, amps, model.frame_frequency)


def steady_state(model: LinearModel, drive: DriveSpec) -> InitialState:
    """Solve ``M A = s`` for the driven fixed point."""
    model = _in_drive_frame(model, drive)
    s = _source(model, drive)
    eig = np.linalg.eigvals(model.matrix)
    if np.any(eig.real >= 0):
        raise NoSteadyStateError(
            "generator has an undamped mode", max_real_eigenvalue=float(eig.real.max())
        )
    cond = np.linalg.cond(model.matrix)
    if cond > COND_WARN:
        warnings.warn(f"steady-state solve is ill-conditioned (cond={cond:.3g})", stacklevel=2)
    return InitialState(tuple(np.linalg.solve(model.matrix, s)))


def decay_protocol(model: LinearModel, drive: DriveSpec, observe_port: int, times) -> DecayTrace:
    """Drive to steady state, switch the input off at t=0, and watch one port.

    The switch-off is instantaneous.  ``output_power`` is ``kappa_e |A|^2`` at
    the observed port in arbitrary units.
    """
    model = _in_drive_frame(model, drive)
    if not 0 <= observe_port < model.dim or model.input_couplings[observe_port] == 0:
        raise UndriveablePortError(
            "observed port has no external coupling", port=observe_port
        )
    ss = steady_state(model, drive)
    traj = evolve_free(model, ss, times)
    power = model.input_couplings[observe_port] ** 2 * traj.photon_numbers[observe_port]
    return DecayTrace(traj, power, ss, observe_port)


def eigenmodes(model: LinearModel) -> ModeSpectrum:
    lam = np.linalg.eigvals(model.matrix)
    freqs = -lam.imag + model.frame_frequency
    order = np.argsort(freqs, kind="stable")
    lam = lam[order]
    return ModeSpectrum(lam, freqs[order], -2.0 * lam.real)


def max_relative_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Largest sample-wise deviation scaled by the largest amplitude in ``b``."""
    scale = np.max(np.abs(b))
    if scale == 0:
        return float(np.max(np.abs(a)))
    return float(np.max(np.abs(a - b)) / scale)


def propagator_agreement(model: LinearModel, init, times, drive: DriveSpec | None = None):
    """Run both propagators and return their max relative deviation."""
    if drive is None:
        ref = evolve_free(model, init, times, method="expm")
        alt = evolve_free(model, init, times, method="rk45")
    else:
        ref = evolve_driven(model, init, drive, times, method="expm")
        alt = evolve_driven(model, init, drive, times, method="rk45")
    return max_relative_deviation(alt.amplitudes, ref.amplitudes)


def cable_steady_phase(model: LinearModel, drive: DriveSpec) -> float:
    """Phase of A2/A1 in the driven steady state, reduced into [0, 2*pi)."""
    a = steady_state(model, drive).vector
    return wrap_phase(cmath.phase(a[1] / a[0]))


def single_pass_phase(theta: float) -> float:
    """Steady-state phase difference expected when cable round trips are negligible."""
    return wrap_phase(theta + math.pi)
