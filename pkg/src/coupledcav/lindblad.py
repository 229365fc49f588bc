"""Master-equation evolution of one or two directly coupled cavities.

Units have hbar = 1, so energies are angular frequencies.  Each cavity is
truncated to ``dim_per_mode`` Fock levels, and the evolution runs in a frame
rotating at a common reference frequency: the Hamiltonian carries only the
detunings ``omega_j - frame``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import constants
from scipy.integrate import solve_ivp

from .analysis import lifetime_from_trace
from .dynamics import InitialState, check_grid
from .errors import InconsistentParamsError, TruncationError

RTOL = 1e-10
ATOL = 1e-12
# a dense superoperator is only ever built for Hilbert spaces this small
DENSE_LIMIT = 64


def thermal_occupancy(temperature: float, omega: float) -> float:
    """Bose-Einstein mean occupancy at ``temperature`` (K) for angular frequency ``omega``."""
    if temperature <= 0:
        return 0.0
    x = constants.hbar * omega / (constants.k * temperature)
    return 1.0 / math.expm1(x)


@dataclass(frozen=True)
class FockConfig:
    """Fock-space truncation.

    ``leakage_tol`` bounds the population of the top Fock level of every
    mode during a run; exceeding it means the truncation is too small.
    ``None`` disables the check.
    """

    dim_per_mode: int = 10
    n_thermal: float = 0.0
    modes: int = 2
    leakage_tol: float | None = 1e-6

    def __post_init__(self):
        if self.dim_per_mode < 2:
            raise InconsistentParamsError("dim_per_mode must be at least 2")
        if self.modes not in (1, 2):
            raise InconsistentParamsError("only one or two modes are supported")
        if self.n_thermal < 0:
            raise InconsistentParamsError("n_thermal must be non-negative")

    @property
    def hilbert_dim(self) -> int:
        return self.dim_per_mode**self.modes


@dataclass(frozen=True, eq=False)
class DensityState:
    rho: np.ndarray
    time: float

    @property
    def trace_error(self) -> float:
        return abs(np.trace(self.rho) - 1.0)

    @property
    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())


def annihilation(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)


def mode_operators(config: FockConfig):
    """Annihilation operator of each mode on the full tensor-product space."""
    a = annihilation(config.dim_per_mode)
    eye = np.eye(config.dim_per_mode)
    if config.modes == 1:
        return [a]
    return [np.kron(a, eye), np.kron(eye, a)]


def _parameters(kappas, detunings, config):
    kappas = np.broadcast_to(np.asarray(kappas, dtype=float), (config.modes,))
    if detunings is None:
        detunings = np.zeros(config.modes)
    detunings = np.broadcast_to(np.asarray(detunings, dtype=float), (config.modes,))
    if np.any(kappas < 0):
        raise InconsistentParamsError("loss rates must be non-negative")
    return kappas, detunings


def hamiltonian(detunings, g, config: FockConfig) -> np.ndarray:
    ops = mode_operators(config)
    h = sum(dw * a.conj().T @ a for dw, a in zip(detunings, ops))
    if config.modes == 2:
        a1, a2 = ops
        h = h + g * (a1.conj().T @ a2 + a1 @ a2.conj().T)
    return np.asarray(h, dtype=complex)


def _jumps(kappas, config):
    """(rate, operator) pairs for emission and thermal absorption."""
    out = []
    nth = config.n_thermal
    for k, a in zip(kappas, mode_operators(config)):
        out.append((k * (nth + 1.0), a))
        if nth > 0:
            out.append((k * nth, a.conj().T))
    return out


def build_liouvillian_action(kappas, g=0.0, detunings=None, config: FockConfig = FockConfig()):
    """Return ``f(rho) -> drho/dt`` for the Lindblad generator.

    Dissipation is ``kappa (n_th + 1) D[a] + kappa n_th D[a^dag]`` per mode.
    The anticommutator terms are folded into a non-Hermitian effective
    Hamiltonian, so one call costs a handful of matrix products and never
    touches a superoperator.
    """
    kappas, detunings = _parameters(kappas, detunings, config)
    h = hamiltonian(detunings, g, config)
    jumps = [(r, op, op.conj().T) for r, op in _jumps(kappas, config) if r > 0]
    h_eff = h - 0.5j * sum((r * ld @ op for r, op, ld in jumps), np.zeros_like(h))
    gen = -1j * h_eff

    def action(rho):
        x = gen @ rho
        out = x + (rho @ gen.conj().T)
        for r, op, ld in jumps:
            out += r * (op @ rho @ ld)
        return out

    return action


def liouvillian_matrix(kappas, g=0.0, detunings=None, config: FockConfig = FockConfig()):
    """Dense column-stacking superoperator, for small test systems only."""
    if config.hilbert_dim > DENSE_LIMIT:
        raise InconsistentParamsError(
            "dense superoperator refused above the size limit", dim=config.hilbert_dim
        )
    kappas, detunings = _parameters(kappas, detunings, config)
    h = hamiltonian(detunings, g, config)
    n = h.shape[0]
    eye = np.eye(n)
    # vec(A X B) = (B^T kron A) vec(X) with column stacking
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for r, op in _jumps(kappas, config):
        ld = op.conj().T
        ldl = ld @ op
        sup += r * (
            np.kron(op.conj(), op) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye)
        )
    return sup


def coherent_vector(alpha: complex, d: int) -> np.ndarray:
    """Fock amplitudes of |alpha> cut at ``d`` levels and renormalised."""
    n = np.arange(d)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    if alpha == 0:
        c = np.zeros(d, dtype=complex)
        c[0] = 1.0
        return c
    mags = np.exp(n * math.log(abs(alpha)) - 0.5 * log_fact)
    c = mags * np.exp(1j * n * np.angle(alpha))
    return c / np.linalg.norm(c)


def coherent_density(amplitudes, config: FockConfig) -> np.ndarray:
    psi = np.ones(1, dtype=complex)
    for alpha in amplitudes:
        psi = np.kron(psi, coherent_vector(alpha, config.dim_per_mode))
    return np.outer(psi, psi.conj())


def _top_level_projectors(config):
    d = config.dim_per_mode
    top = np.zeros((d, d))
    top[-1, -1] = 1.0
    if config.modes == 1:
        return [top]
    eye = np.eye(d)
    return [np.kron(top, eye), np.kron(eye, top)]


@dataclass(frozen=True, eq=False)
class LindbladResult:
    times: np.ndarray
    mean_a: np.ndarray
    mean_n: np.ndarray
    final: DensityState
    max_leakage: float
    max_trace_error: float
    max_hermiticity_error: float


def _expect(op, rhos):
    # Tr(op rho) for a stack of density matrices
    return np.einsum("ij,tji->t", op, rhos)


def lindblad_evolve(
    init: InitialState,
    kappas,
    times,
    g: float = 0.0,
    detunings=None,
    config: FockConfig = FockConfig(),
) -> LindbladResult:
    """Integrate the master equation from a product of coherent states.

    Records ``<a_j>`` and ``<n_j>`` at every sample.  Raises
    :class:`TruncationError` when the truncation is visibly too small.
    """
    t = check_grid(times)
    amps = init.vector
    if amps.shape != (config.modes,):
        raise InconsistentParamsError("one amplitude per mode is required", modes=config.modes)
    d = config.dim_per_mode
    for alpha in amps:
        if abs(alpha) ** 2 + 5 * abs(alpha) >= d:
            raise TruncationError(
                "|alpha|^2 + 5|alpha| must stay below dim_per_mode", alpha=abs(alpha), dim=d
            )
    action = build_liouvillian_action(kappas, g, detunings, config)
    n = config.hilbert_dim
    rho0 = coherent_density(amps, config)

    def rhs(_t, y):
        return action(y.reshape(n, n)).ravel()

    if len(t) == 1:
        rhos = rho0[None]
    else:
        sol = solve_ivp(
            rhs, (0.0, t[-1]), rho0.ravel(), method="DOP853", t_eval=t, rtol=RTOL, atol=ATOL
        )
        if not sol.success:
            raise RuntimeError(sol.message)
        rhos = sol.y.T.reshape(-1, n, n)

    ops = mode_operators(config)
    leak = max(float(_expect(p, rhos).real.max()) for p in _top_level_projectors(config))
    if config.leakage_tol is not None and leak > config.leakage_tol:
        raise TruncationError(
            "top Fock level population exceeds the leakage tolerance",
            leakage=leak,
            tolerance=config.leakage_tol,
            dim=d,
        )
    mean_a = np.array([_expect(a, rhos) for a in ops])
    mean_n = np.array([_expect(a.conj().T @ a, rhos).real for a in ops])
    traces = np.einsum("tii->t", rhos)
    herm = np.max(np.abs(rhos - rhos.conj().transpose(0, 2, 1)))
    return LindbladResult(
        times=t,
        mean_a=mean_a,
        mean_n=mean_n,
        final=DensityState(rhos[-1], float(t[-1])),
        max_leakage=leak,
        max_trace_error=float(np.max(np.abs(traces - 1.0))),
        max_hermiticity_error=float(herm),
    )


@dataclass(frozen=True, eq=False)
class LindbladSweep:
    delta_phi: np.ndarray
    g: np.ndarray
    t1e: np.ndarray  # shape (len(delta_phi), len(g), modes)
    crossing_found: np.ndarray


def lindblad_lifetime_sweep(
    delta_phis,
    gs,
    kappas,
    times,
    config: FockConfig = FockConfig(),
    alpha: float = 1.0,
    detunings=None,
    threads: int = 1,
) -> LindbladSweep:
    """1/e lifetimes of ``<n_j>`` over a (delta_phi, g) grid."""
    dphi = np.asarray(delta_phis, dtype=float)
    gs = np.asarray(gs, dtype=float)
    t = check_grid(times)

    def point(job):
        i, k = job
        init = InitialState.coherent_pair(alpha, dphi[i])
        res = lindblad_evolve(init, kappas, t, gs[k], detunings, config)
        return [lifetime_from_trace(t, res.mean_n[j], 1.0) for j in range(config.modes)]

    jobs = list(itertools.product(range(len(dphi)), range(len(gs))))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(point, jobs))
    else:
        results = [point(j) for j in jobs]
    t1e = np.full((len(dphi), len(gs), config.modes), math.nan)
    found = np.zeros(t1e.shape, dtype=bool)
    for (i, k), lts in zip(jobs, results):
        for j, r in enumerate(lts):
            t1e[i, k, j] = r.t_1e
            found[i, k, j] = r.crossing_found
    return LindbladSweep(dphi, gs, t1e, found)

