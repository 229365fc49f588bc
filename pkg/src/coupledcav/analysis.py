"""Lifetime and Q extraction, interference classification, and parameter sweeps."""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .dynamics import (
    DriveSpec,
    InitialState,
    Trajectory,
    decay_protocol,
    evolve_free,
    uniform_grid,
)
from .errors import (
    CavityError,
    ConfigError,
    FitWindowError,
    InconsistentParamsError,
    UndefinedLifetimeError,
    VariantMismatchError,
)
from .model import (
    CableCoupling,
    ChainSpec,
    DirectCoupling,
    build_chain_model,
    build_model,
    effective_coupling,
    wrap_phase,
)

DIRECT_ZETA = 1.5 * math.pi
DEFAULT_TOLERANCE = 0.05
DISCREPANCY_LIMIT = 0.10
SWEEP_PARAMETERS = ("delta_phi", "theta", "g", "gamma0L0", "gamma1", "gamma2", "N")


@dataclass(frozen=True)
class LifetimeResult:
    t_1e: float
    q_equivalent: float
    crossing_found: bool
    fit_kappa: float | None = None
    q_fit: float | None = None

    @property
    def discrepant(self) -> bool:
        """True when the 1/e and log-slope Q values differ by more than 10%."""
        if self.q_fit is None or not self.crossing_found:
            return False
        if not math.isfinite(self.q_fit):
            return True
        return abs(self.q_equivalent - self.q_fit) > DISCREPANCY_LIMIT * abs(self.q_fit)


def lifetime_from_trace(times, energy, omega: float) -> LifetimeResult:
    """First crossing of ``energy`` below ``energy[0] / e``.

    The crossing is located by linear interpolation of ``log(energy)``
    between the bracketing samples, which is exact for a pure exponential.
    When the lower sample is zero the interpolation falls back to linear in
    energy.
    """
    t = np.asarray(times, dtype=float)
    n = np.asarray(energy, dtype=float)
    if n[0] <= 0 or not np.isfinite(n[0]):
        raise UndefinedLifetimeError("initial energy must be positive", initial=float(n[0]))
    thr = n[0] / math.e
    below = np.flatnonzero(n <= thr)
    if below.size == 0:
        return LifetimeResult(math.nan, math.nan, False)
    k = below[0]
    t0, t1, n0, n1 = t[k - 1], t[k], n[k - 1], n[k]
    if n1 > 0:
        frac = (math.log(n0) - math.log(thr)) / (math.log(n0) - math.log(n1))
    else:
        frac = (n0 - thr) / (n0 - n1)
    t_1e = float(t0 + frac * (t1 - t0))
    return LifetimeResult(t_1e, omega * t_1e, True)


def photon_lifetime(traj: Trajectory, mode: int, omega: float | None = None) -> LifetimeResult:
    """1/e photon lifetime of one mode.  ``omega`` defaults to the frame frequency."""
    if omega is None:
        omega = traj.frame_frequency
    return lifetime_from_trace(traj.times, traj.photon_numbers[mode], omega)


def q_from_decay(traj: Trajectory, mode: int, omega: float, fit_window=(0.0, 1.0)) -> LifetimeResult:
    """Lifetime result augmented with a least-squares log-slope decay rate.

    ``fit_window`` is a pair of fractions of the trace duration.
    """
    lo, hi = fit_window
    if not 0.0 <= lo < hi <= 1.0:
        raise FitWindowError("fit window must satisfy 0 <= lo < hi <= 1", window=fit_window)
    t = traj.times
    n = traj.photon_numbers[mode]
    span = t[-1] - t[0]
    sel = (t >= t[0] + lo * span) & (t <= t[0] + hi * span)
    if sel.sum() < 2:
        raise FitWindowError("fit window holds fewer than two samples", window=fit_window)
    if np.any(n[sel] <= 0):
        raise FitWindowError("non-positive samples inside the fit window", window=fit_window)
    slope = np.polyfit(t[sel], np.log(n[sel]), 1)[0]
    kappa = -float(slope)
    base = lifetime_from_trace(t, n, omega)
    q_fit = omega / kappa if kappa > 0 else math.inf
    return replace(base, fit_kappa=kappa, q_fit=q_fit)


class Verdict(enum.Enum):
    CONSTRUCTIVE = "constructive"
    DESTRUCTIVE = "destructive"
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class InterferenceVerdict:
    cavity_index: int
    verdict: Verdict
    residual: float


def classify_interference(
    delta_phi: float, zeta: float, cavity: int, tolerance: float = DEFAULT_TOLERANCE
) -> InterferenceVerdict:
    """Constructive when the relevant phase sum is 2m*pi, destructive at (2m+1)*pi.

    Cavity 1 tests ``delta_phi + zeta``, cavity 2 tests ``delta_phi - zeta``.
    Direct coupling is the case ``zeta = 3*pi/2``.
    """
    if cavity == 1:
        x = delta_phi + zeta
    elif cavity == 2:
        x = delta_phi - zeta
    else:
        raise ValueError("cavity must be 1 or 2")
    x = wrap_phase(x)
    k = round(x / math.pi)
    residual = abs(x - k * math.pi)
    if residual > tolerance:
        verdict = Verdict.INTERMEDIATE
    elif k % 2 == 0:
        verdict = Verdict.CONSTRUCTIVE
    else:
        verdict = Verdict.DESTRUCTIVE
    return InterferenceVerdict(cavity, verdict, residual)


def tunneling_phase(cavities, coupling) -> float:
    """Phase picked up by a field tunneling between the two cavities."""
    if isinstance(coupling, CableCoupling):
        return effective_coupling(cavities[0], cavities[1], coupling).zeta
    return DIRECT_ZETA


# --------------------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in SWEEP_PARAMETERS:
            raise ConfigError(f"unknown sweep parameter {self.name!r}", allowed=SWEEP_PARAMETERS)
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        if not vals or not all(math.isfinite(v) for v in vals):
            raise ConfigError("sweep axis values must be finite and non-empty", axis=self.name)
        if self.name == "N":
            vals = tuple(int(v) for v in vals)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SweepSpec:
    """Up to two swept parameters over a base two-cavity system or chain.

    ``protocol`` is ``"free_decay"`` from coherent amplitudes ``alpha`` and
    ``alpha e^{i delta_phi}``, or ``"steady_decay"`` (drive, switch off,
    watch ``observe_port``).  Chains always use the steady-decay protocol
    with a resonant drive on the first cavity.
    """

    axes: tuple
    cavities: tuple = ()
    coupling: object = None
    chain: ChainSpec | None = None
    target_mode: int | None = None
    frame: float | None = None
    alpha: float = 1.0
    delta_phi: float = 0.0
    protocol: str = "free_decay"
    drive: DriveSpec | None = None
    observe_port: int | None = None
    times: tuple | None = None
    samples: int = 2000

    def __post_init__(self):
        axes = tuple(self.axes)
        if not 1 <= len(axes) <= 2:
            raise ConfigError("a sweep takes one or two axes", n_axes=len(axes))
        if len({a.name for a in axes}) != len(axes):
            raise ConfigError("sweep axes must be distinct")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "cavities", tuple(self.cavities))
        if self.chain is None and len(self.cavities) != 2:
            raise ConfigError("a sweep needs two cavities or a chain")
        if self.protocol not in ("free_decay", "steady_decay"):
            raise ConfigError("sweep protocol must be free_decay or steady_decay")
        if self.times is not None:
            object.__setattr__(self, "times", tuple(float(t) for t in self.times))

    @property
    def shape(self):
        return tuple(len(a.values) for a in self.axes)


@dataclass(frozen=True)
class SweepPoint:
    index: tuple
    params: dict
    lifetimes: tuple = ()
    zeta: float | None = None
    delta_phi: float | None = None
    verdicts: tuple = ()
    error: dict | None = None


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    points: tuple

    @property
    def shape(self):
        return self.spec.shape

    def t1e(self, mode: int) -> np.ndarray:
        """Lifetime grid for one mode; failed points are NaN."""
        return self._grid(mode, lambda r: r.t_1e)

    def q(self, mode: int) -> np.ndarray:
        return self._grid(mode, lambda r: r.q_equivalent)

    def _grid(self, mode, get):
        out = np.full(self.shape, math.nan)
        for p in self.points:
            if p.error is None and p.lifetimes[mode] is not None:
                out[p.index] = get(p.lifetimes[mode])
        return out

    @property
    def errors(self):
        return [p for p in self.points if p.error is not None]


def _apply(spec: SweepSpec, params: dict):
    cavs = list(spec.cavities)
    coupling = spec.coupling
    chain = spec.chain
    delta_phi = spec.delta_phi
    for name, value in params.items():
        if name == "delta_phi":
            delta_phi = value
        elif name in ("theta", "gamma0L0"):
            if not isinstance(coupling, CableCoupling):
                raise VariantMismatchError(f"{name} sweeps need a cable coupling")
            coupling = replace(coupling, **{name: value})
        elif name == "g":
            if chain is not None:
                chain = replace(chain, g=value)
            elif isinstance(coupling, DirectCoupling) or coupling is None:
                coupling = DirectCoupling(value)
            else:
                raise VariantMismatchError("g sweeps need a direct coupling or chain")
        elif name in ("gamma1", "gamma2"):
            j = 0 if name == "gamma1" else 1
            cavs[j] = replace(cavs[j], gamma=value)
        elif name == "N":
            if chain is None:
                raise VariantMismatchError("N sweeps need a chain")
            chain = chain.with_n(int(value))
    return cavs, coupling, chain, delta_phi


def _with_extension(run, t_max, samples, needed, fixed_times):
    """Run on a grid, doubling its span until every needed mode crosses 1/e."""
    if fixed_times is not None:
        return run(np.asarray(fixed_times))
    for _ in range(7):
        out = run(uniform_grid(t_max, samples))
        if all(out[0][j] is None or out[0][j].crossing_found for j in needed):
            return out
        t_max *= 2.0
    return out


def _lifetimes(traj, omegas, modes):
    res = []
    for j in range(traj.n_modes):
        if j in modes and traj.photon_numbers[j, 0] > 0:
            res.append(photon_lifetime(traj, j, omegas[j]))
        else:
            res.append(None)
    return tuple(res)


def _evaluate(spec: SweepSpec, index, params) -> SweepPoint:
    try:
        cavs, coupling, chain, delta_phi = _apply(spec, params)
        if chain is not None:
            model = build_chain_model(chain, spec.frame)
            drive = spec.drive or DriveSpec(0, 1.0, model.frame_frequency)
            observe = model.dim - 1 if spec.observe_port is None else spec.observe_port
            kappa_min = min(c.kappa for c in chain.cavities())
            protocol = "steady_decay"
        else:
            model = build_model(cavs, coupling, spec.frame)
            drive = spec.drive or DriveSpec(0, 1.0, model.frame_frequency)
            observe = model.dim - 1 if spec.observe_port is None else spec.observe_port
            kappa_min = min(c.kappa for c in cavs)
            protocol = spec.protocol
        omegas = [model.frame_frequency] * model.dim
        if protocol == "steady_decay":
            modes = range(model.dim)
            needed = [observe]

            def run(times):
                trace = decay_protocol(model, drive, observe, times)
                return _lifetimes(trace.trajectory, omegas, modes), trace.steady_state
        else:
            init = InitialState.coherent_pair(spec.alpha, delta_phi)
            modes = range(model.dim)
            needed = [spec.target_mode] if spec.target_mode is not None else list(modes)

            def run(times):
                return _lifetimes(evolve_free(model, init, times), omegas, modes), init

        lifetimes, start = _with_extension(
            run, 8.0 / kappa_min, spec.samples, needed, spec.times
        )
        zeta = dphi = None
        verdicts = ()
        if chain is None:
            zeta = tunneling_phase(cavs, coupling)
            dphi = start.delta_phi
            verdicts = tuple(classify_interference(dphi, zeta, j).verdict for j in (1, 2))
        return SweepPoint(index, params, lifetimes, zeta, dphi, verdicts)
    except CavityError as exc:
        err = {"code": exc.code, "message": str(exc), "context": _jsonable(exc.context)}
        return SweepPoint(index, params, error=err)


def _jsonable(ctx):
    out = {}
    for k, v in ctx.items():
        out[k] = v if isinstance(v, (int, float, str, bool, type(None))) else repr(v)
    return out


def sweep_lifetime(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Evaluate lifetimes over the sweep grid.

    Points are independent; with ``threads > 1`` they run concurrently but
    the output is always ordered by grid index.  A point that fails records
    its error instead of aborting the sweep.
    """
    names = [a.name for a in spec.axes]
    jobs = []
    for index in itertools.product(*(range(len(a.values)) for a in spec.axes)):
        params = {n: a.values[i] for n, a, i in zip(names, spec.axes, index)}
        jobs.append((index, params))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda job: _evaluate(spec, *job), jobs))
    else:
        points = [_evaluate(spec, *job) for job in jobs]
    return SweepResult(spec, tuple(points))


# --------------------------------------------------------------------------- chains


@dataclass(frozen=True)
class ChainScaling:
    n_values: tuple
    lifetimes: tuple
    slope: float
    intercept: float
    r_squared: float

    @property
    def t1e(self) -> np.ndarray:
        return np.array([r.t_1e for r in self.lifetimes])


def chain_lifetime_scaling(
    base: ChainSpec,
    n_values,
    times=None,
    samples: int = 2000,
    threads: int = 1,
) -> ChainScaling:
    """Lifetime of the last cavity after resonant steady-state drive of the first.

    Returns one lifetime per chain length and an ordinary least-squares line
    through ``(N, t_1e)``.
    """
    n_values = tuple(int(n) for n in n_values)
    spec = SweepSpec(
        axes=(SweepAxis("N", n_values),),
        chain=base,
        times=times,
        samples=samples,
    )
    result = sweep_lifetime(spec, threads=threads)
    lifetimes = []
    for p in result.points:
        if p.error is not None:
            raise InconsistentParamsError(p.error["message"], N=p.params["N"])
        lifetimes.append(p.lifetimes[p.params["N"] - 1])
    t = np.array([r.t_1e for r in lifetimes])
    if len(n_values) >= 2 and np.all(np.isfinite(t)):
        fit = stats.linregress(n_values, t)
        slope, intercept, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue**2)
    else:
        slope = intercept = r2 = math.nan
    return ChainScaling(n_values, tuple(lifetimes), slope, intercept, r2)


def bare_lifetimes(cavities) -> np.ndarray:
    """1/kappa of each cavity on its own."""
    return np.array([1.0 / c.kappa for c in cavities])


__all__ = [
    "ChainScaling",
    "InterferenceVerdict",
    "LifetimeResult",
    "SweepAxis",
    "SweepPoint",
    "SweepResult",
    "SweepSpec",
    "Verdict",
    "bare_lifetimes",
    "chain_lifetime_scaling",
    "classify_interference",
    "lifetime_from_trace",
    "photon_lifetime",
    "q_from_decay",
    "sweep_lifetime",
    "tunneling_phase",
]
