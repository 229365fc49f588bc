"""Command-line front end.

Every subcommand reads a JSON config (``zeta`` takes flags instead) and
writes a table as CSV or JSON.  Failures print one JSON object
``{code, message, context}`` on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import analysis, dynamics, lindblad, model
from .config import ExperimentConfig, config_to_dict, load_config, parse_angle, UNIT_SCALE
from .errors import CavityError, ConfigError
from .results import ResultBundle, base_metadata

VALIDATE_TOL = 1e-8


def _build_model(cfg: ExperimentConfig) -> model.LinearModel:
    if cfg.chain is not None:
        return model.build_chain_model(cfg.chain, cfg.frame)
    return model.build_model(cfg.cavities, cfg.coupling, cfg.frame)


def _cavity_list(cfg):
    return cfg.chain.cavities() if cfg.chain is not None else list(cfg.cavities)


def _times(cfg: ExperimentConfig) -> np.ndarray:
    tg = cfg.time_grid
    t_max = tg.t_max
    if t_max is None:
        t_max = 8.0 / min(c.kappa for c in _cavity_list(cfg))
    return dynamics.uniform_grid(t_max, tg.samples)


def _drive(cfg, m):
    if cfg.drive is not None:
        return cfg.drive
    return dynamics.DriveSpec(0, 1.0, m.frame_frequency)


def _effective_echo(cfg):
    if not isinstance(cfg.coupling, model.CableCoupling):
        return None
    eff = model.effective_coupling(cfg.cavities[0], cfg.cavities[1], cfg.coupling)
    return {
        "g_eff": eff.g_eff,
        "delta_omega_1": eff.delta_omega_1,
        "delta_omega_2": eff.delta_omega_2,
        "kappa_eff_1": eff.kappa_eff_1,
        "kappa_eff_2": eff.kappa_eff_2,
        "zeta": eff.zeta,
        "zeta_over_pi": eff.zeta / math.pi,
    }


def _trajectory_table(traj, extra=None):
    cols = {"time_s": traj.times}
    for j in range(traj.n_modes):
        cols[f"re_A_{j + 1}"] = traj.amplitudes[j].real
        cols[f"im_A_{j + 1}"] = traj.amplitudes[j].imag
        cols[f"n_{j + 1}"] = traj.photon_numbers[j]
    if extra:
        cols.update(extra)
    return cols


def _lifetime_dict(r):
    return {"t_1e": r.t_1e, "q_equivalent": r.q_equivalent, "crossing_found": r.crossing_found}


def cmd_simulate(cfg: ExperimentConfig, args) -> ResultBundle:
    if cfg.protocol == "lindblad":
        return cmd_lindblad(cfg, args)
    m = _build_model(cfg)
    times = _times(cfg)
    meta = base_metadata(config_to_dict(cfg), "simulate")
    extra = None
    if cfg.protocol == "free_decay":
        traj = dynamics.evolve_free(m, cfg.initial_state, times)
        check = lambda: dynamics.propagator_agreement(m, cfg.initial_state, times)  # noqa: E731
    elif cfg.protocol == "driven":
        init = cfg.initial_state or dynamics.InitialState.vacuum(m.dim)
        traj = dynamics.evolve_driven(m, init, cfg.drive, times)
        check = lambda: dynamics.propagator_agreement(m, init, times, cfg.drive)  # noqa: E731
    else:
        drive = _drive(cfg, m)
        observe = m.dim - 1 if cfg.observe_port is None else cfg.observe_port
        trace = dynamics.decay_protocol(m, drive, observe, times)
        traj = trace.trajectory
        extra = {"output_power": trace.output_power}
        meta["steady_state"] = list(trace.steady_state.amplitudes)
        meta["observe_port"] = observe
        if m.dim == 2:
            meta["steady_state_delta_phi"] = trace.steady_state.delta_phi
        check = lambda: dynamics.propagator_agreement(m, trace.steady_state, times)  # noqa: E731
    lifetimes = {}
    for j in range(traj.n_modes):
        if traj.photon_numbers[j, 0] > 0:
            lifetimes[f"cavity{j + 1}"] = _lifetime_dict(analysis.photon_lifetime(traj, j))
    meta["lifetimes"] = lifetimes
    echo = _effective_echo(cfg)
    if echo:
        meta["effective_coupling"] = echo
    if args.validate:
        dev = check()
        meta["validation"] = {
            "max_relative_deviation": dev,
            "tolerance": VALIDATE_TOL,
            "passed": dev < VALIDATE_TOL,
        }
        print(
            f"validate: expm vs rk45 max relative deviation {dev:.3e} "
            f"({'ok' if dev < VALIDATE_TOL else 'FAILED'})",
            file=sys.stderr,
        )
    bundle = ResultBundle(meta)
    bundle.add_table("trajectory", _trajectory_table(traj, extra))
    return bundle


def _sweep_spec(cfg: ExperimentConfig) -> analysis.SweepSpec:
    if cfg.sweep is None:
        raise ConfigError("this command needs a sweep section", key="sweep")
    alpha, dphi = 1.0, 0.0
    if cfg.initial_state is not None:
        amps = cfg.initial_state.amplitudes
        alpha = abs(amps[0])
        if len(amps) == 2:
            dphi = cfg.initial_state.delta_phi
    times = None
    if cfg.time_grid.t_max is not None:
        times = tuple(_times(cfg))
    protocol = "steady_decay" if cfg.protocol == "steady_decay" else "free_decay"
    return analysis.SweepSpec(
        axes=cfg.sweep.axes,
        cavities=cfg.cavities,
        coupling=cfg.coupling,
        chain=cfg.chain,
        target_mode=cfg.sweep.target_mode,
        frame=cfg.frame,
        alpha=alpha,
        delta_phi=dphi,
        protocol=protocol,
        drive=cfg.drive,
        observe_port=cfg.observe_port,
        times=times,
        samples=cfg.time_grid.samples,
    )


def cmd_sweep(cfg: ExperimentConfig, args) -> ResultBundle:
    if cfg.protocol == "lindblad":
        return cmd_lindblad(cfg, args)
    spec = _sweep_spec(cfg)
    result = analysis.sweep_lifetime(spec, threads=args.threads)
    n_modes = cfg.n_modes
    names = [a.name for a in spec.axes]
    cols = {n: [] for n in names}
    for j in range(n_modes):
        cols[f"t1e_cavity{j + 1}"] = []
    for j in range(n_modes):
        cols[f"q_cavity{j + 1}"] = []
    pairwise = cfg.chain is None
    if pairwise:
        if "delta_phi" not in names:
            cols["delta_phi"] = []
        cols.update({"zeta": [], "verdict_1": [], "verdict_2": []})
    cols["error"] = []
    for p in result.points:
        for n in names:
            cols[n].append(p.params[n])
        for j in range(n_modes):
            r = p.lifetimes[j] if p.error is None and j < len(p.lifetimes) else None
            cols[f"t1e_cavity{j + 1}"].append(r.t_1e if r else math.nan)
            cols[f"q_cavity{j + 1}"].append(r.q_equivalent if r else math.nan)
        if pairwise:
            if "delta_phi" not in names:
                cols["delta_phi"].append(p.delta_phi if p.error is None else math.nan)
            cols["zeta"].append(p.zeta if p.error is None else math.nan)
            for k in (0, 1):
                v = p.verdicts[k].value if p.error is None else ""
                cols[f"verdict_{k + 1}"].append(v)
        cols["error"].append(p.error["code"] if p.error else "")
    meta = base_metadata(config_to_dict(cfg), "sweep")
    meta["point_errors"] = [
        {"index": list(p.index), "params": p.params, **p.error} for p in result.errors
    ]
    echo = _effective_echo(cfg) if cfg.coupling is not None else None
    if echo:
        meta["effective_coupling"] = echo
    bundle = ResultBundle(meta)
    bundle.add_table("sweep", cols)
    return bundle


def cmd_chain(cfg: ExperimentConfig, args) -> ResultBundle:
    if cfg.chain is None:
        raise ConfigError("the chain command needs a chain system", key="system")
    n_values = (cfg.chain.n,)
    if cfg.sweep is not None:
        axes = [a for a in cfg.sweep.axes if a.name == "N"]
        if not axes or len(cfg.sweep.axes) != 1:
            raise ConfigError("chain sweeps take a single N axis", key="sweep")
        n_values = axes[0].values
    times = tuple(_times(cfg)) if cfg.time_grid.t_max is not None else None
    scaling = analysis.chain_lifetime_scaling(
        cfg.chain, n_values, times=times, samples=cfg.time_grid.samples, threads=args.threads
    )
    meta = base_metadata(config_to_dict(cfg), "chain")
    meta["fit"] = {
        "slope": scaling.slope,
        "intercept": scaling.intercept,
        "r_squared": scaling.r_squared,
    }
    bundle = ResultBundle(meta)
    bundle.add_table(
        "chain",
        {
            "N": list(scaling.n_values),
            "t1e": [r.t_1e for r in scaling.lifetimes],
            "q_equiv": [r.q_equivalent for r in scaling.lifetimes],
        },
    )
    return bundle


def _lindblad_inputs(cfg: ExperimentConfig):
    if cfg.chain is not None or isinstance(cfg.coupling, model.CableCoupling):
        raise ConfigError("the master equation covers direct coupling only", key="system")
    frame = cfg.reference_frequency
    kappas = [c.kappa for c in cfg.cavities]
    detunings = [c.omega - frame for c in cfg.cavities]
    g = cfg.coupling.g if cfg.coupling is not None else 0.0
    fock = cfg.lindblad or lindblad.FockConfig(modes=len(cfg.cavities))
    return kappas, detunings, g, fock


def cmd_lindblad(cfg: ExperimentConfig, args) -> ResultBundle:
    kappas, detunings, g, fock = _lindblad_inputs(cfg)
    times = _times(cfg)
    meta = base_metadata(config_to_dict(cfg), "lindblad")
    bundle = ResultBundle(meta)
    if cfg.sweep is not None:
        if fock.modes != 2:
            raise ConfigError("lindblad sweeps need two cavities", key="sweep")
        axes = {a.name: a.values for a in cfg.sweep.axes}
        if not set(axes) <= {"delta_phi", "g"}:
            raise ConfigError("lindblad sweeps take delta_phi and g axes only", key="sweep")
        alpha, dphi0 = 1.0, 0.0
        if cfg.initial_state is not None:
            alpha = abs(cfg.initial_state.amplitudes[0])
            dphi0 = cfg.initial_state.delta_phi
        dphis = axes.get("delta_phi", (dphi0,))
        gs = axes.get("g", (g,))
        sw = lindblad.lindblad_lifetime_sweep(
            dphis, gs, kappas, times, fock, alpha, detunings, threads=args.threads
        )
        cols = {"delta_phi": [], "g": [], "t1e_cavity1": [], "t1e_cavity2": []}
        for i, dp in enumerate(sw.delta_phi):
            for k, gv in enumerate(sw.g):
                cols["delta_phi"].append(dp)
                cols["g"].append(gv)
                cols["t1e_cavity1"].append(sw.t1e[i, k, 0])
                cols["t1e_cavity2"].append(sw.t1e[i, k, 1])
        bundle.add_table("lindblad_sweep", cols)
        return bundle
    res = lindblad.lindblad_evolve(cfg.initial_state, kappas, times, g, detunings, fock)
    cols = {"time_s": res.times}
    for j in range(fock.modes):
        cols[f"re_a_{j + 1}"] = res.mean_a[j].real
        cols[f"im_a_{j + 1}"] = res.mean_a[j].imag
        cols[f"n_{j + 1}"] = res.mean_n[j]
    meta["diagnostics"] = {
        "max_leakage": res.max_leakage,
        "max_trace_error": res.max_trace_error,
        "max_hermiticity_error": res.max_hermiticity_error,
    }
    meta["lifetimes"] = {
        f"cavity{j + 1}": _lifetime_dict(analysis.lifetime_from_trace(res.times, res.mean_n[j], 1.0))
        for j in range(fock.modes)
        if res.mean_n[j, 0] > 0
    }
    bundle.add_table("lindblad", cols)
    return bundle


def cmd_eigen(cfg: ExperimentConfig, args) -> ResultBundle:
    m = _build_model(cfg)
    spec = dynamics.eigenmodes(m)
    meta = base_metadata(config_to_dict(cfg), "eigen")
    meta["splitting"] = spec.splitting
    cavs = _cavity_list(cfg)
    if (
        isinstance(cfg.coupling, model.DirectCoupling)
        and len(cavs) == 2
        and cavs[0].omega == cavs[1].omega
    ):
        g = cfg.coupling.g
        radicand = 4 * g**2 - (cavs[0].kappa - cavs[1].kappa) ** 2 / 4
        predicted = math.sqrt(radicand) if radicand > 0 else None
        meta["splitting_check"] = {
            "predicted": predicted,
            "numerical": spec.splitting,
            "relative_error": (
                abs(spec.splitting - predicted) / predicted if predicted else None
            ),
        }
    bundle = ResultBundle(meta)
    bundle.add_table(
        "modes",
        {
            "index": list(range(m.dim)),
            "frequency": spec.frequencies,
            "decay_rate": spec.decay_rates,
            "q_factor": spec.q_factors,
            "re_lambda": spec.eigenvalues.real,
            "im_lambda": spec.eigenvalues.imag,
        },
    )
    return bundle


def cmd_zeta(args) -> dict:
    scale = UNIT_SCALE[args.units]
    g1, g2 = args.gamma1 * scale, args.gamma2 * scale
    k1 = g1 if args.kappa1 is None else args.kappa1 * scale
    k2 = g2 if args.kappa2 is None else args.kappa2 * scale
    if k1 < g1 or k2 < g2:
        raise ConfigError("total rates must be at least the cable rates")
    c1 = model.CavityParams(args.omega * scale, k1 - g1, 0.0, g1)
    c2 = model.CavityParams(args.omega * scale, k2 - g2, 0.0, g2)
    coupling = model.CableCoupling(parse_angle(args.theta), args.gamma0l0)
    eff = model.effective_coupling(c1, c2, coupling)
    return {
        "theta": coupling.theta,
        "gamma0L0": coupling.gamma0L0,
        "zeta": eff.zeta,
        "zeta_over_pi": eff.zeta / math.pi,
        "g_eff": [eff.g_eff.real, eff.g_eff.imag],
        "delta_omega_1": [eff.delta_omega_1.real, eff.delta_omega_1.imag],
        "delta_omega_2": [eff.delta_omega_2.real, eff.delta_omega_2.imag],
        "kappa_eff_1": eff.kappa_eff_1,
        "kappa_eff_2": eff.kappa_eff_2,
        "single_pass_phase": dynamics.single_pass_phase(coupling.theta),
    }


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "chain": cmd_chain,
    "lindblad": cmd_lindblad,
    "eigen": cmd_eigen,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON experiment config")
    common.add_argument("--out", help="output path (overrides the config; stdout if absent)")
    common.add_argument("--format", choices=["csv", "json"], help="output format")
    common.add_argument("--threads", type=int, default=1, help="parallel sweep workers")
    common.add_argument(
        "--validate", action="store_true", help="cross-check expm against adaptive RK"
    )

    parser = argparse.ArgumentParser(
        prog="coupledcav", description="Coupled-cavity interference and photon lifetime"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="time evolution of one configuration")
    sub.add_parser("sweep", parents=[common], help="lifetime over a parameter grid")
    sub.add_parser("chain", parents=[common], help="lifetime scaling with chain length")
    sub.add_parser("lindblad", parents=[common], help="master-equation evolution or sweep")
    sub.add_parser("eigen", parents=[common], help="eigenmode frequencies and Q factors")

    z = sub.add_parser("zeta", help="effective cable coupling and tunneling phase")
    z.add_argument("--theta", required=True, help="one-way cable phase, radians or '<x>pi'")
    z.add_argument("--gamma0l0", type=float, default=0.0, help="one-way attenuation exponent")
    z.add_argument("--gamma1", type=float, default=1.0)
    z.add_argument("--gamma2", type=float, default=1.0)
    z.add_argument("--kappa1", type=float, help="total rate of cavity 1 (default gamma1)")
    z.add_argument("--kappa2", type=float, help="total rate of cavity 2 (default gamma2)")
    z.add_argument("--omega", type=float, default=1.0)
    z.add_argument("--units", choices=list(UNIT_SCALE), default="rad_per_s")
    z.add_argument("--out", help="write the JSON here instead of stdout")
    return parser


def _fail(code, message, context=None) -> int:
    payload = {"code": code, "message": message, "context": context or {}}
    print(json.dumps(payload, default=repr), file=sys.stderr)
    return 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "zeta":
            text = json.dumps(cmd_zeta(args), indent=2) + "\n"
            if args.out:
                from .results import atomic_write

                atomic_write(args.out, text)
            else:
                sys.stdout.write(text)
            return 0
        cfg = load_config(args.config)
        bundle = COMMANDS[args.command](cfg, args)
        fmt = args.format or cfg.output.format
        path = args.out or cfg.output.path
        bundle.write(path, fmt)
        return 0
    except CavityError as exc:
        return _fail(exc.code, str(exc), exc.context)
    except OSError as exc:
        return _fail("io_error", str(exc), {"path": getattr(exc, "filename", None)})


if __name__ == "__main__":
    sys.exit(main())
