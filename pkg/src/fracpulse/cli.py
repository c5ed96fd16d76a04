"""Command-line front end.

``fracpulse <command> [flags]`` with commands ``autocor``, ``psd``,
``sweep``, ``pulse``, ``optimize`` and ``validate``. Settings are merged
from a bundled preset, then a JSON config file, then flags. Exit codes:
0 success, 2 configuration or usage error, 3 numerical-convergence failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import CATALOG, FORMATS, ConfigError, RunConfig, canonical_shape, read_config_file
from .infidelity import average_infidelity
from .io import write_csv, write_json
from .montecarlo import estimate_infidelity
from .noise import VARIANTS, SingularArgumentError, make_kernel, psd
from .optimize import OptimizationError, fbm_localized_family, fixed_point_refine, optimal_voltage_pulse
from .presets import PRESETS, preset
from .shapes import emit_waveform

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 2, 3
SWEEP_TABLE = ("alpha", "T_s", "axis_value", "shape", "variant", "q_V2", "infidelity", "error", "converged")
VALIDATE_TABLE = ("alpha", "shape", "mc_mean", "analytic", "ratio", "stderr", "n_traj", "verdict")


class ConvergenceFailure(RuntimeError):
    """A numerical result did not meet its convergence criterion; carries the partial output."""


def _emit(cfg: RunConfig, default_format: str, columns, rows, meta: dict, payload: dict | None = None) -> None:
    fmt = cfg.format or default_format
    meta = {"command": meta.pop("command")} | ({"preset": cfg.preset} if cfg.preset else {}) | meta
    if fmt == "csv":
        write_csv(cfg.out, columns, rows, meta)
    else:
        body = payload if payload is not None else {"columns": list(columns), "rows": [list(r) for r in rows]}
        write_json(cfg.out, {"meta": meta, "config": cfg.to_dict()} | body)


def _lag_values(cfg: RunConfig) -> tuple[str, np.ndarray]:
    sweep = cfg.sweep
    if sweep is None or sweep.axis not in ("dt", "dtau"):
        raise ConfigError("autocor needs a sweep over dt (seconds) or dtau (normalized lag)")
    vals = sweep.values()
    if sweep.axis == "dt" and vals[0] > 0:
        # curves start at zero lag
        vals = np.concatenate(([0.0], vals))
    return sweep.axis, vals


def cmd_autocor(cfg: RunConfig) -> int:
    """Correlation curves, one column per (kernel variant, alpha)."""
    if cfg.noise != "tlf":
        raise ConfigError("autocor covers the stationary fluctuator ensemble only")
    if cfg.normalized and cfg.r0 == 0:
        raise ConfigError("normalized output needs R0 > 0")
    axis, lags = _lag_values(cfg)
    T = cfg.durations[0]
    dtau = lags / T if axis == "dt" else lags
    variants = cfg.variants or (cfg.kernel,)
    columns, data = [f"{axis}_s" if axis == "dt" else axis], [lags]
    for variant in variants:
        for alpha in cfg.alphas:
            kernel = make_kernel(cfg.model(alpha), T, variant)
            col = np.full(len(dtau), np.nan)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                for i, d in enumerate(dtau):
                    try:
                        col[i] = kernel.lag(d)
                    except SingularArgumentError:
                        pass
            data.append(col / cfg.r0 if cfg.normalized else col)
            columns.append(f"{variant}:alpha={alpha:g}")
    rows = list(zip(*data))
    meta = {"command": "autocor", "T_s": T, "normalized": cfg.normalized, "r0_V2": cfg.r0}
    _emit(cfg, "csv", columns, rows, meta)
    return EXIT_OK


def cmd_psd(cfg: RunConfig) -> int:
    """Spectral density per alpha; frequencies from an ``f`` sweep or two decades beyond the cutoffs."""
    if cfg.noise != "tlf":
        raise ConfigError("psd covers the stationary fluctuator ensemble only")
    if cfg.sweep is not None and cfg.sweep.axis == "f":
        f = cfg.sweep.values()
    else:
        f = np.geomspace(cfg.f_min / 100, cfg.f_max * 100, 81)
    if cfg.normalized and cfg.r0 == 0:
        raise ConfigError("normalized output needs R0 > 0")
    data = [f]
    for alpha in cfg.alphas:
        s = psd(cfg.model(alpha), f)
        data.append(s / cfg.r0 if cfg.normalized else s)
    columns = ["f_Hz"] + [f"alpha={a:g}" for a in cfg.alphas]
    _emit(cfg, "csv", columns, list(zip(*data)), {"command": "psd", "normalized": cfg.normalized, "r0_V2": cfg.r0})
    return EXIT_OK


def _sweep_points(cfg: RunConfig) -> list[tuple]:
    """``(axis value, alpha, T, r0, shape name)`` for every report."""
    sweep = cfg.sweep
    if sweep is None:
        raise ConfigError("sweep needs a sweep axis")
    a0, T0 = cfg.alphas[0], cfg.durations[0]
    if sweep.axis == "shape":
        return [(name, a0, T0, cfg.r0, name) for name in cfg.shapes]
    vals = sweep.values()
    if sweep.axis == "T":
        pts = [(v, a, v, cfg.r0) for v in vals for a in cfg.alphas]
    elif sweep.axis == "alpha":
        pts = [(v, v, T, cfg.r0) for v in vals for T in cfg.durations]
    elif sweep.axis == "R0":
        pts = [(v, a0, T0, v) for v in vals]
    elif sweep.axis == "width":
        if cfg.noise != "fbm":
            raise ConfigError("the width axis sweeps the localized fBm pulse family; set noise to fbm")
        if np.any(vals <= 0) or np.any(vals > 1):
            raise ConfigError("widths must lie in (0, 1]")
        return [(v, a0, T0, cfg.r0, "box") for v in vals]
    else:
        raise ConfigError(f"sweep does not support the {sweep.axis!r} axis")
    for _, a, _, _ in pts:
        cfg.model(a)
    return [p + (name,) for p in pts for name in cfg.shapes]


def cmd_sweep(cfg: RunConfig) -> int:
    """Infidelity along one axis for every configured shape; rows ordered by axis value."""
    try:
        points = _sweep_points(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    device = cfg.device()
    rows = []
    for val, alpha, T, r0, name in points:
        gate = cfg.gate(T)
        if name == "box":
            rep = fbm_localized_family(cfg.model(alpha, T, r0), gate, float(val), device, cfg.grid_n)
        else:
            variant = "fbm" if cfg.noise == "fbm" else cfg.kernel
            rep = average_infidelity(cfg.shape(name, alpha), gate, device, cfg.model(alpha, T, r0), variant, cfg.grid_n)
        rows.append((alpha, T, val, rep.shape, rep.variant, rep.q, rep.infidelity, rep.error, rep.converged))
    if cfg.sweep.axis != "shape":
        rows.sort(key=lambda r: r[2])
    meta = {"command": "sweep", "axis": cfg.sweep.axis, "kernel": cfg.kernel, "k": cfg.k, "kappa_per_V": cfg.kappa}
    _emit(cfg, "csv", SWEEP_TABLE, rows, meta)
    bad = [r for r in rows if not r[-1]]
    if bad:
        raise ConvergenceFailure(f"{len(bad)} of {len(rows)} sweep points missed the quadrature tolerance")
    return EXIT_OK


def cmd_pulse(cfg: RunConfig) -> int:
    """Voltage and exchange waveforms for every configured shape at the first duration."""
    if cfg.noise != "tlf":
        raise ConfigError("pulse shapes are designed for the stationary ensemble")
    gate, device, alpha = cfg.gate(), cfg.device(), cfg.alphas[0]
    waves, names = [], [canonical_shape(n) for n in cfg.shapes]
    for name in names:
        if name == "beta":
            wf = optimal_voltage_pulse(gate, device, alpha, cfg.n_samples, cfg.j_floor)
        else:
            wf = emit_waveform(cfg.shape(name), gate, device, cfg.n_samples, cfg.j_floor)
        waves.append(wf)
    columns, data = ["t_s"], [waves[0].t]
    for name, wf in zip(names, waves):
        columns += [f"V_{name}_V", f"J_{name}_eV", f"clipped_{name}"]
        data += [wf.v, wf.j, wf.clipped.astype(int)]
    j_floor = cfg.j_floor if cfg.j_floor is not None else device.j0
    meta = {"command": "pulse", "T_s": gate.T, "k": gate.k, "alpha": alpha, "j_floor_eV": j_floor}
    _emit(cfg, "csv", columns, list(zip(*data)), meta, {"waveforms": [wf.to_dict() for wf in waves]})
    return EXIT_OK


def cmd_optimize(cfg: RunConfig) -> int:
    """Fixed-point refinement of the optimal shape under the improved kernel."""
    if cfg.noise != "tlf":
        raise ConfigError("refinement is defined for the stationary ensemble")
    model, gate = cfg.model(), cfg.gate()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = fixed_point_refine(model, gate, max_iter=cfg.max_iter, tol=cfg.tol, n=cfg.opt_nodes,
                                     compare=cfg.max_iter > 0)
    except ValueError as exc:
        raise ConfigError(f"unsupported range: {exc}") from exc
    residual = "n/a" if res.residual is None else f"{res.residual:.3e}"
    summary = {"command": "optimize", "alpha": res.alpha, "theta": res.theta, "iterations": res.iterations,
               "converged": res.converged, "residual": residual, "l1_to_beta": res.l1_to_beta}
    beta = cfg.shape("beta")(res.grid.nodes)
    rows = list(zip(res.grid.nodes, res.grid.weights, res.values, beta))
    _emit(cfg, "json", ("tau", "weight", "S", "S_beta"), rows, summary, {"result": res.to_dict()})
    print(" ".join(f"{k}={v}" for k, v in summary.items() if k != "command"), file=sys.stderr)
    if cfg.max_iter > 0 and not res.converged:
        raise ConvergenceFailure(f"fixed point not reached in {res.iterations} iterations (residual {residual})")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    """Monte Carlo against the perturbative value for every (alpha, shape)."""
    if cfg.noise != "tlf":
        raise ConfigError("Monte Carlo validation samples the fluctuator ensemble only")
    gate, estimates, table = cfg.gate(), [], []
    for alpha in cfg.alphas:
        for name in cfg.shapes:
            est = estimate_infidelity(cfg.model(alpha), cfg.shape(name, alpha), gate, cfg.kappa, n_traj=cfg.n_traj,
                                      n_t=cfg.n_t, seed=cfg.seed, n_bins=cfg.n_bins)
            ok = est.agrees()
            verdict = "n/a" if ok is None else ("pass" if ok else "fail")
            estimates.append(est.to_dict() | {"verdict": verdict})
            table.append((alpha, name, est.mean, est.analytic, est.ratio, est.stderr, est.n_traj, verdict))
    payload = {
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "model": {"r0_V2": cfg.r0, "f_min_Hz": cfg.f_min, "f_max_Hz": cfg.f_max, "alphas": list(cfg.alphas)},
        "gate": {"k": gate.k, "T_s": gate.T},
        "device": {"kappa_per_V": cfg.kappa},
        "estimates": estimates,
    }
    _emit(cfg, "json", VALIDATE_TABLE, table, {"command": "validate"}, payload)
    stream = sys.stderr if cfg.out in (None, "-") else sys.stdout
    print(format_table(VALIDATE_TABLE, table), file=stream)
    return EXIT_OK


def format_table(columns, rows) -> str:
    def cell(v):
        if isinstance(v, float):
            return "n/a" if math.isnan(v) else f"{v:.4g}"
        return "n/a" if v is None else str(v)

    body = [[cell(v) for v in row] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in body]
    return "\n".join(lines)


COMMANDS = {
    "autocor": cmd_autocor,
    "psd": cmd_psd,
    "sweep": cmd_sweep,
    "pulse": cmd_pulse,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--preset", choices=sorted(PRESETS), help="bundled configuration")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--seed", type=int)
    common.add_argument("--grid-n", type=int, dest="grid_n", help="quadrature points per panel")
    common.add_argument("--kernel", choices=VARIANTS)
    common.add_argument("--noise", choices=("tlf", "fbm"))
    common.add_argument("--alpha", nargs="+", dest="alphas", metavar="A")
    common.add_argument("--T", nargs="+", dest="durations", metavar="DURATION", help="e.g. 10ns 1us")
    common.add_argument("--shape", nargs="+", dest="shapes", metavar="NAME", help=f"from {CATALOG}")
    common.add_argument("--r0", metavar="ENERGY", help="noise energy, e.g. 1mV2")
    common.add_argument("--k", type=float, help="SWAP exponent")
    common.add_argument("--axis", help="sweep axis")
    common.add_argument("--range", nargs=3, metavar=("START", "STOP", "N"), help="sweep range")
    common.add_argument("--scale", choices=("log", "linear"))
    common.add_argument("--raw", action="store_true", help="do not divide correlations by R0")
    common.add_argument("--max-iter", type=int, dest="max_iter")
    common.add_argument("--n-traj", type=int, dest="n_traj")
    common.add_argument("--n-t", type=int, dest="n_t")
    parser = argparse.ArgumentParser(prog="fracpulse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fracpulse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=func.__doc__.splitlines()[0])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Preset, then config file, then flags."""
    data = preset(args.preset) if args.preset else {}
    if args.config:
        data |= read_config_file(args.config)
    for key in ("out", "format", "seed", "grid_n", "kernel", "noise", "alphas", "durations", "shapes", "r0", "k",
                "max_iter", "n_traj", "n_t"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if args.raw:
        data["normalized"] = False
    if args.kernel == "fbm" and "noise" not in data:
        data["noise"] = "fbm"
    if args.axis or args.range or args.scale:
        sweep = dict(data.get("sweep") or {})
        if args.axis:
            sweep["axis"] = args.axis
        if args.range:
            start, stop, n = args.range
            try:
                sweep |= {"start": _number_or_text(start), "stop": _number_or_text(stop), "n": int(n)}
            except ValueError as exc:
                raise ConfigError(f"bad --range: {exc}") from exc
        if args.scale:
            sweep["scale"] = args.scale
        if "axis" not in sweep:
            raise ConfigError("--range and --scale need a sweep axis")
        data["sweep"] = sweep
    return RunConfig.from_dict(data)


def _number_or_text(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except ConvergenceFailure as exc:
        print(f"fracpulse: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OptimizationError as exc:
        print(f"fracpulse: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, ValueError) as exc:
        print(f"fracpulse: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fracpulse: cannot write {exc.filename or args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
