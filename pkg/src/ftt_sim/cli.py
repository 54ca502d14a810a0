"""Command-line surface: load a circuit config, run an analysis, write files.

Exit codes: 0 success, 1 config/usage error, 2 numerical failure, 3 I/O
failure.  Every data-producing command writes a manifest.json listing the
outputs; data files are byte-identical across reruns (timestamps live only
in the manifest).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import parse_config
from .catlab import (
    cat_correlation,
    kerr_evolve,
    required_truncation,
    square_grid,
    tau0_ns,
    tomography_sequence,
    wigner,
)
from .dynamics import simulate_iswap, simulate_x_half_pi
from .effective import effective_coupling_curve, effective_parameters, find_zero_coupling
from .errors import ConfigError, FttSimError
from .hamiltonian import spectrum_scan
from .output import render_heatmap, render_linechart, write_table

# coherence-time defaults for --noise, converted from ms
NOISE_DEFAULTS_NS = {
    "fluxonium": (309.42e6, 56.7e6),
    "transmon": (260.82e6, 506.99e6),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class RunManifest:
    command: str
    config_hash: str
    outputs: list[str]
    wall_time_s: float
    version: str
    threads: int


def _threads() -> int:
    raw = os.environ.get("FTT_SIM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"FTT_SIM_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError(f"FTT_SIM_THREADS must be >= 1, got {n}")
    return n


def _parse_sweep(text: str):
    try:
        name, rng = text.split("=")
        lo, hi, n = rng.split(":")
        return name, float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError(f"--sweep expects name=lo:hi:n, got {text!r}")


def _parse_complex(text: str) -> complex:
    try:
        re, im = text.split(",")
        return complex(float(re), float(im))
    except ValueError:
        raise ConfigError(f"expected re,im pair, got {text!r}")


def _load_spec(args):
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    return parse_config(text)


def _scalar_diagnostics(diag: dict) -> dict:
    out = {}
    for k, v in diag.items():
        if isinstance(v, (int, float, str, bool)):
            out[k] = v
    return out


def _gate_json(result) -> str:
    doc = {
        "fidelity": result.fidelity,
        "gate_time_ns": result.gate_time_ns,
        "leakage": result.leakage,
        "per_state_fidelities": result.per_state_fidelities,
        "diagnostics": _scalar_diagnostics(result.diagnostics),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def _cmd_spectrum(args, outdir: Path):
    spec = _load_spec(args)
    name, lo, hi, n = _parse_sweep(args.sweep)
    table = spectrum_scan(
        spec, name, np.linspace(lo, hi, n), k=args.levels,
        model=args.model, bare=args.bare,
    )
    csv_path = outdir / "spectrum.csv"
    write_table(table.rows(), table.header(), csv_path)
    svg = render_linechart(
        table.grid, [table.energies[:, j] for j in range(table.energies.shape[1])],
        [f"E{j}" for j in range(table.energies.shape[1])],
        xlabel=name, ylabel="E - E0 (GHz)", title="Spectrum scan",
    )
    svg_path = outdir / "spectrum.svg"
    svg_path.write_text(svg + "\n")
    return [csv_path, svg_path]


def _cmd_coupling_curve(args, outdir: Path):
    spec = _load_spec(args)
    if args.sweep:
        _, lo, hi, n = _parse_sweep(args.sweep)
    else:
        lo, hi, n = 4.0, 8.0, 401
    curve = effective_coupling_curve(spec, np.linspace(lo, hi, n))
    csv_path = outdir / "coupling_curve.csv"
    write_table(curve.rows(), curve.header(), csv_path)
    zero = find_zero_coupling(spec, lo, hi)
    zero_path = outdir / "zero_point.json"
    zero_path.write_text(json.dumps(
        {"omega_c_star": zero.omega_c_star, "residual": zero.residual_mhz,
         "bracket": list(zero.bracket)},
        indent=2, sort_keys=True) + "\n")
    svg = render_linechart(
        curve.omega_c, [curve.two_g_mhz], ["2g_eff"],
        xlabel="omega_c (GHz)", ylabel="2 g_eff (MHz)", title="Effective coupling",
    )
    svg_path = outdir / "coupling_curve.svg"
    svg_path.write_text(svg + "\n")
    return [csv_path, zero_path, svg_path]


def _write_gate_outputs(outdir: Path, prefix: str, result, trajs):
    paths = []
    json_path = outdir / f"{prefix}_result.json"
    json_path.write_text(_gate_json(result) + "\n")
    paths.append(json_path)
    for label, traj in trajs.items():
        p = outdir / f"{prefix}_traj_{label}.csv"
        write_table(traj.rows(), traj.header(), p)
        paths.append(p)
    first = next(iter(trajs.values()))
    pops = first.populations()
    svg = render_linechart(
        first.times, [pops[k] for k in ("00", "01", "10", "11")],
        ["P00", "P01", "P10", "P11"],
        xlabel="t (ns)", ylabel="population",
        title=f"{prefix} populations (initial {next(iter(trajs))})",
    )
    svg_path = outdir / f"{prefix}_populations.svg"
    svg_path.write_text(svg + "\n")
    paths.append(svg_path)
    return paths


def _cmd_gate(args, outdir: Path):
    spec = _load_spec(args)
    noise = NOISE_DEFAULTS_NS if args.noise else None
    if args.which == "x90":
        result, trajs = simulate_x_half_pi(spec, duration_ns=args.duration, noise=noise)
        return _write_gate_outputs(outdir, "x90", result, trajs)
    kwargs = {}
    if args.omega_c is not None:
        kwargs["omega_c_op"] = args.omega_c
        kwargs["gate_time_ns"] = None
    else:
        kwargs["gate_time_ns"] = args.gate_time
    result, trajs = simulate_iswap(spec, noise=noise, **kwargs)
    return _write_gate_outputs(outdir, "iswap", result, trajs)


def _cmd_cat(args, outdir: Path):
    alpha = _parse_complex(args.alpha)
    n_trunc = required_truncation(alpha) + 8
    t = args.time if args.time is not None else tau0_ns(args.kerr) / args.m
    state = kerr_evolve(alpha, args.kerr, t, n_trunc)
    grid = square_grid(args.extent, args.grid)
    wmap = wigner(state, grid)
    csv_path = outdir / "cat_wigner.csv"
    write_table(wmap.rows(), wmap.header(), csv_path)
    svg_path = outdir / "cat_wigner.svg"
    svg_path.write_text(render_heatmap(
        wmap, title=f"Kerr cat, m={args.m}, t={t:.4g} ns") + "\n")
    return [csv_path, svg_path]


def _cmd_correlation(args, outdir: Path):
    grid = square_grid(args.extent, args.grid)
    cmap = cat_correlation(args.n, args.m, grid, kerr_mhz=args.kerr)
    csv_path = outdir / "correlation.csv"
    write_table(cmap.rows(), cmap.header(), csv_path)
    svg_path = outdir / "correlation.svg"
    svg_path.write_text(render_heatmap(
        cmap, title=f"Cat correlation, n={args.n}, m={args.m}") + "\n")
    return [csv_path, svg_path]


def _cmd_sequence(args, outdir: Path):
    chi = None
    if args.config:
        spec = _load_spec(args)
        omega_c = args.omega_c
        if omega_c is None:
            omega_c = find_zero_coupling(spec).omega_c_star
        eff = effective_parameters(spec, omega_c)
        chi = (1e-3 * spec.couplings.g_2c) ** 2 / abs(eff.delta_2)
        fluxonium = spec.fluxonium if args.check_kerr else None
    else:
        fluxonium = None
    seq = tomography_sequence(
        _parse_complex(args.alpha), args.kerr, args.m, _parse_complex(args.gamma),
        parity_chi_ghz=chi, fluxonium=fluxonium,
    )
    doc = {
        "metadata": {k: v for k, v in seq.metadata.items()},
        "pulses": [
            {
                "target": target,
                "kind": e.kind,
                "start_ns": e.start_ns,
                "duration_ns": e.duration_ns,
                "metadata": dict(e.metadata),
            }
            for target, e in seq.entries
        ],
    }
    path = outdir / "sequence.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return [path]


def _build_parser() -> _Parser:
    p = _Parser(prog="ftt-sim", description="Fluxonium-transmon-transmon coupler simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand")

    def common(sp, config_required=True):
        sp.add_argument("--config", help="circuit config JSON")
        sp.add_argument("--out", default="./out", help="output directory")

    sp = sub.add_parser("spectrum", help="level scan against a circuit parameter")
    common(sp)
    sp.add_argument("--sweep", default="coupler.omega_c=5.0:7.0:81")
    sp.add_argument("--levels", type=int, default=6)
    sp.add_argument("--model", choices=("targets", "exact"), default="targets")
    sp.add_argument("--bare", action="store_true", help="scan the swept mode alone")

    sp = sub.add_parser("coupling-curve", help="effective coupling against coupler frequency")
    common(sp)
    sp.add_argument("--sweep", default=None, help="omega_c=lo:hi:n")

    sp = sub.add_parser("gate", help="pulse-level gate simulation")
    sp.add_argument("which", choices=("x90", "iswap"))
    common(sp)
    sp.add_argument("--duration", type=float, default=15.0, help="x90 pulse length (ns)")
    sp.add_argument("--gate-time", type=float, default=103.0, help="iswap gate time (ns)")
    sp.add_argument("--omega-c", type=float, default=None, help="iswap operating point (GHz)")
    sp.add_argument("--noise", action="store_true", help="Lindblad run with tabulated T1/T2")

    sp = sub.add_parser("cat", help="Kerr cat Wigner map")
    common(sp, config_required=False)
    sp.add_argument("--alpha", default="2,0")
    sp.add_argument("--m", type=int, choices=(2, 3, 4), default=2)
    sp.add_argument("--kerr", type=float, default=-5.95, help="Kerr coefficient (MHz)")
    sp.add_argument("--time", type=float, default=None, help="evolution time (ns), default tau0/m")
    sp.add_argument("--grid", type=int, default=201)
    sp.add_argument("--extent", type=float, default=4.0)

    sp = sub.add_parser("correlation", help="two-cat Wigner correlation map")
    common(sp, config_required=False)
    sp.add_argument("--n", type=int, default=2, help="photon number")
    sp.add_argument("--m", type=int, choices=(2, 3, 4), default=2)
    sp.add_argument("--kerr", type=float, default=-5.95)
    sp.add_argument("--grid", type=int, default=201)
    sp.add_argument("--extent", type=float, default=4.0)

    sp = sub.add_parser("sequence", help="Wigner-tomography pulse schedule")
    common(sp, config_required=False)
    sp.add_argument("--alpha", default="2,0")
    sp.add_argument("--m", type=int, choices=(2, 3, 4), default=2)
    sp.add_argument("--kerr", type=float, default=-5.95)
    sp.add_argument("--gamma", default="0,0")
    sp.add_argument("--omega-c", type=float, default=None)
    sp.add_argument("--check-kerr", action="store_true",
                    help="verify the Kerr target against the flux scan")
    return p


_DISPATCH = {
    "spectrum": _cmd_spectrum,
    "coupling-curve": _cmd_coupling_curve,
    "gate": _cmd_gate,
    "cat": _cmd_cat,
    "correlation": _cmd_correlation,
    "sequence": _cmd_sequence,
}


def run(argv=None):
    """Execute one CLI command; returns (exit_code, RunManifest or None)."""
    parser = _build_parser()
    started = time.monotonic()
    try:
        args = parser.parse_args(argv)
        if not args.subcommand:
            raise ConfigError("missing subcommand")
        threads = _threads()
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        outputs = _DISPATCH[args.subcommand](args, outdir)
        config_hash = ""
        if getattr(args, "config", None):
            config_hash = hashlib.sha256(Path(args.config).read_bytes()).hexdigest()
        manifest = RunManifest(
            command=" ".join([args.subcommand] + list(argv or sys.argv[1:])[1:]),
            config_hash=config_hash,
            outputs=[p.name for p in outputs],
            wall_time_s=time.monotonic() - started,
            version=__version__,
            threads=threads,
        )
        for p in outputs:
            if not p.exists():
                raise OSError(f"declared output missing: {p}")
        (outdir / "manifest.json").write_text(
            json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")
        return 0, manifest
    except ConfigError as exc:
        print(f"ftt-sim: error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return 1, None
    except FttSimError as exc:
        print(f"ftt-sim: numerical failure: {exc}", file=sys.stderr)
        return 2, None
    except OSError as exc:
        print(f"ftt-sim: i/o failure: {exc}", file=sys.stderr)
        return 3, None


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
