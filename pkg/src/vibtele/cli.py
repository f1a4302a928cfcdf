"""Command-line entry points.

Subcommands: run, sweep-bloch, stats, noise-sweep, serve, alice, bob, verify.
Config-shaped flags may also come from a JSON file given with ``--config``
(keys are the flag names with dashes replaced by underscores); explicit
flags win over the file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .noise import NoiseModel, sweep_csv, sweep_fidelity_vs_noise
from .protocol import (
    OUTCOMES,
    BobStrategy,
    ProtocolConfig,
    canonical_raman_phase,
    derive_seed,
    outcome_statistics,
    run_teleportation,
)

ENDPOINT_ENV = "VIBTELE_ENDPOINT"
DEFAULT_ENDPOINT = "127.0.0.1:8765"

# flag dest -> default applied after merging the config file
_CONFIG_DEFAULTS = {
    "alpha": None, "beta": None, "bloch_theta": None, "bloch_phi": None,
    "theta": 0.0, "phiA": None, "phiB": None, "phi0": 0.0, "varphi": 0.0,
    "canonical_phases": False, "nmax": 3, "strategy": BobStrategy.CONDITIONAL_PULSE.value,
    "outcome": None, "seed": 0,
    "pulse_area_sigma": 0.0, "phase_jitter_sigma": 0.0, "transport_dephasing_p": 0.0, "heating_p": 0.0,
    "noise": None,
}


class UsageError(Exception):
    pass


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _add_state_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("teleported state")
    g.add_argument("--alpha", type=_complex, help="amplitude of |0>, e.g. 0.6 or 0.6+0.1j")
    g.add_argument("--beta", type=_complex, help="amplitude of |1>")
    g.add_argument("--bloch-theta", type=float, help="polar angle: alpha = cos(t/2)")
    g.add_argument("--bloch-phi", type=float, help="azimuth: beta = e^{i phi} sin(t/2)")
    g.add_argument("--theta", type=float, help="mapping laser phase")


def _add_phase_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("Raman phases")
    g.add_argument("--phiA", type=float, help="trap A Raman phase")
    g.add_argument("--phiB", type=float, help="trap B Raman phase")
    g.add_argument("--phi0", type=float, help="equilibrium-separation phase")
    g.add_argument("--varphi", type=float, help="overall Raman bracket phase (default 0)")
    g.add_argument("--canonical-phases", action="store_true", default=None,
                   help="set phiA = phiB = pi - phi0/2")
    g.add_argument("--nmax", type=int, help="Fock truncation (>= 2)")
    g.add_argument("--strategy", choices=[s.value for s in BobStrategy])
    g.add_argument("--seed", type=int)


def _add_config_flags(p: argparse.ArgumentParser, noise: bool = True) -> None:
    p.add_argument("--config", help="JSON file with flag values")
    _add_state_flags(p)
    _add_phase_flags(p)
    p.add_argument("--outcome", choices=OUTCOMES, help="force Alice's measurement outcome")
    if noise:
        g = p.add_argument_group("noise")
        g.add_argument("--pulse-area-sigma", type=float)
        g.add_argument("--phase-jitter-sigma", type=float)
        g.add_argument("--transport-dephasing-p", type=float)
        g.add_argument("--heating-p", type=float)
        g.add_argument("--noise", action="append", metavar="KNOB=VALUE",
                       help="alternative noise syntax, repeatable")


def _merged(args: argparse.Namespace) -> dict:
    values = {k: getattr(args, k, None) for k in _CONFIG_DEFAULTS}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            from_file = json.load(fh)
        unknown = set(from_file) - set(_CONFIG_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        for k, v in from_file.items():
            if values.get(k) is None:
                values[k] = _complex(str(v)) if k in ("alpha", "beta") and v is not None else v
    for k, default in _CONFIG_DEFAULTS.items():
        if values.get(k) is None:
            values[k] = default
    return values


def config_from_args(args: argparse.Namespace) -> ProtocolConfig:
    v = _merged(args)
    noise = {k: float(v[k]) for k in NoiseModel.knobs()}
    for item in v["noise"] or []:
        key, sep, val = item.partition("=")
        if not sep or key not in noise:
            raise UsageError(f"bad --noise {item!r}; knobs are {', '.join(NoiseModel.knobs())}")
        noise[key] = float(val)
    has_bloch = v["bloch_theta"] is not None or v["bloch_phi"] is not None
    has_amps = v["alpha"] is not None or v["beta"] is not None
    if has_bloch and has_amps:
        raise UsageError("give either --alpha/--beta or --bloch-theta/--bloch-phi, not both")
    if has_bloch:
        t, f = v["bloch_theta"] or 0.0, v["bloch_phi"] or 0.0
        alpha, beta = complex(math.cos(t / 2)), complex(np.exp(1j * f) * math.sin(t / 2))
    else:
        alpha = v["alpha"] if v["alpha"] is not None else 1.0
        beta = v["beta"] if v["beta"] is not None else 0.0
    phi0 = float(v["phi0"])
    canonical = bool(v["canonical_phases"])
    phiA, phiB = v["phiA"], v["phiB"]
    if canonical:
        phiA = canonical_raman_phase(phi0) if phiA is None else phiA
        phiB = canonical_raman_phase(phi0) if phiB is None else phiB
    try:
        return ProtocolConfig(
            alpha=alpha, beta=beta, theta=float(v["theta"]),
            phiA=float(math.pi if phiA is None else phiA), phiB=float(math.pi if phiB is None else phiB),
            phi0=phi0, varphi=float(v["varphi"]), n_max=int(v["nmax"]),
            bob_strategy=v["strategy"], forced_outcome=v["outcome"], seed=int(v["seed"]),
            noise=NoiseModel(**noise), canonical_phases=canonical,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def config_to_argv(config: ProtocolConfig) -> list[str]:
    """Flags that parse back to exactly ``config``.

    Values are attached with ``=`` so negative numbers are not read as flags.
    """
    pairs = [
        ("alpha", repr(config.alpha)), ("beta", repr(config.beta)), ("theta", repr(config.theta)),
        ("phiA", repr(config.phiA)), ("phiB", repr(config.phiB)), ("phi0", repr(config.phi0)),
        ("varphi", repr(config.varphi)), ("nmax", str(config.n_max)),
        ("strategy", config.bob_strategy.value), ("seed", str(config.seed)),
    ]
    if config.forced_outcome:
        pairs.append(("outcome", config.forced_outcome))
    for knob in NoiseModel.knobs():
        pairs.append((knob.replace("_", "-"), repr(getattr(config.noise, knob))))
    argv = [f"--{k}={v}" for k, v in pairs]
    if config.canonical_phases:
        argv.append("--canonical-phases")
    return argv


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands --------------------------------------------------------------


def cmd_run(args) -> int:
    report = run_teleportation(config_from_args(args))
    text = report.to_csv() if args.format == "csv" else json.dumps(report.to_dict(), indent=2) + "\n"
    _emit(text, args.output)
    return 0


def _bloch_point(job):
    config, i, t, f, outcome = job
    alpha, beta = math.cos(t / 2), complex(np.exp(1j * f) * math.sin(t / 2))
    cfg = replace(config, alpha=alpha, beta=beta, forced_outcome=outcome, seed=derive_seed(config.seed, i))
    return t, f, outcome, run_teleportation(cfg).fidelity


def cmd_sweep_bloch(args) -> int:
    if args.density < 2:
        raise UsageError("--density must be >= 2")
    base = config_from_args(args)
    thetas = np.linspace(0.0, math.pi, args.density)
    phis = np.linspace(0.0, 2 * math.pi, args.density, endpoint=False)
    jobs = []
    for t in thetas:
        for f in phis:
            for outcome in OUTCOMES:
                jobs.append((base, len(jobs), float(t), float(f), outcome))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_bloch_point, jobs, chunksize=16))
    else:
        rows = [_bloch_point(j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bloch_theta", "bloch_phi", "outcome", "fidelity"])
    for t, f, outcome, fid in rows:
        w.writerow([f"{t:.17g}", f"{f:.17g}", outcome, f"{fid:.17g}"])
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_stats(args) -> int:
    counts = outcome_statistics(config_from_args(args), args.trials)
    if args.format == "csv":
        text = "outcome,count\n" + "".join(f"{o},{counts[o]}\n" for o in OUTCOMES)
    else:
        text = json.dumps(counts) + "\n"
    _emit(text, args.output)
    return 0


def cmd_noise_sweep(args) -> int:
    grid = [float(x) for x in args.grid.split(",") if x.strip()]
    try:
        rows = sweep_fidelity_vs_noise(config_from_args(args), args.knob, grid, args.trials)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(sweep_csv(rows), args.output)
    return 0


def _endpoint(args) -> str:
    return args.endpoint or os.environ.get(ENDPOINT_ENV, DEFAULT_ENDPOINT)


def cmd_serve(args) -> int:
    from .netharness import SessionConfig, parse_endpoint, serve

    cfg = config_from_args(args)
    host, port = parse_endpoint(_endpoint(args))
    if args.port is not None:
        port = args.port
    session = SessionConfig(cfg.seed, cfg.phiA, cfg.phiB, cfg.phi0, cfg.varphi, cfg.n_max, cfg.bob_strategy,
                            host, port)

    def ready(h, p):
        print(f"listening on {h}:{p}", flush=True)

    serve(session, args.transcript, on_ready=ready, timeout=args.timeout)
    return 0


def cmd_alice(args) -> int:
    from .netharness import alice_client

    cfg = config_from_args(args)
    message = alice_client(_endpoint(args), cfg.alpha, cfg.beta, cfg.theta, cfg.forced_outcome)
    print(json.dumps(message.as_dict()))
    return 0


def cmd_bob(args) -> int:
    from .netharness import bob_client

    report = bob_client(_endpoint(args))
    _emit(json.dumps(report.to_dict()) + "\n", args.output)
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_suite

    numbers = [int(x) for x in args.only.split(",")] if args.only else None
    results = run_suite(numbers, sabotage=args.sabotage_table)
    failed = [r for r in results if not r.passed]
    if failed:
        print("FAILED: " + ", ".join(f"{r.number} ({r.name})" for r in failed))
        return 1
    print(f"all {len(results)} criteria passed")
    return 0


def _sub(sub, name: str, **kw) -> argparse.ArgumentParser:
    p = sub.add_parser(name, **kw)
    p.set_defaults(parser=p)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibtele", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = _sub(sub, "run", help="one teleportation run")
    _add_config_flags(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output")
    p.set_defaults(func=cmd_run)

    p = _sub(sub, "sweep-bloch", help="fidelity over a Bloch-sphere grid, all outcomes")
    _add_config_flags(p)
    p.add_argument("--density", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output")
    p.set_defaults(func=cmd_sweep_bloch)

    p = _sub(sub, "stats", help="outcome counts over repeated measurements")
    _add_config_flags(p)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output")
    p.set_defaults(func=cmd_stats)

    p = _sub(sub, "noise-sweep", help="mean fidelity against one noise knob")
    _add_config_flags(p)
    p.add_argument("--knob", required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--output")
    p.set_defaults(func=cmd_noise_sweep)

    p = _sub(sub, "serve", help="host a networked session")
    _add_config_flags(p, noise=False)
    p.add_argument("--endpoint", help=f"host:port (default ${ENDPOINT_ENV} or {DEFAULT_ENDPOINT})")
    p.add_argument("--port", type=int, help="override the endpoint port; 0 picks a free one")
    p.add_argument("--transcript", help="write the JSONL transcript here")
    p.add_argument("--timeout", type=float, default=None, help="give up after this many seconds")
    p.set_defaults(func=cmd_serve)

    p = _sub(sub, "alice", help="run Alice's client")
    p.add_argument("--config")
    _add_state_flags(p)
    p.add_argument("--outcome", choices=OUTCOMES)
    p.add_argument("--endpoint")
    p.set_defaults(func=cmd_alice)

    p = _sub(sub, "bob", help="run Bob's client")
    p.add_argument("--endpoint")
    p.add_argument("--output")
    p.set_defaults(func=cmd_bob)

    p = _sub(sub, "verify", help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--sabotage-table", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        args.parser.print_usage(sys.stderr)
        print(f"vibtele {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        # network failures: refused connection, host timeout, rejected command
        print(f"vibtele {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
