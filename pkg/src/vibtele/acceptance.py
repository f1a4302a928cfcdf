"""Acceptance checks, shared by ``vibtele verify`` and the pytest suite.

Every check builds its expected values independently of the code path it
exercises (literal branch formulas, Kronecker products, phase scans).
"""
from __future__ import annotations

import cmath
import math
import os
import subprocess
import sys
import tempfile
import time
import json
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Callable
from unittest import mock

import numpy as np
from scipy import stats

from . import protocol
from .dynamics import (
    PulseKind,
    PulseSpec,
    RamanGateSpec,
    antijc_unitary,
    carrier_unitary,
    jc_unitary,
    raman_unitary,
    wrap_phase,
)
from .noise import NoiseModel, standard_error, sweep_fidelity_vs_noise
from .protocol import (
    ION1, ION2, ION3, OUTCOMES, TRAP_A, TRAP_B,
    BobStrategy, Executor, ProtocolConfig, bell_coupling, cool_trapB_mode,
    correction_prescription, initial_state, make_epr, map_motional_to_internal,
    outcome_statistics, prepare_motional_superposition, run_teleportation, transport_ion2,
)
from .statevec import (
    StateVector, embed, fidelity_up_to_phase, measure_projective, outcome_distribution,
    reduced_density_matrix,
)

G, E = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number}. {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _random_pair(rng, margin=0.0) -> tuple[complex, complex]:
    th = rng.uniform(margin, math.pi - margin)
    ph = rng.uniform(0, 2 * math.pi)
    return complex(math.cos(th / 2)), cmath.exp(1j * ph) * math.sin(th / 2)


def _fock(n_max: int, *amps) -> np.ndarray:
    v = np.zeros(n_max + 1, dtype=complex)
    v[: len(amps)] = amps
    return v


def _kron(*vs) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vs:
        out = np.kron(out, v)
    return out


def _phase_aligned_error(got: np.ndarray, expected: np.ndarray) -> float:
    ov = np.vdot(expected, got)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.max(np.abs(got - phase * expected)))


def joint_branch_oracle(alpha, beta, theta, phiA, phiB, phi0) -> dict[str, complex]:
    """Literal amplitudes of the four-branch joint state, keyed ion1 ion2 ion3."""
    x = cmath.exp(2j * (phiB - phiA + theta / 2))
    y = cmath.exp(1j * (2 * phiB + phi0))
    t = cmath.exp(1j * theta)
    amp = {}
    pre = -1j * cmath.exp(2j * phiA)
    amp["eeg"], amp["eee"] = pre * alpha, pre * (-1j * x * beta)
    amp["ggg"], amp["gge"] = alpha, 1j * x * beta
    amp["egg"], amp["ege"] = -1j * t * beta, y * alpha
    pre = -1j * cmath.exp(-1j * phi0)
    amp["geg"], amp["gee"] = pre * (1j * t * beta), pre * y * alpha
    return {k: v / 2 for k, v in amp.items()}


# -- criteria -----------------------------------------------------------------


def c1_mapping(n_max: int = 3) -> tuple[bool, str]:
    rng = np.random.default_rng(101)
    worst = 1.0
    t0 = time.perf_counter()
    for _ in range(100):
        a, b = _random_pair(rng)
        theta = rng.uniform(0, 2 * math.pi)
        state = embed(initial_state(n_max), TRAP_A, _fock(n_max, a, b))
        out = map_motional_to_internal(state, theta)
        spin1 = a * E - 1j * cmath.exp(1j * theta) * b * G
        expected = _kron(spin1, _fock(n_max, 1), G, G, _fock(n_max, 1))
        worst = min(worst, fidelity_up_to_phase(out.amplitudes, expected))
    dt = time.perf_counter() - t0
    return worst >= 1 - 1e-10 and dt < 1.0, f"min fidelity 1-{1 - worst:.1e}, {dt:.3f}s (< 1s)"


def c2_epr(n_max: int = 3) -> tuple[bool, str]:
    rng = np.random.default_rng(202)
    worst_amp = worst_mode = 0.0
    for _ in range(20):
        phiB, phi0 = rng.uniform(0, 2 * math.pi, size=2)
        m = rng.normal(size=n_max + 1) + 1j * rng.normal(size=n_max + 1)
        m /= np.linalg.norm(m)
        state = embed(initial_state(n_max), TRAP_B, m)
        before = reduced_density_matrix(state, TRAP_B)
        out = make_epr(state, phiB, phi0)
        epr = (_kron(G, G) - 1j * cmath.exp(2j * phiB) * _kron(E, E)) / math.sqrt(2)
        expected = _kron(E, _fock(n_max, 1), epr, m)
        worst_amp = max(worst_amp, _phase_aligned_error(out.amplitudes, expected))
        worst_mode = max(worst_mode, float(np.max(np.abs(reduced_density_matrix(out, TRAP_B) - before))))
    ok = worst_amp < 1e-10 and worst_mode < 1e-12
    return ok, f"max amplitude error {worst_amp:.1e} (< 1e-10), mode change {worst_mode:.1e} (< 1e-12)"


def _bell_case(rng, n_max=3):
    a, b = _random_pair(rng)
    theta, phiA, phiB, phi0 = rng.uniform(0, 2 * math.pi, size=4)
    spin1 = a * E - 1j * cmath.exp(1j * theta) * b * G
    epr = (_kron(G, G) - 1j * cmath.exp(2j * phiB) * _kron(E, E)) / math.sqrt(2)
    layout = initial_state(n_max).layout.with_station(ION2, "A")
    state = StateVector(layout, _kron(spin1, _fock(n_max, 1), epr, _fock(n_max, 1)))
    out = bell_coupling(state, phiA, phi0)
    amps = joint_branch_oracle(a, b, theta, phiA, phiB, phi0)
    lvl = {"g": G, "e": E}
    expected = sum(
        v * _kron(lvl[k[0]], _fock(n_max, 1), lvl[k[1]], lvl[k[2]], _fock(n_max, 1))
        for k, v in amps.items()
    )
    return out, expected


def c3_joint_state() -> tuple[bool, str]:
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(50):
        out, expected = _bell_case(rng)
        worst = max(worst, _phase_aligned_error(out.amplitudes, expected))
    return worst < 1e-10, f"max branch amplitude error {worst:.1e} (< 1e-10)"


def c4_uniformity() -> tuple[bool, str]:
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(50):
        out, _ = _bell_case(rng)
        dist = outcome_distribution(out, [ION1, ION2])
        worst = max(worst, max(abs(p - 0.25) for p in dist.values()))
    cfg = ProtocolConfig.from_bloch(1.1, 0.7, canonical=True, theta=0.4, phi0=0.9, seed=404)
    counts = outcome_statistics(cfg, 40_000)
    pvalue = float(stats.chisquare([counts[o] for o in OUTCOMES]).pvalue)
    ok = worst < 1e-12 and pvalue > 0.001 and sum(counts.values()) == 40_000
    return ok, f"max |p - 1/4| {worst:.1e} (< 1e-12), chi-square p = {pvalue:.3f} (> 0.001), counts {counts}"


def c5_ideal_teleportation() -> tuple[bool, str]:
    rng = np.random.default_rng(505)
    worst_f, worst_leak = 1.0, 0.0
    t0 = time.perf_counter()
    for i in range(1000):
        a, b = _random_pair(rng)
        theta, phi0 = rng.uniform(0, 2 * math.pi, size=2)
        base = ProtocolConfig.canonical(phi0=phi0, alpha=a, beta=b, theta=theta, n_max=3, seed=i)
        for strategy in BobStrategy:
            for outcome in OUTCOMES:
                r = run_teleportation(replace(base, bob_strategy=strategy, forced_outcome=outcome))
                worst_f = min(worst_f, r.fidelity)
                worst_leak = max(worst_leak, r.leakage)
    dt = time.perf_counter() - t0
    ok = worst_f >= 1 - 1e-10 and worst_leak < 1e-20 and dt < 30
    return ok, f"8000 runs, min fidelity 1-{1 - worst_f:.1e}, max leakage {worst_leak:.1e}, {dt:.1f}s (< 30s)"


def _pre_correction(config: ProtocolConfig) -> np.ndarray:
    """Normalized ion3 (x) trapB state right after Alice's forced readout."""
    ex = Executor()
    _, state = prepare_motional_superposition(config.alpha, config.beta, state=initial_state(config.n_max), ex=ex)
    state = map_motional_to_internal(state, config.theta, ex=ex)
    state = make_epr(state, config.phiB, config.phi0, ex=ex)
    state = transport_ion2(state, ex=ex)
    state = cool_trapB_mode(state, ex=ex)
    state = bell_coupling(state, config.phiA, config.phi0, ex=ex)
    _, state, _ = measure_projective(state, [ION1, ION2], forced=config.forced_outcome)
    i1, i2 = ("ge".index(c) for c in config.forced_outcome)
    sub = state.tensor()[i1, 0, i2]
    return (sub / np.linalg.norm(sub)).reshape(-1)


def scan_best_phase(kind: PulseKind, psi: np.ndarray, target: np.ndarray, n_max: int,
                    step: float = 1e-4) -> float:
    """Laser phase maximizing trap-B fidelity: grid scan then Newton on dF/dphase."""
    build = jc_unitary if kind is PulseKind.JC else antijc_unitary
    # U(p) = sum_k e^{ikp} C_k, k in {-1, 0, 1}; recover C_k from three samples
    samples = [(p, build(math.pi, p, n_max)) for p in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
    comps = {k: sum(u * np.exp(-1j * k * p) for p, u in samples) / 3 for k in (-1, 0, 1)}
    vecs = {k: c @ psi for k, c in comps.items()}
    dim = n_max + 1
    # overlaps with |s> (x) |target> for s in g, e
    proj = np.zeros((2, 2 * dim), dtype=complex)
    proj[0, :dim] = target
    proj[1, dim:] = target
    o = {k: proj.conj() @ v for k, v in vecs.items()}

    grid = np.arange(0.0, 2 * math.pi, step)
    amp = sum(np.exp(1j * k * grid)[:, None] * o[k][None, :] for k in o)
    p = float(grid[int(np.argmax(np.sum(np.abs(amp) ** 2, axis=1)))])
    for _ in range(50):
        a = sum(np.exp(1j * k * p) * o[k] for k in o)
        da = sum(1j * k * np.exp(1j * k * p) * o[k] for k in o)
        dda = sum(-(k**2) * np.exp(1j * k * p) * o[k] for k in o)
        d1 = 2 * np.real(np.vdot(a, da))
        d2 = 2 * np.real(np.vdot(da, da) + np.vdot(a, dda))
        if d2 == 0:
            break
        delta = d1 / d2
        p -= delta
        if abs(delta) < 1e-15:
            break
    return p


def c6_table_oracle() -> tuple[bool, str]:
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(25):
        a, b = _random_pair(rng, margin=0.3)
        theta, phi0 = rng.uniform(0, 2 * math.pi, size=2)
        for outcome in OUTCOMES:
            cfg = ProtocolConfig.canonical(phi0=phi0, alpha=a, beta=b, theta=theta, forced_outcome=outcome)
            rx = correction_prescription(outcome, theta, cfg.phiA, cfg.phiB, cfg.phi0)
            psi = _pre_correction(cfg)
            target = _fock(cfg.n_max, *protocol.canonical_pair(a, b))
            best = scan_best_phase(rx.pulse_kind, psi, target, cfg.n_max)
            worst = max(worst, abs(wrap_phase(best - rx.laser_phase)))
    return worst < 1e-9, f"max |table - scan| = {worst:.1e} rad (< 1e-9) over 100 cases"


def c7_unitarity() -> tuple[bool, str]:
    rng = np.random.default_rng(707)
    worst = {}

    def err(u):
        return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))

    for _ in range(100):
        area, phase = rng.uniform(0, 4 * math.pi), rng.uniform(0, 2 * math.pi)
        n_max = int(rng.integers(1, 8))
        cases = {
            "carrier": carrier_unitary(area, phase),
            "jc": jc_unitary(area, phase, n_max),
            "antijc": antijc_unitary(area, phase, n_max),
            "raman": raman_unitary(RamanGateSpec("a", "b", *rng.uniform(0, 2 * math.pi, size=3),
                                                 angle=rng.uniform(0, 2 * math.pi))),
        }
        for k, u in cases.items():
            worst[k] = max(worst.get(k, 0.0), err(u))
    ok = all(v < 1e-12 for v in worst.values())
    return ok, "max |U†U - I|: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (< 1e-12)"


def c8_noise() -> tuple[bool, str]:
    cfg = ProtocolConfig.from_bloch(0.9, 1.3, canonical=True, theta=0.2, phi0=1.1, seed=808)
    ideal = run_teleportation(cfg).to_json()
    zero = run_teleportation(replace(cfg, noise=NoiseModel(0.0, 0.0, 0.0, 0.0))).to_json()
    identical = ideal == zero
    rows = sweep_fidelity_vs_noise(cfg, "pulse_area_sigma", [0.0, 0.02, 0.05, 0.1], 200)
    monotone = all(
        nxt.mean_fidelity <= cur.mean_fidelity + 2 * math.hypot(standard_error(cur), standard_error(nxt))
        for cur, nxt in zip(rows, rows[1:])
    )
    means = ", ".join(f"{r.value:g}:{r.mean_fidelity:.4f}" for r in rows)
    ok = identical and monotone and abs(rows[0].mean_fidelity - 1) < 1e-10
    return ok, f"zero-noise bit-identical={identical}, mean fidelity by sigma {means}"


def c9_networked(timeout: float = 60.0) -> tuple[bool, str]:
    seed, theta, phi0 = 909, 0.3, 0.8
    cfg = ProtocolConfig.from_bloch(1.0472, 0.5, canonical=True, theta=theta, phi0=phi0, seed=seed)
    ref = run_teleportation(cfg)
    exe = [sys.executable, "-m", "vibtele"]
    env = dict(os.environ, PYTHONUNBUFFERED="1")
    with tempfile.TemporaryDirectory() as tmp:
        tpath = os.path.join(tmp, "transcript.jsonl")
        host = subprocess.Popen(
            exe + ["serve", "--port", "0", "--seed", str(seed), "--phi0", repr(phi0),
                   "--canonical-phases", "--transcript", tpath, "--timeout", str(timeout)],
            stdout=subprocess.PIPE, text=True, env=env,
        )
        try:
            ready = host.stdout.readline().split()
            endpoint = ready[-1]
            bob = subprocess.Popen(exe + ["bob", "--endpoint", endpoint], stdout=subprocess.PIPE, text=True, env=env)
            alice = subprocess.run(
                exe + ["alice", "--endpoint", endpoint, "--alpha", repr(cfg.alpha), "--beta", repr(cfg.beta),
                       "--theta", repr(theta)],
                capture_output=True, text=True, env=env, timeout=timeout,
            )
            bob_out, _ = bob.communicate(timeout=timeout)
            host.wait(timeout=timeout)
        finally:
            for p in (host,):
                if p.poll() is None:
                    p.kill()
        if alice.returncode or bob.returncode or host.returncode:
            return False, f"process failure alice={alice.returncode} bob={bob.returncode} host={host.returncode}"
        report = protocol.FidelityReport.from_dict(json.loads(bob_out))
        with open(tpath) as fh:
            transcript = [json.loads(line) for line in fh]
    amp_err = max(
        abs(x - y)
        for x, y in zip(report.final_mode_state + report.target_state, ref.final_mode_state + ref.target_state)
    )
    same = (
        report.outcome == ref.outcome
        and abs(report.outcome_probability - ref.outcome_probability) < 1e-12
        and abs(report.fidelity - ref.fidelity) < 1e-12
        and report.leakage == ref.leakage
        and amp_err < 1e-12
    )
    to_bob = [e["relay"]["msg"] for e in transcript if "relay" in e and e["relay"]["to"] == "bob"]
    boundary = bool(to_bob) and all(
        m.get("type") == "classical" and set(m) == {"type", "outcome", "theta"} for m in to_bob
    )
    detail = (f"outcome {report.outcome} vs {ref.outcome}, amplitude error {amp_err:.1e} (< 1e-12), "
              f"fidelity {report.fidelity:.15f}, relays to bob {to_bob}")
    return same and boundary, detail


CRITERIA: list[tuple[int, str, Callable[[], tuple[bool, str]]]] = [
    (1, "mapping exactness", c1_mapping),
    (2, "EPR generation", c2_epr),
    (3, "joint-state amplitudes", c3_joint_state),
    (4, "outcome uniformity", c4_uniformity),
    (5, "ideal teleportation", c5_ideal_teleportation),
    (6, "correction-table oracle agreement", c6_table_oracle),
    (7, "unitarity", c7_unitarity),
    (8, "zero-noise reduction and noise monotonicity", c8_noise),
    (9, "networked equivalence", c9_networked),
]


@contextmanager
def sabotaged_table():
    """Test hook: corrupt one correction-table entry."""
    bad = dict(protocol._CONDITIONAL_TABLE)
    bad["gg"] = (PulseKind.JC, 0.5)
    with mock.patch.dict(protocol._CONDITIONAL_TABLE, bad):
        yield


def run_criterion(number: int) -> CriterionResult:
    _, name, fn = next(c for c in CRITERIA if c[0] == number)
    t0 = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crash is a failed criterion, reported by name
        passed, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CriterionResult(number, name, passed, detail, time.perf_counter() - t0)


def run_suite(numbers=None, sabotage: bool = False, echo=print) -> list[CriterionResult]:
    numbers = numbers or [c[0] for c in CRITERIA]
    results = []
    ctx = sabotaged_table() if sabotage else _null()
    with ctx:
        for n in numbers:
            r = run_criterion(n)
            if echo:
                echo(r.line())
            results.append(r)
    return results


@contextmanager
def _null():
    yield
