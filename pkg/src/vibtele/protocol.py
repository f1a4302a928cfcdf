"""Motional-state teleportation between two traps.

Register layout (fixed order): ``ion1.spin, trapA.mode, ion2.spin,
ion3.spin, trapB.mode``.  Ion 1 and trap A belong to station A; ion 2,
ion 3 and trap B start at station B.  Each run is

    prepare -> map -> EPR -> transport -> cool -> joint gate -> measure
    -> classical message -> correction + reverse mapping -> report

Bob's correction is computed by :class:`BobStation`, which only ever sees a
:class:`ClassicalMessage` and the pre-agreed Raman phases.
"""
from __future__ import annotations

import cmath
import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .dynamics import (
    PulseKind,
    PulseSpec,
    RamanGateSpec,
    pi_rotation,
    pulse_unitary,
    raman_unitary,
    wrap_phase,
)
from .noise import NoiseModel, apply_heating, apply_transport_dephasing, perturb_pulse, perturb_raman
from .statevec import (
    Layout,
    StateError,
    StateVector,
    SubsystemDescriptor,
    apply_unitary,
    canonical_phase,
    extract_subsystem,
    make_basis_state,
    measure_projective,
    outcome_distribution,
    population_above,
    reduced_density_matrix,
)

ION1, ION2, ION3 = "ion1.spin", "ion2.spin", "ion3.spin"
TRAP_A, TRAP_B = "trapA.mode", "trapB.mode"
OUTCOMES = ("ee", "gg", "eg", "ge")
BELL_ANGLE = math.pi / 4
AMPLITUDE_TOL = 1e-12


class BobStrategy(str, Enum):
    CONDITIONAL_PULSE = "conditional_pulse"
    ROTATE_THEN_ANTIJC = "rotate_then_antijc"


def canonical_raman_phase(phi0: float) -> float:
    """Raman phase ``π - φ0/2`` used by both traps in the canonical setting."""
    return math.pi - phi0 / 2


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)[0])


def rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(measurement, noise) generators; the measurement stream is shared with the host."""
    meas, noise = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(meas), np.random.default_rng(noise)


def standard_layout(n_max: int) -> Layout:
    subs = (
        SubsystemDescriptor.spin(ION1),
        SubsystemDescriptor.mode(TRAP_A, n_max),
        SubsystemDescriptor.spin(ION2),
        SubsystemDescriptor.spin(ION3),
        SubsystemDescriptor.mode(TRAP_B, n_max),
    )
    stations = {ION1: "A", TRAP_A: "A", ION2: "B", ION3: "B", TRAP_B: "B"}
    return Layout(subs, stations)


def initial_state(n_max: int) -> StateVector:
    """Ion 1 excited, ions 2 and 3 in ground, both modes cooled."""
    return make_basis_state(
        standard_layout(n_max), {ION1: "e", TRAP_A: 0, ION2: "g", ION3: "g", TRAP_B: 0}
    )


# -- configuration and messages ----------------------------------------------


def _c(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


@dataclass(frozen=True)
class ProtocolConfig:
    alpha: complex = 1.0
    beta: complex = 0.0
    theta: float = 0.0
    phiA: float = math.pi
    phiB: float = math.pi
    phi0: float = 0.0
    varphi: float = 0.0
    n_max: int = 3
    bob_strategy: BobStrategy = BobStrategy.CONDITIONAL_PULSE
    forced_outcome: str | None = None
    seed: int = 0
    noise: NoiseModel = field(default_factory=NoiseModel)
    canonical_phases: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        object.__setattr__(self, "bob_strategy", BobStrategy(self.bob_strategy))
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1) > AMPLITUDE_TOL:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2 so leakage above n=1 is observable")
        if self.forced_outcome is not None and self.forced_outcome not in OUTCOMES:
            raise ValueError(f"forced outcome must be one of {OUTCOMES}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.canonical_phases:
            target = canonical_raman_phase(self.phi0)
            if abs(self.phiA - target) > 1e-12 or abs(self.phiB - target) > 1e-12:
                raise ValueError("canonical phases require phiA = phiB = pi - phi0/2")

    @classmethod
    def canonical(cls, phi0: float = 0.0, **kw) -> "ProtocolConfig":
        p = canonical_raman_phase(phi0)
        return cls(phiA=p, phiB=p, phi0=phi0, canonical_phases=True, **kw)

    @classmethod
    def from_bloch(cls, bloch_theta: float, bloch_phi: float, canonical: bool = False, **kw):
        alpha = math.cos(bloch_theta / 2)
        beta = cmath.exp(1j * bloch_phi) * math.sin(bloch_theta / 2)
        if canonical:
            return cls.canonical(alpha=alpha, beta=beta, **kw)
        return cls(alpha=alpha, beta=beta, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = _c(self.alpha)
        d["beta"] = _c(self.beta)
        d["bob_strategy"] = self.bob_strategy.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolConfig":
        d = dict(d)
        for k in ("alpha", "beta"):
            if isinstance(d.get(k), (list, tuple)):
                d[k] = complex(*d[k])
        if isinstance(d.get("noise"), dict):
            d["noise"] = NoiseModel(**d["noise"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ClassicalMessage:
    outcome: str
    theta: float

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}")

    def as_dict(self) -> dict:
        return {"outcome": self.outcome, "theta": float(self.theta)}


@dataclass(frozen=True)
class CorrectionPrescription:
    """Bob's pulse plan.

    ``pulse_phase`` is reported as χ (JC) or θ̃ (anti-JC) in the closed-form
    correction table; for anti-JC the applied laser phase in this package's
    pulse convention is ``-θ̃ - π/2``.
    """

    pulse_kind: PulseKind
    pulse_phase: float
    pre_rotation: str = "none"

    @property
    def laser_phase(self) -> float:
        if self.pulse_kind is PulseKind.JC:
            return wrap_phase(self.pulse_phase)
        return wrap_phase(-self.pulse_phase - math.pi / 2)

    def pulses(self, ion: str = ION3, mode: str = TRAP_B) -> list[PulseSpec]:
        seq = [PulseSpec(PulseKind.CARRIER, ion, None, a, p) for a, p in pi_rotation(self.pre_rotation)]
        seq.append(PulseSpec(self.pulse_kind, ion, mode, math.pi, self.laser_phase))
        return seq

    def as_dict(self) -> dict:
        return {
            "pulse_kind": self.pulse_kind.value,
            "pulse_phase": self.pulse_phase,
            "laser_phase": self.laser_phase,
            "pre_rotation": self.pre_rotation,
        }


# outcome -> (pulse kind, constant offset); see correction_prescription
_CONDITIONAL_TABLE = {
    "ee": (PulseKind.JC, math.pi),
    "gg": (PulseKind.JC, 0.0),
    "eg": (PulseKind.ANTIJC, math.pi / 2),
    "ge": (PulseKind.ANTIJC, -math.pi / 2),
}
# π-rotation on ion 3 that turns each branch into the mapped ion-1 state
_ROTATION_TABLE = {"ee": "x", "gg": "y", "eg": "none", "ge": "z"}


def correction_prescription(
    outcome: str,
    theta: float,
    phiA: float,
    phiB: float,
    phi0: float,
    strategy: BobStrategy | str = BobStrategy.CONDITIONAL_PULSE,
) -> CorrectionPrescription:
    """Pulse that leaves trap B in the teleported state, by zeroing exponents.

    With ``Φ = θ + 2(φB - φA)`` and ``Ψ = 2φB + φ0`` the conditional-pulse
    phases are ``χ = π - Φ`` (ee), ``χ = -Φ`` (gg), ``θ̃ = π/2 + Ψ - θ`` (eg)
    and ``θ̃ = -π/2 + Ψ - θ`` (ge).
    """
    if outcome not in OUTCOMES:
        raise ValueError(f"outcome must be one of {OUTCOMES}")
    strategy = BobStrategy(strategy)
    big_phi = theta + 2 * (phiB - phiA)
    psi = 2 * phiB + phi0
    if strategy is BobStrategy.CONDITIONAL_PULSE:
        kind, offset = _CONDITIONAL_TABLE[outcome]
        if kind is PulseKind.JC:
            phase = offset - big_phi
        else:
            phase = offset + psi - theta
        return CorrectionPrescription(kind, wrap_phase(phase))
    axis = _ROTATION_TABLE[outcome]
    # after the rotation ion 3 holds α|e> - i e^{i eff} β|g>
    eff = big_phi if outcome in ("ee", "gg") else theta - psi
    laser = eff + math.pi
    return CorrectionPrescription(PulseKind.ANTIJC, wrap_phase(-laser - math.pi / 2), axis)


@dataclass(frozen=True)
class SessionConstants:
    """Everything agreed between the stations before the run."""

    phiA: float
    phiB: float
    phi0: float
    varphi: float = 0.0
    n_max: int = 3
    bob_strategy: BobStrategy = BobStrategy.CONDITIONAL_PULSE

    def __post_init__(self):
        object.__setattr__(self, "bob_strategy", BobStrategy(self.bob_strategy))

    @classmethod
    def from_config(cls, config: ProtocolConfig) -> "SessionConstants":
        return cls(config.phiA, config.phiB, config.phi0, config.varphi, config.n_max, config.bob_strategy)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["bob_strategy"] = self.bob_strategy.value
        return d


class BobStation:
    """Receiver logic; has no access to α, β or Alice's state."""

    def __init__(self, constants: SessionConstants):
        self.constants = constants

    def prescribe(self, message: ClassicalMessage) -> CorrectionPrescription:
        c = self.constants
        return correction_prescription(message.outcome, message.theta, c.phiA, c.phiB, c.phi0, c.bob_strategy)


# -- execution ----------------------------------------------------------------


class Executor:
    """Applies operations, injects noise and keeps the transcript."""

    def __init__(self, noise: NoiseModel | None = None, rng: np.random.Generator | None = None):
        self.noise = noise or NoiseModel()
        self.rng = rng
        self.transcript: list[dict] = []
        self.max_leakage = 0.0

    def _done(self, state: StateVector, entry: dict) -> StateVector:
        self.transcript.append(entry)
        self.max_leakage = max(self.max_leakage, population_above(state, 2))
        return state

    def pulse(self, state: StateVector, spec: PulseSpec, label: str | None = None) -> StateVector:
        spec = perturb_pulse(spec, self.noise, self.rng)
        n_max = state.layout.descriptor(spec.mode).dimension - 1 if spec.mode else 1
        state = apply_unitary(state, pulse_unitary(spec, n_max), spec.targets)
        entry = {"op": "pulse", **spec.as_dict()}
        if label:
            entry["label"] = label
        return self._done(state, entry)

    def raman(self, state: StateVector, spec: RamanGateSpec) -> StateVector:
        spec = perturb_raman(spec, self.noise, self.rng)
        state = apply_unitary(state, raman_unitary(spec), [spec.ion_j, spec.ion_k])
        return self._done(state, {"op": "raman", **spec.as_dict()})

    def dephase(self, state: StateVector, ion: str) -> StateVector:
        state, flipped = apply_transport_dephasing(state, ion, self.noise.transport_dephasing_p, self.rng)
        if flipped:
            self.transcript.append({"op": "dephasing", "ion": ion})
        return state

    def heat(self, state: StateVector) -> StateVector:
        if self.noise.heating_p == 0:
            return state
        for mode in (TRAP_A, TRAP_B):
            state, jumped = apply_heating(state, mode, self.noise.heating_p, self.rng)
            if jumped:
                self._done(state, {"op": "heating", "mode": mode})
        return state

    def note(self, state: StateVector, entry: dict) -> StateVector:
        return self._done(state, entry)


def _ex(ex: Executor | None) -> Executor:
    return ex if ex is not None else Executor()


def _joint_probability(state: StateVector, levels: dict[str, int]) -> float:
    psi = state.tensor()
    sl = [slice(None)] * psi.ndim
    for label, level in levels.items():
        sl[state.layout.index(label)] = level
    return float(np.sum(np.abs(psi[tuple(sl)]) ** 2))


def prep_pulses(alpha: complex, beta: complex, prep_phase: float = 0.0,
                ion: str = ION1, mode: str = TRAP_A) -> list[PulseSpec]:
    """Carrier then anti-JC π pulse taking ``|e,0>`` to ``|e>(α|0> + β|1>)`` up to a global phase.

    The carrier rotates ``|e> -> cos(A/2)|e> - i e^{-iφc} sin(A/2)|g>`` and the
    anti-JC moves ``|g,0> -> -i e^{-iθp}|e,1>``, so the mode carries
    ``cos(A/2)|0> - e^{-i(φc+θp)} sin(A/2)|1>``.
    """
    alpha, beta = complex(alpha), complex(beta)
    area = 2 * math.acos(min(1.0, abs(alpha)))
    arg_a = cmath.phase(alpha) if alpha != 0 else 0.0
    arg_b = cmath.phase(beta) if beta != 0 else 0.0
    carrier_phase = math.pi - arg_b + arg_a - prep_phase if beta != 0 else 0.0
    return [
        PulseSpec(PulseKind.CARRIER, ion, None, area, carrier_phase),
        PulseSpec(PulseKind.ANTIJC, ion, mode, math.pi, prep_phase),
    ]


def prepare_motional_superposition(
    alpha: complex,
    beta: complex,
    prep_phase: float = 0.0,
    state: StateVector | None = None,
    n_max: int = 3,
    ex: Executor | None = None,
) -> tuple[list[PulseSpec], StateVector]:
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > AMPLITUDE_TOL:
        raise ValueError("(alpha, beta) must be normalized")
    ex = _ex(ex)
    if state is None:
        state = initial_state(n_max)
    if abs(_joint_probability(state, {ION1: 1, TRAP_A: 0}) - 1) > AMPLITUDE_TOL:
        raise StateError("ion 1 must start in |e, 0>")
    pulses = prep_pulses(alpha, beta, prep_phase)
    for p in pulses:
        state = ex.pulse(state, p, label="prep")
    return pulses, state


def map_motional_to_internal(
    state: StateVector,
    theta: float,
    ion: str = ION1,
    mode: str = TRAP_A,
    ex: Executor | None = None,
    check: bool = True,
) -> StateVector:
    """Anti-JC π pulse: ``|e>(α|0> + β|1>) -> (α|e> - i e^{iθ} β|g>)|0>``."""
    if check:
        if abs(_joint_probability(state, {ion: 1}) - 1) > AMPLITUDE_TOL:
            raise StateError(f"{ion} must be in |e> before mapping")
        mode_dim = state.layout.descriptor(mode).dimension
        above = sum(_joint_probability(state, {mode: n}) for n in range(2, mode_dim))
        if above > AMPLITUDE_TOL:
            raise StateError(f"{mode} has population {above:.3e} above n=1")
    state = _ex(ex).pulse(state, PulseSpec(PulseKind.ANTIJC, ion, mode, math.pi, theta), label="map")
    if check and abs(_joint_probability(state, {mode: 0}) - 1) > AMPLITUDE_TOL:
        raise StateError(f"{mode} not returned to |0> by the mapping")
    return state


def make_epr(
    state: StateVector,
    phiB: float,
    phi0: float = 0.0,
    varphi: float = 0.0,
    ion2: str = ION2,
    ion3: str = ION3,
    ex: Executor | None = None,
    check: bool = True,
) -> StateVector:
    if check and abs(_joint_probability(state, {ion2: 0, ion3: 0}) - 1) > AMPLITUDE_TOL:
        raise StateError("EPR generation needs both ions in |g, g>")
    spec = RamanGateSpec(ion2, ion3, phiB, phi0, varphi, BELL_ANGLE)
    return _ex(ex).raman(state, spec)


def transport_ion2(state: StateVector, ion: str = ION2, ex: Executor | None = None,
                   destination: str = "A") -> StateVector:
    """Move ``ion`` to ``destination``: a relabelling plus optional dephasing."""
    if state.layout.station_of[ion] == destination:
        raise StateError(f"{ion} is already at station {destination}")
    ex = _ex(ex)
    state = state.with_layout(state.layout.with_station(ion, destination))
    state = ex.dephase(state, ion)
    return ex.note(state, {"op": "transport", "ion": ion, "station": destination})


def cool_trapB_mode(state: StateVector, mode: str = TRAP_B, tol: float = 1e-9,
                    ex: Executor | None = None) -> StateVector:
    """Reset a separable mode to ``|0>`` leaving every other factor untouched."""
    factor = extract_subsystem(state, mode, tol)
    axis = state.layout.index(mode)
    psi = np.moveaxis(state.tensor(), axis, -1)
    rest = psi @ factor.conj()
    rest = rest / np.linalg.norm(rest)
    out = np.zeros_like(psi)
    out[..., 0] = rest
    state = StateVector(state.layout, np.moveaxis(out, -1, axis))
    return _ex(ex).note(state, {"op": "cool", "mode": mode})


def bell_coupling(
    state: StateVector,
    phiA: float,
    phi0: float = 0.0,
    varphi: float = 0.0,
    ion1: str = ION1,
    ion2: str = ION2,
    ex: Executor | None = None,
) -> StateVector:
    """Carrier π on ion 1 followed by the π/4 Raman gate on ions 1 and 2.

    The Raman gate conserves the pair's excitation parity; the carrier π
    (phase 0, a global ``-i`` on the mapped state) swaps ion 1's g/e so the
    output has the joint-branch structure Bob's table assumes.
    """
    stations = state.layout.station_of
    if stations[ion1] != "A" or stations[ion2] != "A":
        raise StateError(f"locality violation: {ion1} and {ion2} must both be at station A")
    ex = _ex(ex)
    state = ex.pulse(state, PulseSpec(PulseKind.CARRIER, ion1, None, math.pi, 0.0), label="bell")
    return ex.raman(state, RamanGateSpec(ion1, ion2, phiA, phi0, varphi, BELL_ANGLE))


def bob_correct_and_unmap(
    state: StateVector,
    prescription: CorrectionPrescription,
    ion3: str = ION3,
    mode: str = TRAP_B,
    measured: Sequence[str] = (ION1, ION2),
    ex: Executor | None = None,
    check: bool = True,
) -> StateVector:
    if check:
        if abs(_joint_probability(state, {mode: 0}) - 1) > AMPLITUDE_TOL:
            raise StateError(f"{mode} must be cooled to |0> before the reverse mapping")
        dist = outcome_distribution(state, list(measured))
        if max(dist.values()) < 1 - AMPLITUDE_TOL:
            raise StateError(f"{list(measured)} have not been measured")
    ex = _ex(ex)
    pulses = prescription.pulses(ion3, mode)
    for p in pulses[:-1]:
        state = ex.pulse(state, p, label="rotation")
    state = ex.pulse(state, pulses[-1], label="unmap")
    if check:
        level = 0 if prescription.pulse_kind is PulseKind.JC else 1
        if abs(_joint_probability(state, {ion3: level}) - 1) > 1e-10:
            raise StateError(f"{ion3} not left in a definite internal level")
    return state


# -- reporting ----------------------------------------------------------------


@dataclass
class FidelityReport:
    outcome: str
    outcome_probability: float
    fidelity: float
    final_mode_state: tuple[complex, complex]
    target_state: tuple[complex, complex]
    leakage: float
    transcript: list[dict] = field(default_factory=list)
    seed: int | None = None
    config_hash: str | None = None
    complete: bool = True

    CSV_HEADER = ("outcome", "probability", "fidelity", "leakage", "seed", "config_hash")

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "outcome_probability": self.outcome_probability,
            "fidelity": self.fidelity,
            "final_mode_state": [_c(z) for z in self.final_mode_state],
            "target_state": [_c(z) for z in self.target_state],
            "leakage": self.leakage,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "complete": self.complete,
            "transcript": self.transcript,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FidelityReport":
        return cls(
            outcome=d["outcome"],
            outcome_probability=d["outcome_probability"],
            fidelity=d["fidelity"],
            final_mode_state=tuple(complex(*z) for z in d["final_mode_state"]),
            target_state=tuple(complex(*z) for z in d["target_state"]),
            leakage=d["leakage"],
            transcript=d.get("transcript", []),
            seed=d.get("seed"),
            config_hash=d.get("config_hash"),
            complete=d.get("complete", True),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_row(self) -> list[str]:
        return [
            self.outcome,
            f"{self.outcome_probability:.17g}",
            f"{self.fidelity:.17g}",
            f"{self.leakage:.17g}",
            "" if self.seed is None else str(self.seed),
            self.config_hash or "",
        ]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.CSV_HEADER)
        w.writerow(self.csv_row())
        return buf.getvalue()


def mode_summary(state: StateVector, target: Sequence[complex], mode: str = TRAP_B):
    """(fidelity, canonical dominant pair) of ``mode`` against a target on {0, 1}."""
    rho = reduced_density_matrix(state, mode)
    t = np.zeros(rho.shape[0], dtype=complex)
    t[:2] = target
    fidelity = float(np.clip(np.real(t.conj() @ rho @ t), 0.0, 1.0))
    _, vecs = np.linalg.eigh(rho)
    top = canonical_phase(vecs[:, -1])
    return fidelity, (complex(top[0]), complex(top[1]))


def canonical_pair(alpha: complex, beta: complex) -> tuple[complex, complex]:
    v = canonical_phase([alpha, beta])
    return complex(v[0]), complex(v[1])


def _pre_measurement(config: ProtocolConfig, ex: Executor) -> StateVector:
    check = config.noise.is_ideal
    _, state = prepare_motional_superposition(
        config.alpha, config.beta, state=initial_state(config.n_max), ex=ex
    )
    state = ex.heat(state)
    state = map_motional_to_internal(state, config.theta, ex=ex, check=check)
    state = make_epr(state, config.phiB, config.phi0, config.varphi, ex=ex, check=check)
    state = transport_ion2(state, ex=ex)
    state = ex.heat(state)
    state = cool_trapB_mode(state, ex=ex)
    return bell_coupling(state, config.phiA, config.phi0, config.varphi, ex=ex)


def run_teleportation(config: ProtocolConfig) -> FidelityReport:
    meas_rng, noise_rng = rng_streams(config.seed)
    ex = Executor(config.noise, noise_rng)
    check = config.noise.is_ideal
    state = _pre_measurement(config, ex)

    outcome, state, prob = measure_projective(state, [ION1, ION2], meas_rng, config.forced_outcome)
    ex.note(state, {"op": "measure", "targets": [ION1, ION2], "outcome": outcome, "probability": prob})
    message = ClassicalMessage(outcome, config.theta)
    ex.note(state, {"op": "classical_send", **message.as_dict()})

    state = ex.heat(state)
    bob = BobStation(SessionConstants.from_config(config))
    prescription = bob.prescribe(message)
    ex.note(state, {"op": "prescription", **prescription.as_dict()})
    state = bob_correct_and_unmap(state, prescription, ex=ex, check=check)

    target = canonical_pair(config.alpha, config.beta)
    fidelity, final = mode_summary(state, target)
    return FidelityReport(
        outcome=outcome,
        outcome_probability=prob,
        fidelity=fidelity,
        final_mode_state=final,
        target_state=target,
        leakage=ex.max_leakage,
        transcript=ex.transcript,
        seed=config.seed,
        config_hash=config.digest(),
    )


def outcome_statistics(config: ProtocolConfig, trials: int) -> dict[str, int]:
    """Counts of Alice's outcomes over ``trials`` unforced measurements."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if config.forced_outcome is not None:
        raise ValueError("outcome statistics need an unforced configuration")
    counts = dict.fromkeys(OUTCOMES, 0)
    if config.noise.is_ideal:
        # the pre-measurement state is deterministic; sample it repeatedly
        meas_rng, noise_rng = rng_streams(config.seed)
        state = _pre_measurement(config, Executor(config.noise, noise_rng))
        for _ in range(trials):
            outcome, _, _ = measure_projective(state, [ION1, ION2], meas_rng)
            counts[outcome] += 1
    else:
        for t in range(trials):
            counts[run_teleportation(replace(config, seed=derive_seed(config.seed, t))).outcome] += 1
    return counts
