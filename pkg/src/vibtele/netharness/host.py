"""The host process: owns the global state and the measurement rng.

:class:`HostSession` is the synchronous state machine; :func:`serve` wraps
it in an asyncio TCP server so all mutations happen on one event loop.
"""
from __future__ import annotations

import asyncio
import json
import logging
import math
from dataclasses import dataclass, field

from ..dynamics import PulseKind, PulseSpec, RamanGateSpec
from ..protocol import (
    TRAP_B,
    BobStrategy,
    ClassicalMessage,
    Executor,
    FidelityReport,
    SessionConstants,
    canonical_raman_phase,
    cool_trapB_mode,
    initial_state,
    mode_summary,
    rng_streams,
    transport_ion2,
)
from ..statevec import StateError, extract_subsystem, measure_projective
from .wire import STATION_OF_ROLE, WireError, decode, encode, validate_command

log = logging.getLogger(__name__)


class CommandRejected(Exception):
    pass


@dataclass
class SessionConfig:
    seed: int = 0
    phiA: float = math.pi
    phiB: float = math.pi
    phi0: float = 0.0
    varphi: float = 0.0
    n_max: int = 3
    bob_strategy: BobStrategy = BobStrategy.CONDITIONAL_PULSE
    host: str = "127.0.0.1"
    port: int = 0

    @classmethod
    def canonical(cls, phi0: float = 0.0, **kw) -> "SessionConfig":
        p = canonical_raman_phase(phi0)
        return cls(phiA=p, phiB=p, phi0=phi0, **kw)

    @property
    def constants(self) -> SessionConstants:
        return SessionConstants(self.phiA, self.phiB, self.phi0, self.varphi, self.n_max, self.bob_strategy)


@dataclass
class HostSession:
    config: SessionConfig
    roles: set = field(default_factory=set)
    transcript: list = field(default_factory=list)

    def __post_init__(self):
        self.state = initial_state(self.config.n_max)
        self.rng, _ = rng_streams(self.config.seed)
        self.ex = Executor()
        self.measurement: tuple[str, float] | None = None
        self.message: ClassicalMessage | None = None
        self.target: tuple[complex, complex] | None = None
        self.corrected = False
        self.seq = 0

    # -- bookkeeping

    def _log(self, role: str, request: dict, response: dict) -> None:
        self.transcript.append({
            "seq": self.seq, "role": role, "request": request,
            "response": response, "state_hash": self.state.digest(),
        })
        self.seq += 1

    def _log_relay(self, to: str, msg: dict) -> None:
        self.transcript.append({"seq": self.seq, "relay": {"to": to, "msg": msg}})
        self.seq += 1

    def _owned(self, role: str, *labels) -> None:
        station = STATION_OF_ROLE[role]
        for label in labels:
            if label is None:
                continue
            try:
                owner = self.state.layout.station_of[label]
            except KeyError:
                raise CommandRejected(f"unknown subsystem {label!r}") from None
            if owner != station:
                raise CommandRejected(f"locality violation: {label} is at station {owner}, not {station}")

    # -- entry points

    def hello(self, role: str) -> dict:
        if role not in STATION_OF_ROLE:
            raise CommandRejected(f"unknown role {role!r}")
        if role in self.roles:
            raise CommandRejected(f"duplicate role {role!r}")
        self.roles.add(role)
        return {"ok": True, "role": role, "session": self.config.constants.as_dict()}

    def handle(self, role: str, msg: dict) -> tuple[dict, list[tuple[str, dict]]]:
        """Execute one command; returns (response, pushes to other roles).

        A rejected command leaves the state untouched.
        """
        rid = msg.get("id")
        pushes: list[tuple[str, dict]] = []
        try:
            validate_command(msg)
            if msg["type"] == "hello":
                body = self.hello(msg["role"])
            else:
                body, pushes = getattr(self, "_cmd_" + msg["type"])(role, msg)
            response = {"id": rid, "ok": True, **body}
        except (CommandRejected, StateError, WireError, ValueError, KeyError) as exc:
            response = {"id": rid, "ok": False, "error": str(exc)}
            pushes = []
        self._log(role, msg, response)
        for to, m in pushes:
            self._log_relay(to, m)
        return response, pushes

    # -- commands

    def _cmd_pulse(self, role, msg):
        spec = PulseSpec(PulseKind(msg["kind"]), msg["ion"], msg.get("mode"), float(msg["area"]), float(msg["phase"]))
        self._owned(role, spec.ion, spec.mode)
        label = msg.get("label")
        if role == "bob" and self.message is None:
            raise CommandRejected("causality violation: no classical message received yet")
        if label == "map":
            pair = extract_subsystem(self.state, spec.mode)
            self.target = (complex(pair[0]), complex(pair[1]))
        self.state = self.ex.pulse(self.state, spec, label=label)
        if role == "bob" and label == "unmap":
            self.corrected = True
        return {}, []

    def _cmd_raman(self, role, msg):
        spec = RamanGateSpec(msg["ion_j"], msg["ion_k"], float(msg["phi"]), float(msg["phi0"]),
                             float(msg["varphi"]), float(msg["angle"]))
        self._owned(role, spec.ion_j, spec.ion_k)
        self.state = self.ex.raman(self.state, spec)
        return {}, []

    def _cmd_transport(self, role, msg):
        ion = msg["ion"]
        self._owned(role, ion)
        dest = "A" if STATION_OF_ROLE[role] == "B" else "B"
        self.state = transport_ion2(self.state, ion, self.ex, destination=dest)
        other = "alice" if role == "bob" else "bob"
        return {"station": dest}, [(other, {"type": "notice", "event": "transport", "ion": ion, "station": dest})]

    def _cmd_cool(self, role, msg):
        self._owned(role, msg["mode"])
        self.state = cool_trapB_mode(self.state, msg["mode"], ex=self.ex)
        return {}, []

    def _cmd_measure(self, role, msg):
        targets = list(msg["targets"])
        self._owned(role, *targets)
        outcome, self.state, prob = measure_projective(self.state, targets, self.rng, msg.get("forced"))
        self.ex.note(self.state, {"op": "measure", "targets": targets, "outcome": outcome, "probability": prob})
        if role == "alice":
            self.measurement = (outcome, prob)
        return {"outcome": outcome, "probability": prob}, []

    def _cmd_classical_send(self, role, msg):
        if role != "alice":
            raise CommandRejected("only alice sends on the classical channel")
        if self.measurement is None:
            raise CommandRejected("protocol order: measure before classical_send")
        if self.message is not None:
            raise CommandRejected("classical message already sent")
        self.message = ClassicalMessage(msg["outcome"], float(msg["theta"]))
        relay = {"type": "classical", **self.message.as_dict()}
        return {}, [("bob", relay)]

    def _cmd_query_report(self, role, msg):
        if not self.corrected or self.measurement is None or self.target is None:
            return {"report": {"complete": False}}, []
        outcome, prob = self.measurement
        fidelity, final = mode_summary(self.state, self.target, TRAP_B)
        report = FidelityReport(
            outcome=outcome,
            outcome_probability=prob,
            fidelity=fidelity,
            final_mode_state=final,
            target_state=self.target,
            leakage=self.ex.max_leakage,
            transcript=[],
            seed=self.config.seed,
        )
        return {"report": report.to_dict()}, []

    def _cmd_bye(self, role, msg):
        return {}, []


def replay_transcript(config: SessionConfig, entries: list[dict]) -> list[tuple[int, bool]]:
    """Re-run logged requests in order; returns (seq, hash matches) per request."""
    session = HostSession(config)
    out = []
    for entry in entries:
        if "request" not in entry:
            continue
        before = len(session.transcript)
        session.handle(entry["role"], entry["request"])
        out.append((entry["seq"], session.transcript[before]["state_hash"] == entry["state_hash"]))
    return out


async def _serve(config: SessionConfig, on_ready=None, timeout: float | None = None) -> HostSession:
    session = HostSession(config)
    writers: dict[str, asyncio.StreamWriter] = {}
    both_ready = asyncio.Event()
    finished = asyncio.Event()
    said_bye: set[str] = set()

    async def send(writer, obj):
        writer.write(encode(obj))
        await writer.drain()

    async def client(reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        role = None
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                try:
                    msg = validate_command(decode(line))
                except WireError as exc:
                    # malformed input: reject and drop the connection
                    await send(writer, {"id": None, "ok": False, "error": str(exc)})
                    break
                if role is None:
                    if msg["type"] != "hello":
                        await send(writer, {"id": msg["id"], "ok": False, "error": "hello first"})
                        break
                    response, _ = session.handle(msg.get("role"), msg)
                    if not response["ok"]:
                        await send(writer, response)
                        break
                    role = msg["role"]
                    writers[role] = writer
                    if len(writers) == 2:
                        both_ready.set()
                    await both_ready.wait()
                    await send(writer, response)
                    continue
                response, pushes = session.handle(role, msg)
                await send(writer, response)
                for to, m in pushes:
                    if to in writers:
                        await send(writers[to], m)
                if msg["type"] == "bye" and response["ok"]:
                    said_bye.add(role)
                    if len(said_bye) == 2:
                        finished.set()
                    break
        except (ConnectionError, asyncio.IncompleteReadError) as exc:
            log.warning("connection for %s dropped: %s", role, exc)
        finally:
            writer.close()

    server = await asyncio.start_server(client, config.host, config.port)
    port = server.sockets[0].getsockname()[1]
    if on_ready is not None:
        on_ready(config.host, port)
    try:
        await asyncio.wait_for(finished.wait(), timeout)
    except asyncio.TimeoutError:
        raise TimeoutError(f"session did not finish within {timeout}s") from None
    finally:
        server.close()
        await server.wait_closed()
    return session


def serve(config: SessionConfig, transcript_path=None, on_ready=None, timeout: float | None = None) -> list[dict]:
    """Host one alice+bob session; returns (and optionally writes) the transcript."""
    session = asyncio.run(_serve(config, on_ready, timeout))
    if transcript_path is not None:
        with open(transcript_path, "w", encoding="utf-8") as fh:
            for entry in session.transcript:
                fh.write(json.dumps(entry) + "\n")
    return session.transcript
