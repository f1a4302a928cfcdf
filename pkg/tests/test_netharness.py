import json
import math
import socket
import threading
import time

import numpy as np
import pytest

from vibtele.netharness import (
    HostSession,
    SessionConfig,
    WireError,
    alice_client,
    bob_client,
    decode,
    encode,
    replay_transcript,
    serve,
)
from vibtele.netharness.clients import Connection, RemoteError, parse_endpoint
from vibtele.netharness.wire import validate_command
from vibtele.protocol import ION1, ION2, ION3, TRAP_A, TRAP_B, ProtocolConfig, run_teleportation


class Session:
    """A host on an ephemeral port running in a background thread."""

    def __init__(self, config: SessionConfig, timeout: float = 30.0):
        self.config = config
        self.ready = threading.Event()
        self.transcript = None
        self.error = None
        self.thread = threading.Thread(target=self._run, args=(timeout,), daemon=True)
        self.thread.start()
        assert self.ready.wait(10)

    def _run(self, timeout):
        def on_ready(host, port):
            self.endpoint = f"{host}:{port}"
            self.ready.set()

        try:
            self.transcript = serve(self.config, on_ready=on_ready, timeout=timeout)
        except BaseException as exc:  # surfaced by join()
            self.error = exc
            self.ready.set()

    def join(self):
        self.thread.join(30)
        if self.error:
            raise self.error
        return self.transcript


def run_session(config, alpha, beta, theta, forced=None):
    host = Session(config)
    box = {}
    bob = threading.Thread(target=lambda: box.setdefault("report", bob_client(host.endpoint)))
    bob.start()
    message = alice_client(host.endpoint, alpha, beta, theta, forced)
    bob.join(30)
    return message, box["report"], host.join()


def scripted(session, sender, type_, **payload):
    response, pushes = session.handle(sender, {"id": 1, "type": type_, **payload})
    return response, pushes


def alice_prefix(session, theta=0.0):
    """Drive a session through Alice's measurement using in-process handles."""
    c = session.config
    scripted(session, "alice", "hello", role="alice")
    scripted(session, "bob", "hello", role="bob")
    scripted(session, "bob", "raman", ion_j=ION2, ion_k=ION3, phi=c.phiB, phi0=c.phi0, varphi=0.0, angle=math.pi / 4)
    scripted(session, "alice", "pulse", kind="antijc", ion=ION1, mode=TRAP_A, area=math.pi, phase=theta, label="map")
    scripted(session, "bob", "transport", ion=ION2)
    scripted(session, "bob", "cool", mode=TRAP_B)
    scripted(session, "alice", "pulse", kind="carrier", ion=ION1, area=math.pi, phase=0.0)
    scripted(session, "alice", "raman", ion_j=ION1, ion_k=ION2, phi=c.phiA, phi0=c.phi0, varphi=0.0, angle=math.pi / 4)


class TestWire:
    def test_round_trip_preserves_doubles(self):
        msg = {"id": 3, "type": "pulse", "phase": 0.1 + 0.2, "area": math.pi}
        assert decode(encode(msg)) == msg

    def test_one_line_per_message(self):
        assert encode({"a": 1}).count(b"\n") == 1

    @pytest.mark.parametrize("line", [b"not json\n", b"[1,2]\n", b"\xff\n"])
    def test_malformed(self, line):
        with pytest.raises(WireError):
            decode(line)

    @pytest.mark.parametrize("msg", [{"id": 1, "type": "warp"}, {"type": "bye"}, {"id": 1, "type": "pulse", "ion": "x"}])
    def test_invalid_commands(self, msg):
        with pytest.raises(WireError):
            validate_command(msg)

    def test_nan_refused(self):
        with pytest.raises(ValueError):
            encode({"x": float("nan")})

    def test_endpoint(self):
        assert parse_endpoint("127.0.0.1:8765") == ("127.0.0.1", 8765)
        with pytest.raises(ValueError):
            parse_endpoint("localhost")


class TestHostSession:
    def test_duplicate_role(self):
        s = HostSession(SessionConfig())
        assert scripted(s, "alice", "hello", role="alice")[0]["ok"]
        response, _ = scripted(s, "alice", "hello", role="alice")
        assert not response["ok"] and "duplicate" in response["error"]

    def test_locality_violation_leaves_state(self):
        s = HostSession(SessionConfig())
        before = s.state.digest()
        response, _ = scripted(s, "alice", "pulse", kind="carrier", ion=ION3, area=math.pi, phase=0.0)
        assert not response["ok"] and "locality violation" in response["error"]
        assert s.state.digest() == before

    def test_alice_cannot_use_ion2_before_transport(self):
        s = HostSession(SessionConfig())
        response, _ = scripted(s, "alice", "raman", ion_j=ION1, ion_k=ION2, phi=0, phi0=0, varphi=0, angle=1)
        assert "locality" in response["error"]

    def test_bob_cannot_correct_before_message(self):
        s = HostSession(SessionConfig.canonical())
        alice_prefix(s)
        before = s.state.digest()
        response, _ = scripted(s, "bob", "pulse", kind="jc", ion=ION3, mode=TRAP_B, area=math.pi, phase=0.0)
        assert not response["ok"] and "causality" in response["error"]
        assert s.state.digest() == before

    def test_send_requires_measurement(self):
        s = HostSession(SessionConfig())
        response, pushes = scripted(s, "alice", "classical_send", outcome="gg", theta=0.0)
        assert not response["ok"] and pushes == []

    def test_bob_cannot_send(self):
        s = HostSession(SessionConfig())
        response, _ = scripted(s, "bob", "classical_send", outcome="gg", theta=0.0)
        assert not response["ok"]

    def test_report_incomplete_before_correction(self):
        s = HostSession(SessionConfig.canonical())
        alice_prefix(s)
        response, _ = scripted(s, "bob", "query_report")
        assert response["ok"] and response["report"] == {"complete": False}

    def test_relay_payload(self):
        s = HostSession(SessionConfig.canonical(seed=3))
        alice_prefix(s)
        scripted(s, "alice", "measure", targets=[ION1, ION2], forced="eg")
        response, pushes = scripted(s, "alice", "classical_send", outcome="eg", theta=0.3)
        assert response["ok"]
        assert pushes == [("bob", {"type": "classical", "outcome": "eg", "theta": 0.3})]

    def test_measure_matches_in_process_sampling(self):
        from vibtele.protocol import rng_streams
        from vibtele.statevec import measure_projective

        s = HostSession(SessionConfig(seed=11))
        alice_prefix(s, theta=0.2)
        pre = s.state
        response, _ = scripted(s, "alice", "measure", targets=[ION1, ION2])
        outcome, _, p = measure_projective(pre, [ION1, ION2], rng_streams(11)[0])
        assert (response["outcome"], response["probability"]) == (outcome, p)


class TestNetworkedRun:
    @pytest.mark.parametrize("outcome", [None, "ee", "gg", "eg", "ge"])
    def test_report_matches_in_process_run(self, outcome):
        alpha, beta, theta, seed = 0.6, 0.8j, 0.3, 5
        cfg = SessionConfig(seed=seed, phiA=0.4, phiB=2.1, phi0=0.9)
        message, report, _ = run_session(cfg, alpha, beta, theta, outcome)
        ref = run_teleportation(ProtocolConfig(alpha=alpha, beta=beta, theta=theta, phiA=0.4, phiB=2.1, phi0=0.9,
                                               seed=seed, forced_outcome=outcome))
        assert report.complete
        assert message.as_dict() == {"outcome": ref.outcome, "theta": theta}
        assert report.outcome == ref.outcome
        assert report.outcome_probability == pytest.approx(ref.outcome_probability, abs=1e-12)
        assert report.fidelity == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(report.final_mode_state, ref.final_mode_state, atol=1e-12)
        assert np.allclose(report.target_state, ref.target_state, atol=1e-12)
        assert report.leakage == pytest.approx(ref.leakage, abs=1e-12)

    def test_rotation_strategy(self):
        cfg = SessionConfig.canonical(seed=2, bob_strategy="rotate_then_antijc")
        _, report, transcript = run_session(cfg, 0.8, 0.6, 1.2, "ee")
        assert report.fidelity == pytest.approx(1.0, abs=1e-10)
        labels = [e["request"].get("label") for e in transcript if e.get("role") == "bob" and "request" in e
                  and e["request"]["type"] == "pulse"]
        assert labels == ["rotation", "unmap"]

    @pytest.mark.parametrize("outcome, kind, wire_phase", [("gg", "jc", 0.0), ("ge", "antijc", 0.0),
                                                           ("ee", "jc", math.pi), ("eg", "antijc", math.pi)])
    def test_bob_correction_pulse(self, outcome, kind, wire_phase):
        _, _, transcript = run_session(SessionConfig.canonical(seed=1), 0.6, 0.8, 0.0, outcome)
        (pulse,) = [e["request"] for e in transcript if e.get("role") == "bob" and "request" in e
                    and e["request"]["type"] == "pulse"]
        assert pulse["kind"] == kind and pulse["area"] == pytest.approx(math.pi)
        assert math.cos(pulse["phase"] - wire_phase) == pytest.approx(1.0, abs=1e-12)

    def test_alice_commands_for_trivial_payload(self):
        _, _, transcript = run_session(SessionConfig.canonical(seed=1), 1.0, 0.0, 0.0)
        alice = [e["request"] for e in transcript if e.get("role") == "alice"]
        kinds = [(m["type"], m.get("kind"), m.get("label")) for m in alice]
        assert kinds == [
            ("hello", None, None),
            ("pulse", "carrier", "prep"),
            ("pulse", "antijc", "prep"),
            ("pulse", "antijc", "map"),
            ("pulse", "carrier", "bell"),
            ("raman", None, None),
            ("measure", None, None),
            ("classical_send", None, None),
            ("bye", None, None),
        ]
        assert alice[1]["area"] == 0.0
        assert alice[5]["angle"] == pytest.approx(math.pi / 4)

    def test_only_outcome_and_theta_cross_to_bob(self):
        alpha, beta = 0.6, 0.8j
        _, _, transcript = run_session(SessionConfig(seed=8), alpha, beta, 0.45)
        relays = [e["relay"] for e in transcript if "relay" in e and e["relay"]["to"] == "bob"]
        assert [set(r["msg"]) for r in relays] == [{"type", "outcome", "theta"}]
        alice_sends = [e["request"] for e in transcript if e.get("role") == "alice"]
        blob = json.dumps(alice_sends)
        for needle in (repr(0.6), repr(0.8), "alpha", "beta"):
            assert needle not in blob

    def test_replay_reproduces_hashes(self):
        cfg = SessionConfig(seed=21)
        _, _, transcript = run_session(cfg, 0.6, 0.8, 0.7)
        matches = replay_transcript(cfg, transcript)
        assert matches and all(ok for _, ok in matches)

    def test_replay_detects_tampering(self):
        cfg = SessionConfig(seed=21)
        _, _, transcript = run_session(cfg, 0.6, 0.8, 0.7)
        tampered = [dict(e) for e in transcript]
        for e in tampered:
            if e.get("request", {}).get("label") == "map":
                e["request"] = {**e["request"], "phase": 1.0}
        assert not all(ok for _, ok in replay_transcript(cfg, tampered))

    def test_same_seed_same_conversation(self):
        # the two clients interleave freely, so compare each role's own exchange
        cfg = SessionConfig(seed=4)
        runs = [run_session(cfg, 0.6, 0.8, 0.7) for _ in range(2)]

        def per_role(transcript, role):
            return [(e["request"], e["response"]["ok"], e["response"].get("outcome"))
                    for e in transcript if e.get("role") == role]

        for role in ("alice", "bob"):
            assert per_role(runs[0][2], role) == per_role(runs[1][2], role)
        assert runs[0][0] == runs[1][0]
        assert runs[0][1].fidelity == pytest.approx(runs[1][1].fidelity, abs=1e-12)


class TestServerEdges:
    def test_malformed_line_rejected_and_closed(self):
        host = Session(SessionConfig(), timeout=2)
        with socket.create_connection(parse_endpoint(host.endpoint), timeout=5) as sock:
            sock.sendall(b"{oops\n")
            fh = sock.makefile("rb")
            reply = decode(fh.readline())
            assert reply["ok"] is False and reply["id"] is None
            assert fh.readline() == b""
        with pytest.raises(TimeoutError):
            host.join()

    def test_duplicate_role_over_network(self):
        host = Session(SessionConfig(), timeout=2)

        def first():
            try:
                Connection(host.endpoint).request("hello", role="alice")
            except (RemoteError, ConnectionError, OSError):
                pass

        t = threading.Thread(target=first, daemon=True)
        t.start()
        second = Connection(host.endpoint)
        # the first hello is parked until bob arrives; a second alice is refused at once
        time.sleep(0.2)
        with pytest.raises(RemoteError, match="duplicate"):
            second.request("hello", role="alice")
        second.close()
        with pytest.raises(TimeoutError):
            host.join()
