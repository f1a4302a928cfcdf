"""Alice and Bob as blocking, single-threaded clients.

Each client keeps one request in flight.  Lines without an ``id`` are
host notices (transport, relayed classical message) and are queued until
the script asks for them.
"""
from __future__ import annotations

import math
import socket
from collections import deque

from ..protocol import (
    BELL_ANGLE,
    ION1,
    ION2,
    ION3,
    TRAP_A,
    TRAP_B,
    BobStation,
    ClassicalMessage,
    FidelityReport,
    SessionConstants,
    prep_pulses,
)
from .wire import decode, encode


class RemoteError(RuntimeError):
    pass


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
    return host, int(port)


class Connection:
    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.sock = socket.create_connection(parse_endpoint(endpoint), timeout=timeout)
        self.fh = self.sock.makefile("rwb")
        self.next_id = 1
        self.notices: deque[dict] = deque()

    def _read(self) -> dict:
        line = self.fh.readline()
        if not line:
            raise ConnectionError("host closed the connection")
        return decode(line)

    def request(self, type_: str, **payload) -> dict:
        rid = self.next_id
        self.next_id += 1
        self.fh.write(encode({"id": rid, "type": type_, **payload}))
        self.fh.flush()
        while True:
            msg = self._read()
            if msg.get("id") == rid or ("id" in msg and msg["id"] is None):
                if not msg.get("ok"):
                    raise RemoteError(msg.get("error", "rejected"))
                return msg
            self.notices.append(msg)

    def wait_for(self, type_: str, **match) -> dict:
        while True:
            for i, msg in enumerate(self.notices):
                if msg.get("type") == type_ and all(msg.get(k) == v for k, v in match.items()):
                    del self.notices[i]
                    return msg
            self.notices.append(self._read())

    def close(self) -> None:
        try:
            self.fh.close()
        finally:
            self.sock.close()


def _pulse(conn: Connection, spec, label: str | None = None) -> None:
    payload = spec.as_dict()
    if label:
        payload["label"] = label
    conn.request("pulse", **payload)


def alice_client(endpoint: str, alpha: complex, beta: complex, theta: float,
                 forced: str | None = None) -> ClassicalMessage:
    """Alice's half: prepare, map, wait for ion 2, joint gate, measure, send.

    Only pulse parameters and the final ``{outcome, theta}`` leave this function.
    """
    conn = Connection(endpoint)
    try:
        hello = conn.request("hello", role="alice")
        c = SessionConstants(**hello["session"])
        for spec in prep_pulses(alpha, beta):
            _pulse(conn, spec, "prep")
        conn.request("pulse", kind="antijc", ion=ION1, mode=TRAP_A, area=math.pi, phase=theta, label="map")
        conn.wait_for("notice", event="transport", ion=ION2)
        conn.request("pulse", kind="carrier", ion=ION1, area=math.pi, phase=0.0, label="bell")
        conn.request("raman", ion_j=ION1, ion_k=ION2, phi=c.phiA, phi0=c.phi0, varphi=c.varphi, angle=BELL_ANGLE)
        extra = {"forced": forced} if forced else {}
        result = conn.request("measure", targets=[ION1, ION2], **extra)
        message = ClassicalMessage(result["outcome"], theta)
        conn.request("classical_send", **message.as_dict())
        conn.request("bye")
        return message
    finally:
        conn.close()


def bob_client(endpoint: str) -> FidelityReport:
    """Bob's half: EPR pair, send ion 2, cool, wait for Alice, correct, report."""
    conn = Connection(endpoint)
    try:
        hello = conn.request("hello", role="bob")
        c = SessionConstants(**hello["session"])
        conn.request("raman", ion_j=ION2, ion_k=ION3, phi=c.phiB, phi0=c.phi0, varphi=c.varphi, angle=BELL_ANGLE)
        conn.request("transport", ion=ION2)
        conn.request("cool", mode=TRAP_B)
        relay = conn.wait_for("classical")
        message = ClassicalMessage(relay["outcome"], relay["theta"])
        prescription = BobStation(c).prescribe(message)
        pulses = prescription.pulses(ION3, TRAP_B)
        for spec in pulses[:-1]:
            _pulse(conn, spec, "rotation")
        _pulse(conn, pulses[-1], "unmap")
        report = FidelityReport.from_dict(conn.request("query_report")["report"])
        conn.request("bye")
        return report
    finally:
        conn.close()


__all__ = ["Connection", "RemoteError", "alice_client", "bob_client", "parse_endpoint"]
