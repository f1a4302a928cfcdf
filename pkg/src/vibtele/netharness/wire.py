"""Newline-delimited JSON framing.

One UTF-8 JSON object per line.  Floats are written with Python's shortest
round-trip ``repr`` so every value decodes to the identical double.
"""
from __future__ import annotations

import json

COMMANDS = (
    "hello", "pulse", "raman", "transport", "cool",
    "measure", "classical_send", "query_report", "bye",
)
ROLES = ("alice", "bob")
STATION_OF_ROLE = {"alice": "A", "bob": "B"}

REQUIRED = {
    "hello": ("role",),
    "pulse": ("kind", "ion", "area", "phase"),
    "raman": ("ion_j", "ion_k", "phi", "phi0", "varphi", "angle"),
    "transport": ("ion",),
    "cool": ("mode",),
    "measure": ("targets",),
    "classical_send": ("outcome", "theta"),
    "query_report": (),
    "bye": (),
}


class WireError(ValueError):
    """Malformed or unknown wire message."""


def encode(obj: dict) -> bytes:
    return (json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def decode(line: bytes | str) -> dict:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WireError("message is not UTF-8") from exc
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise WireError(f"not JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise WireError("message must be a JSON object")
    return obj


def validate_command(msg: dict) -> dict:
    kind = msg.get("type")
    if kind not in COMMANDS:
        raise WireError(f"unknown command type {kind!r}")
    if not isinstance(msg.get("id"), int):
        raise WireError("command needs an integer id")
    missing = [k for k in REQUIRED[kind] if k not in msg]
    if missing:
        raise WireError(f"{kind}: missing fields {missing}")
    return msg
