"""Three-process harness: a host holding the state, Alice and Bob clients."""
from .clients import Connection, RemoteError, alice_client, bob_client, parse_endpoint
from .host import CommandRejected, HostSession, SessionConfig, replay_transcript, serve
from .wire import WireError, decode, encode

__all__ = [
    "CommandRejected", "Connection", "HostSession", "RemoteError", "SessionConfig", "WireError",
    "alice_client", "bob_client", "decode", "encode", "parse_endpoint", "replay_transcript", "serve",
]
