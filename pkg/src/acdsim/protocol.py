"""Newline-delimited JSON protocol for external trainers.

One session per connection, strictly alternating request/response. Field
order is canonical and floats use Python's shortest round-trip formatting,
so a fixed transcript is byte-identical across runs. Malformed input gets
an error message without ending the session.
"""

from __future__ import annotations

import json
import logging
import socketserver
import sys

from .scenario_io import ScenarioConfig
from .taskmodel import Env, EpisodeOverError, InvalidActionError

log = logging.getLogger("acdsim.protocol")


class OracleRefusedError(Exception):
    """Serving an omniscient_oracle scenario requires an explicit test flag."""


def encode_message(payload: dict) -> str:
    return json.dumps(payload, separators=(",", ":"))


class Session:
    """Protocol state machine for one connection."""

    def __init__(self, config: ScenarioConfig, allow_oracle: bool = False):
        if config.pomdp.sensor.mode == "omniscient_oracle" and not allow_oracle:
            raise OracleRefusedError(
                "refusing to serve an omniscient_oracle scenario; pass allow_oracle for test profiles"
            )
        self.config = config
        self.env = Env(config)
        self.has_reset = False
        self.closed = False

    def handle_line(self, line: str) -> str:
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            return encode_message({"error": f"malformed message: {exc.msg}"})
        if not isinstance(message, dict) or "op" not in message:
            return encode_message({"error": "message must be an object with an 'op' field"})
        op = message["op"]
        if op == "hello":
            return self._hello()
        if op == "reset":
            return self._reset(message)
        if op == "step":
            return self._step(message)
        if op == "close":
            self.closed = True
            return encode_message({"ok": True})
        return encode_message({"error": f"unknown op {op!r}"})

    def _hello(self) -> str:
        return encode_message({
            "ok": True,
            "scenario": self.config.metadata.name,
            "action_names": list(self.env.action_names),
            "obs_layout": self.env.obs_layout(),
        })

    def _reset(self, message: dict) -> str:
        seed = message.get("seed")
        if seed is not None and not isinstance(seed, int):
            return encode_message({"error": "seed must be an integer"})
        obs = self.env.reset(seed)
        self.has_reset = True
        return encode_message({
            "obs": [float(v) for v in obs.flat],
            "mask": [bool(b) for b in self.env.legal_action_mask()],
        })

    def _step(self, message: dict) -> str:
        if not self.has_reset:
            return encode_message({"error": "reset required before step"})
        action = message.get("action")
        if not isinstance(action, int) or isinstance(action, bool):
            return encode_message({"error": "invalid action id"})
        try:
            obs, reward, terminated, truncated, info = self.env.step(action)
        except InvalidActionError as exc:
            if exc.reason == "out_of_range":
                return encode_message({"error": "invalid action id"})
            return encode_message({"error": "action masked"})
        except EpisodeOverError:
            return encode_message({"error": "episode is over; reset required"})
        return encode_message({
            "obs": [float(v) for v in obs.flat],
            "reward": float(reward),
            "terminated": bool(terminated),
            "truncated": bool(truncated),
            "mask": [bool(b) for b in self.env.legal_action_mask()],
            "info": _plain_info(info),
        })


def _plain_info(info: dict) -> dict:
    out: dict = {}
    for key in ("step", "clock", "feedback", "void_events", "masked_noop"):
        if key in info:
            value = info[key]
            if isinstance(value, float):
                out[key] = float(value)
            elif isinstance(value, bool):
                out[key] = bool(value)
            elif isinstance(value, int):
                out[key] = int(value)
            else:
                out[key] = str(value)
    return out


def serve_streams(config: ScenarioConfig, reader, writer, allow_oracle: bool = False) -> None:
    """Run one session over line-based streams (the testable core loop)."""
    session = Session(config, allow_oracle)
    for line in reader:
        line = line.strip()
        if not line:
            continue
        response = session.handle_line(line)
        writer.write(response + "\n")
        if hasattr(writer, "flush"):
            writer.flush()
        if session.closed:
            break


def serve_stdio(config: ScenarioConfig, allow_oracle: bool = False) -> None:
    log.info("serving %s over stdio", config.metadata.name)
    serve_streams(config, sys.stdin, sys.stdout, allow_oracle)


def serve_tcp(config: ScenarioConfig, port: int, allow_oracle: bool = False,
              host: str = "127.0.0.1", ready_callback=None):
    """Threaded TCP server; each connection gets an independent session."""
    Session(config, allow_oracle)  # fail fast on refused configurations

    class Handler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            session = Session(config, allow_oracle)
            for raw in self.rfile:
                line = raw.decode("utf-8").strip()
                if not line:
                    continue
                response = session.handle_line(line)
                self.wfile.write((response + "\n").encode("utf-8"))
                if session.closed:
                    break

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    server = Server((host, port), Handler)
    log.info("serving %s on tcp %s:%s", config.metadata.name, *server.server_address)
    if ready_callback is not None:
        ready_callback(server)
    try:
        server.serve_forever()
    finally:
        server.server_close()
    return server


def protocol_serve(config: ScenarioConfig, transport: str, allow_oracle: bool = False):
    """Entry point: transport is 'stdio' or 'tcp:<port>'."""
    if transport == "stdio":
        serve_stdio(config, allow_oracle)
    elif transport.startswith("tcp:"):
        serve_tcp(config, int(transport.split(":", 1)[1]), allow_oracle)
    else:
        raise ValueError(f"unknown transport {transport!r} (expected stdio or tcp:<port>)")
