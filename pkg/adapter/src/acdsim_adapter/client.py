"""Remote environment client over stdio-subprocess or TCP transports."""

from __future__ import annotations

import json
import socket
import subprocess
import sys


class ProtocolError(Exception):
    """The server answered with an error message."""


class StdioTransport:
    """Spawns the simulator as a subprocess and speaks over its pipes.

    The command is configurable; by default the simulator CLI module is run
    with the current interpreter.
    """

    def __init__(self, scenario_path: str, command: list[str] | None = None,
                 extra_args: list[str] | None = None):
        argv = list(command or [sys.executable, "-m", "acdsim.cli"])
        argv += ["serve", scenario_path, "--transport", "stdio"]
        argv += list(extra_args or [])
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
        )

    def send(self, line: str) -> None:
        if self._proc.stdin is None or self._proc.poll() is not None:
            raise ConnectionError("simulator subprocess is not running")
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ConnectionError("simulator subprocess closed its pipe") from exc

    def recv(self) -> str:
        line = self._proc.stdout.readline()
        if line == "":
            raise ConnectionError("simulator subprocess closed the connection")
        return line.rstrip("\n")

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.wait(timeout=5)


class TcpTransport:
    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._file = self._sock.makefile("rw", encoding="utf-8", newline="\n")

    def send(self, line: str) -> None:
        try:
            self._file.write(line + "\n")
            self._file.flush()
        except OSError as exc:
            raise ConnectionError("server connection lost") from exc

    def recv(self) -> str:
        line = self._file.readline()
        if line == "":
            raise ConnectionError("server closed the connection")
        return line.rstrip("\n")

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()


class RemoteEnvClient:
    """reset/step environment interface backed by a protocol session.

    Requests and responses alternate strictly; every exchanged line is kept
    in `transcript` so a session can be compared byte-for-byte against one
    driven over the raw transport.
    """

    def __init__(self, transport):
        self._transport = transport
        self._closed = False
        self._greeted = False
        self.scenario: str | None = None
        self.action_names: list[str] | None = None
        self.obs_layout: dict[str, int] | None = None
        self.last_mask: list[bool] | None = None
        self.transcript: list[str] = []

    # -- plumbing -----------------------------------------------------------

    def _exchange(self, message: dict) -> dict:
        if self._closed:
            raise ConnectionError("client is closed")
        line = json.dumps(message, separators=(",", ":"))
        self.transcript.append(">" + line)
        self._transport.send(line)
        response_line = self._transport.recv()
        self.transcript.append("<" + response_line)
        response = json.loads(response_line)
        if "error" in response:
            raise ProtocolError(response["error"])
        return response

    def hello(self) -> dict:
        response = self._exchange({"op": "hello"})
        self.scenario = response["scenario"]
        self.action_names = list(response["action_names"])
        self.obs_layout = dict(response["obs_layout"])
        self._greeted = True
        return response

    # -- environment interface ----------------------------------------------

    def reset(self, seed: int | None = None):
        """Returns (observation vector, info dict carrying the action mask)."""
        if not self._greeted:
            self.hello()
        message: dict = {"op": "reset"}
        if seed is not None:
            message["seed"] = seed
        response = self._exchange(message)
        self.last_mask = list(response["mask"])
        return response["obs"], {"mask": self.last_mask}

    def step(self, action: int):
        """Returns (observation, reward, terminated, truncated, info)."""
        response = self._exchange({"op": "step", "action": action})
        self.last_mask = list(response["mask"])
        info = dict(response["info"])
        info["mask"] = self.last_mask
        return (
            response["obs"],
            response["reward"],
            response["terminated"],
            response["truncated"],
            info,
        )

    def close(self) -> None:
        if self._closed:
            return
        try:
            self._exchange({"op": "close"})
        except (ConnectionError, ProtocolError):
            pass
        finally:
            self._closed = True
            self._transport.close()

    def __enter__(self) -> RemoteEnvClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()
