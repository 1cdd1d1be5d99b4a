"""Frame transport: where record lines come from and how they are paced.

All sources yield (line, received_at) pairs in order, at most once per
record. Replay and synthetic sources pace themselves from a nominal polling
interval divided by a speedup factor (rows carry no timestamps, so the
cadence is the configured nominal one). The socket source accepts plain
newline-delimited records on a listening port; the matching emitter connects
out and retries with bounded exponential backoff, so a flaky link shows up
downstream as missing frames rather than a crash.
"""

from __future__ import annotations

import math
import socket
import threading
import time
from pathlib import Path
from typing import Iterable, Iterator

from .synth import SyntheticSpec, capture_text

DEFAULT_POLL_INTERVAL = 12.0  # seconds between frames from a bedside unit


class SourceError(Exception):
    """I/O failure distinct from data-level validity flags."""


def wire_line(password: str, values: Iterable[float]) -> str:
    return ",".join([password, *(f"{v:.3f}" for v in values)])


def _pace(lines: list[str], interval: float, speedup: float) -> Iterator[tuple[str, float]]:
    """Yield each line on an absolute schedule interval/speedup apart."""
    if speedup <= 0:
        raise ValueError(f"speedup must be > 0, got {speedup}")
    gap = 0.0 if math.isinf(speedup) else interval / speedup
    start = time.monotonic()
    for i, line in enumerate(lines):
        due = start + i * gap
        delay = due - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        yield line, time.time()


def _looks_like_capture(first_line: str, password: str) -> bool:
    return first_line.split(",", 1)[0] != password


class ReplaySource:
    """Replay a recorded file, pacing rows by poll_interval / speedup.

    Accepts either wire-format files (password-prefixed rows) or capture
    files (header row of parameter names, value-only rows, no password); the
    two are told apart by the first token, and capture rows are rewritten
    into wire form so the rest of the pipeline sees one format.
    """

    def __init__(
        self,
        path: str | Path,
        password: str,
        poll_interval: float = DEFAULT_POLL_INTERVAL,
        speedup: float = math.inf,
    ) -> None:
        if poll_interval <= 0:
            raise ValueError(f"poll_interval must be > 0, got {poll_interval}")
        self.path = Path(path)
        if not self.path.is_file():
            # a replay needs a finished recording; fail before any output
            # directories or archive files get created downstream
            raise SourceError(f"cannot read {self.path}: no such file")
        self.password = password
        self.poll_interval = poll_interval
        self.speedup = speedup

    def _read_lines(self) -> list[str]:
        try:
            raw = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise SourceError(f"cannot read {self.path}: {exc}") from exc
        lines = [line for line in raw.splitlines() if line.strip() != ""]
        if not lines:
            return []
        if _looks_like_capture(lines[0], self.password):
            return [f"{self.password},{line}" for line in lines[1:]]
        return lines

    def frames(self) -> Iterator[tuple[str, float]]:
        yield from _pace(self._read_lines(), self.poll_interval, self.speedup)


class SyntheticSource:
    """Generate-and-pace wrapper around the synthetic stream builder."""

    def __init__(
        self,
        spec: SyntheticSpec,
        password: str,
        poll_interval: float = DEFAULT_POLL_INTERVAL,
        speedup: float = math.inf,
    ) -> None:
        self.spec = spec
        self.password = password
        self.poll_interval = poll_interval
        self.speedup = speedup

    def frames(self) -> Iterator[tuple[str, float]]:
        body = capture_text(self.spec).splitlines()[1:]  # drop the header
        lines = [f"{self.password},{row}" for row in body]
        yield from _pace(lines, self.poll_interval, self.speedup)


class TailSource:
    """Follow a growing file from its current end, like tail -f.

    Polls for appended lines; stops when ``stop`` is set. Partial lines
    (no terminator yet) are left in the file until completed.
    """

    def __init__(
        self,
        path: str | Path,
        poll_interval: float = DEFAULT_POLL_INTERVAL,
        stop: threading.Event | None = None,
        from_start: bool = False,
    ) -> None:
        self.path = Path(path)
        self.poll_interval = poll_interval
        self.stop = stop or threading.Event()
        self.from_start = from_start

    def frames(self) -> Iterator[tuple[str, float]]:
        try:
            handle = self.path.open("r", encoding="utf-8")
        except OSError as exc:
            raise SourceError(f"cannot open {self.path}: {exc}") from exc
        with handle:
            if not self.from_start:
                handle.seek(0, 2)
            buffer = ""
            # short sleeps keep shutdown responsive regardless of cadence
            nap = min(self.poll_interval, 0.05)
            while not self.stop.is_set():
                chunk = handle.readline()
                if chunk == "":
                    time.sleep(nap)
                    continue
                buffer += chunk
                if not buffer.endswith("\n"):
                    continue
                line = buffer.rstrip("\r\n")
                buffer = ""
                if line.strip() != "":
                    yield line, time.time()


class SocketSource:
    """Accept newline-delimited records on a listening TCP port.

    One peer at a time; when a connection drops, the listener simply waits
    for the next one, and the silent stretch surfaces as missing frames.
    """

    def __init__(
        self,
        host: str,
        port: int,
        stop: threading.Event | None = None,
    ) -> None:
        self.host = host
        self.port = port
        self.stop = stop or threading.Event()
        self._server: socket.socket | None = None
        self._ready = threading.Event()

    @property
    def bound_port(self) -> int:
        """Actual port after bind (useful when constructed with port 0)."""
        self._ready.wait(timeout=5.0)
        if self._server is None:
            raise SourceError("socket source is not listening")
        return self._server.getsockname()[1]

    def frames(self) -> Iterator[tuple[str, float]]:
        try:
            server = socket.create_server((self.host, self.port))
        except OSError as exc:
            raise SourceError(f"cannot listen on {self.host}:{self.port}: {exc}") from exc
        self._server = server
        self._ready.set()
        with server:
            server.settimeout(0.2)
            while not self.stop.is_set():
                try:
                    conn, _ = server.accept()
                except TimeoutError:
                    continue
                with conn:
                    conn.settimeout(0.2)
                    buffer = b""
                    while not self.stop.is_set():
                        try:
                            chunk = conn.recv(4096)
                        except TimeoutError:
                            continue
                        except OSError:
                            break
                        if chunk == b"":
                            break  # peer closed; wait for the next connection
                        buffer += chunk
                        while b"\n" in buffer:
                            raw, buffer = buffer.split(b"\n", 1)
                            line = raw.decode("utf-8", errors="replace").rstrip("\r")
                            if line.strip() != "":
                                yield line, time.time()


def emit_lines(
    lines: Iterable[str],
    host: str,
    port: int,
    max_backoff: float = 30.0,
    attempts_per_line: int = 8,
) -> int:
    """Send records to a SocketSource peer, reconnecting with bounded
    exponential backoff. Returns the number of lines delivered."""
    sent = 0
    conn: socket.socket | None = None
    try:
        for line in lines:
            payload = (line.rstrip("\r\n") + "\n").encode("utf-8")
            backoff = 0.1
            for attempt in range(attempts_per_line):
                try:
                    if conn is None:
                        conn = socket.create_connection((host, port), timeout=5.0)
                    conn.sendall(payload)
                    sent += 1
                    break
                except OSError:
                    if conn is not None:
                        conn.close()
                        conn = None
                    if attempt == attempts_per_line - 1:
                        raise SourceError(
                            f"giving up sending to {host}:{port} after "
                            f"{attempts_per_line} attempts"
                        )
                    time.sleep(backoff)
                    backoff = min(backoff * 2.0, max_backoff)
    finally:
        if conn is not None:
            conn.close()
    return sent
