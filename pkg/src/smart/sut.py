"""System-under-test adapters: in-process stubs, child processes, TCP peers.

External adapters speak a newline-delimited JSON protocol, one request object
per line::

    {"id": "<string>", "image_path": "<string>"}\n

answered in request order by exactly one of::

    {"id": "<same string>", "sa": <number>}\n
    {"id": "<same string>", "error": "<message>"}\n

Images travel by file path, never inline. Each session owns one serial lane;
parallelism comes from running several sessions over disjoint frame shards.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import select
import shlex
import socket
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, TextIO

import numpy as np

from .core_types import SmartError, SteeringAngle, ValidationError
from .transform import luminance

log = logging.getLogger("smart.sut")


class SutError(SmartError):
    """Base for per-call SUT failures; the pipeline records these per cell."""


class SutTimeout(SutError):
    """No response arrived within the descriptor's timeout."""


class ProtocolError(SutError):
    """The SUT answered with something other than a well-formed response."""


class SutCrashed(SutError):
    """The child process exited or the connection dropped."""


class SutUnreachable(SmartError):
    """The SUT could not be started or contacted at all (fatal, pre-run)."""


class SutKind(enum.Enum):
    IN_PROCESS_STUB = "stub"
    CHILD_PROCESS = "proc"
    NETWORK = "net"


class ClampPolicy(enum.Enum):
    CLAMP = "clamp"
    REJECT = "reject"


@dataclass(frozen=True)
class SutDescriptor:
    """How to reach one steering model: adapter kind, target, and call policy."""

    kind: SutKind
    target: str
    timeout_ms: int = 10_000
    clamp_policy: ClampPolicy = ClampPolicy.CLAMP
    options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValidationError(f"timeout_ms must be > 0, got {self.timeout_ms}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "target": self.target,
            "timeout_ms": self.timeout_ms,
            "clamp_policy": self.clamp_policy.value,
            "options": dict(sorted(self.options.items())),
        }


def parse_descriptor(text: str, timeout_ms: int = 10_000, options: Optional[dict] = None) -> SutDescriptor:
    """Parse the CLI form ``stub:NAME | proc:CMD | net:HOST:PORT``."""
    kind, sep, target = text.partition(":")
    if not sep or not target:
        raise ValidationError(f"SUT descriptor {text!r} must look like stub:NAME, proc:CMD or net:HOST:PORT")
    try:
        sut_kind = SutKind(kind)
    except ValueError:
        raise ValidationError(f"unknown SUT kind {kind!r} in {text!r}") from None
    return SutDescriptor(kind=sut_kind, target=target, timeout_ms=timeout_ms, options=options or {})


# A stub takes the decoded image and the request id ("<frame_id>:<label>")
# and returns a raw steering value; a factory builds one from descriptor options.
StubFn = Callable[[np.ndarray, str], float]
StubFactory = Callable[[dict], StubFn]

_STUB_REGISTRY: dict[str, StubFactory] = {}


def register_stub(name: str, factory: StubFactory) -> None:
    """Register an in-process model under ``stub:<name>``."""
    _STUB_REGISTRY[name] = factory


def stub_names() -> list[str]:
    return sorted(_STUB_REGISTRY)


def _constant_zero_factory(_options: dict) -> StubFn:
    def predict(_image: np.ndarray, _request_id: str) -> float:
        return 0.0

    return predict


def split_request_id(request_id: str) -> tuple[int, str]:
    """Split ``<frame_id>:<label>``; unparseable ids map to frame 0, label as-is."""
    head, sep, label = request_id.partition(":")
    if sep and head.lstrip("-").isdigit():
        return int(head), label
    return 0, request_id


def load_script_table(path: Path | str) -> dict:
    """Load a scripted-stub table: {"frames": {"<frame_id>": {"<label>": sa}}, "default": sa?}."""
    doc = json.loads(Path(path).read_text())
    if "frames" not in doc or not isinstance(doc["frames"], dict):
        raise ValidationError(f"script file {path} must contain a 'frames' object")
    return doc


def _scripted_factory(options: dict) -> StubFn:
    script = options.get("script")
    if not script:
        raise SutUnreachable("scripted stub needs options={'script': <path>}")
    doc = load_script_table(script)
    frames = doc["frames"]
    default = doc.get("default")

    def predict(_image: np.ndarray, request_id: str) -> float:
        frame_id, label = split_request_id(request_id)
        value = frames.get(str(frame_id), {}).get(label, default)
        if value is None:
            raise ProtocolError(f"scripted stub has no value for frame {frame_id}, label {label!r}")
        return float(value)

    return predict


def _brightness_centroid_factory(options: dict) -> StubFn:
    k = float(options.get("k", 1.0))

    def predict(image: np.ndarray, _request_id: str) -> float:
        lum = luminance(image)
        total = lum.sum()
        if total <= 0.0:
            return 0.0
        width = image.shape[1]
        columns = np.arange(width, dtype=np.float64)
        centroid = float((lum.sum(axis=0) * columns).sum() / total)
        return k * (centroid - (width - 1) / 2.0) / (width / 2.0)

    return predict


register_stub("constant-zero", _constant_zero_factory)
register_stub("scripted", _scripted_factory)
register_stub("brightness-centroid", _brightness_centroid_factory)


class SutSession:
    """One serial execution lane. Subclasses implement raw_predict/close."""

    #: whether the pipeline must materialize the image to disk before calling
    needs_image_path = False

    def raw_predict(self, image: np.ndarray, request_id: str, image_path: Optional[str]) -> float:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self) -> "SutSession":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()


class InProcessSession(SutSession):
    def __init__(self, descriptor: SutDescriptor):
        factory = _STUB_REGISTRY.get(descriptor.target)
        if factory is None:
            raise SutUnreachable(f"unknown stub {descriptor.target!r}; have {stub_names()}")
        self._fn = factory(descriptor.options)

    def raw_predict(self, image: np.ndarray, request_id: str, image_path: Optional[str]) -> float:
        return self._fn(image, request_id)


class _LineChannel:
    """Blocking-with-deadline line reader over a raw file descriptor."""

    def __init__(self, fd: int):
        self._fd = fd
        self._buf = b""

    def read_line(self, timeout_s: float) -> bytes:
        deadline = time.monotonic() + timeout_s
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise SutTimeout(f"no response within {timeout_s * 1000:.0f} ms")
            ready, _, _ = select.select([self._fd], [], [], remaining)
            if not ready:
                raise SutTimeout(f"no response within {timeout_s * 1000:.0f} ms")
            chunk = os.read(self._fd, 65536)
            if not chunk:
                raise SutCrashed("peer closed the stream")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line


def _parse_response(line: bytes, request_id: str) -> float:
    try:
        doc = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"unparseable response {line[:200]!r}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("id") != request_id:
        raise ProtocolError(f"response id {doc.get('id')!r} does not match request {request_id!r}")
    if "error" in doc:
        raise ProtocolError(f"SUT error: {doc['error']}")
    sa = doc.get("sa")
    if not isinstance(sa, (int, float)) or isinstance(sa, bool):
        raise ProtocolError(f"response 'sa' must be a number, got {sa!r}")
    return float(sa)


class ChildProcessSession(SutSession):
    """Owns one child process; restarts it after a timeout or crash to resync."""

    needs_image_path = True

    def __init__(self, descriptor: SutDescriptor):
        self._argv = shlex.split(descriptor.target)
        self._timeout_s = descriptor.timeout_ms / 1000.0
        self._proc: Optional[subprocess.Popen] = None
        self._channel: Optional[_LineChannel] = None
        self._stderr_tail: deque[str] = deque(maxlen=20)
        self._start(initial=True)

    def _start(self, initial: bool = False) -> None:
        try:
            self._proc = subprocess.Popen(
                self._argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise SutUnreachable(f"cannot spawn {self._argv}: {exc}") from exc
        self._channel = _LineChannel(self._proc.stdout.fileno())
        drain = threading.Thread(target=self._drain_stderr, args=(self._proc.stderr,), daemon=True)
        drain.start()
        if initial and self._proc.poll() is not None:
            raise SutUnreachable(f"{self._argv} exited immediately with {self._proc.returncode}")

    def _drain_stderr(self, stream) -> None:
        for raw in stream:
            self._stderr_tail.append(raw.decode("utf-8", "replace").rstrip())

    def _restart(self) -> None:
        self.close()
        self._start()

    def raw_predict(self, image: np.ndarray, request_id: str, image_path: Optional[str]) -> float:
        if image_path is None:
            raise ProtocolError("child-process SUT needs a materialized image path")
        if self._proc is None or self._proc.poll() is not None:
            self._restart()
        request = json.dumps({"id": request_id, "image_path": str(image_path)}) + "\n"
        try:
            self._proc.stdin.write(request.encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._restart()
            raise SutCrashed(f"child rejected request: {exc}; stderr: {self._stderr_note()}") from exc
        try:
            line = self._channel.read_line(self._timeout_s)
        except SutCrashed as exc:
            self._restart()
            raise SutCrashed(f"{exc}; stderr: {self._stderr_note()}") from exc
        except SutTimeout:
            self._restart()
            raise
        try:
            return _parse_response(line, request_id)
        except ProtocolError:
            # the lane may be desynced; resync by restarting
            self._restart()
            raise

    def _stderr_note(self) -> str:
        return " | ".join(self._stderr_tail) or "<no stderr>"

    def close(self) -> None:
        if self._proc is None:
            return
        if self._proc.stdin:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=3)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._proc = None
        self._channel = None


class NetworkSession(SutSession):
    """One TCP connection speaking the line protocol; reconnects to resync."""

    needs_image_path = True

    def __init__(self, descriptor: SutDescriptor):
        host, sep, port = descriptor.target.rpartition(":")
        if not sep or not port.isdigit():
            raise SutUnreachable(f"network target {descriptor.target!r} must be HOST:PORT")
        self._address = (host, int(port))
        self._timeout_s = descriptor.timeout_ms / 1000.0
        self._sock: Optional[socket.socket] = None
        self._channel: Optional[_LineChannel] = None
        self._connect(initial=True)

    def _connect(self, initial: bool = False) -> None:
        try:
            self._sock = socket.create_connection(self._address, timeout=self._timeout_s)
        except OSError as exc:
            if initial:
                raise SutUnreachable(f"cannot connect to {self._address}: {exc}") from exc
            raise SutCrashed(f"cannot reconnect to {self._address}: {exc}") from exc
        self._sock.setblocking(False)
        self._channel = _LineChannel(self._sock.fileno())

    def raw_predict(self, image: np.ndarray, request_id: str, image_path: Optional[str]) -> float:
        if image_path is None:
            raise ProtocolError("network SUT needs a materialized image path")
        if self._sock is None:
            self._connect()
        request = json.dumps({"id": request_id, "image_path": str(image_path)}) + "\n"
        try:
            self._sock.sendall(request.encode("utf-8"))
        except (OSError, BlockingIOError) as exc:
            self.close()
            raise SutCrashed(f"send failed: {exc}") from exc
        try:
            line = self._channel.read_line(self._timeout_s)
        except (SutCrashed, SutTimeout):
            self.close()
            raise
        try:
            return _parse_response(line, request_id)
        except ProtocolError:
            self.close()
            raise

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        self._sock = None
        self._channel = None


_SESSION_TYPES = {
    SutKind.IN_PROCESS_STUB: InProcessSession,
    SutKind.CHILD_PROCESS: ChildProcessSession,
    SutKind.NETWORK: NetworkSession,
}


def open_session(descriptor: SutDescriptor) -> SutSession:
    return _SESSION_TYPES[descriptor.kind](descriptor)


def clamp_sa(raw: float, policy: ClampPolicy, context: str = "") -> float:
    """Apply the out-of-range policy to a raw model output."""
    if raw != raw:  # NaN
        raise ProtocolError(f"SUT returned NaN{f' for {context}' if context else ''}")
    if -1.0 <= raw <= 1.0:
        return raw
    if policy is ClampPolicy.REJECT:
        raise ProtocolError(f"SA {raw} outside [-1, 1] and clamp policy is reject")
    clamped = max(-1.0, min(1.0, raw))
    log.warning("clamped out-of-range SA %s to %s%s", raw, clamped, f" ({context})" if context else "")
    return clamped


def execute(
    sut: SutDescriptor | SutSession,
    image: np.ndarray,
    *,
    request_id: str = "0:source",
    image_path: Optional[str] = None,
    clamp_policy: ClampPolicy = ClampPolicy.CLAMP,
) -> SteeringAngle:
    """Run one prediction and normalize the result into a SteeringAngle.

    Raises SutTimeout/ProtocolError/SutCrashed on per-call failure; callers
    that iterate a corpus record these per (frame, config) and continue.
    """
    if isinstance(sut, SutDescriptor):
        session = open_session(sut)
        policy = sut.clamp_policy
        owned = True
    else:
        session = sut
        policy = clamp_policy
        owned = False
    try:
        raw = session.raw_predict(image, request_id, image_path)
        return SteeringAngle(clamp_sa(raw, policy, context=request_id))
    finally:
        if owned:
            session.close()


def serve_lines(stub_fn: StubFn, rfile: TextIO, wfile: TextIO) -> None:
    """Serve the wire protocol over text streams until EOF.

    This is the reference server loop: it decodes the image at image_path,
    calls the stub, clamps to [-1, 1], and always answers in request order.
    Malformed requests produce an error line and the loop continues. Used to
    run the black-box protocol suite against in-process stubs and to back
    test TCP servers.
    """
    from .corpus import load_image  # local import to avoid a module cycle

    for raw in rfile:
        raw = raw.strip()
        if not raw:
            continue
        request_id = ""
        try:
            doc = json.loads(raw)
            if not isinstance(doc, dict) or not isinstance(doc.get("id"), str):
                raise ValueError("request must be an object with a string 'id'")
            request_id = doc["id"]
            image_path = doc.get("image_path")
            if not isinstance(image_path, str):
                raise ValueError("request must carry a string 'image_path'")
            image = load_image(image_path)
            sa = float(stub_fn(image, request_id))
            sa = max(-1.0, min(1.0, sa))
            response = {"id": request_id, "sa": sa}
        except Exception as exc:  # noqa: BLE001 - the loop must survive anything
            response = {"id": request_id, "error": str(exc) or exc.__class__.__name__}
        wfile.write(json.dumps(response) + "\n")
        wfile.flush()
