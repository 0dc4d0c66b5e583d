"""Stub models, clamping, the line protocol, and the external adapters."""

from __future__ import annotations

import io
import json
import socketserver
import sys
import threading
from pathlib import Path

import numpy as np
import pytest

from smart.corpus import save_image
from smart.core_types import SteeringAngle
from smart.sut import (
    ClampPolicy,
    InProcessSession,
    ProtocolError,
    SutCrashed,
    SutDescriptor,
    SutKind,
    SutTimeout,
    SutUnreachable,
    clamp_sa,
    execute,
    open_session,
    parse_descriptor,
    register_stub,
    serve_lines,
    split_request_id,
)

import protocol_suite

ECHO_CHILD = Path(__file__).parent / "helpers" / "echo_child.py"


def stub_descriptor(name: str, **options) -> SutDescriptor:
    return SutDescriptor(kind=SutKind.IN_PROCESS_STUB, target=name, options=options)


@pytest.fixture()
def tiny_png(tmp_path) -> Path:
    path = tmp_path / "frame.png"
    save_image(np.zeros((6, 8, 3), dtype=np.uint8), path)
    return path


class TestParseDescriptor:
    def test_forms(self):
        assert parse_descriptor("stub:constant-zero").kind is SutKind.IN_PROCESS_STUB
        assert parse_descriptor("proc:python3 model.py --flag").target == "python3 model.py --flag"
        assert parse_descriptor("net:localhost:9000").kind is SutKind.NETWORK

    def test_rejects_garbage(self):
        from smart.core_types import ValidationError

        with pytest.raises(ValidationError):
            parse_descriptor("wat")
        with pytest.raises(ValidationError):
            parse_descriptor("ftp:nope")


class TestStubs:
    def test_constant_zero(self):
        image = np.random.default_rng(0).integers(0, 255, (10, 12, 3), dtype=np.uint8)
        assert execute(stub_descriptor("constant-zero"), image).value == 0.0

    def test_unknown_stub_unreachable(self):
        with pytest.raises(SutUnreachable):
            open_session(stub_descriptor("no-such-model"))

    def test_scripted_replays_table(self, tmp_path):
        script = tmp_path / "script.json"
        script.write_text(json.dumps({
            "frames": {"0": {"source": 0.02, "car-red": 0.02, "car-blue": -0.09}}
        }))
        session = open_session(stub_descriptor("scripted", script=str(script)))
        image = np.zeros((4, 4, 3), dtype=np.uint8)
        assert session.raw_predict(image, "0:source", None) == 0.02
        assert session.raw_predict(image, "0:car-red", None) == 0.02
        assert session.raw_predict(image, "0:car-blue", None) == -0.09
        with pytest.raises(ProtocolError):
            session.raw_predict(image, "0:car-grey", None)
        with pytest.raises(ProtocolError):
            session.raw_predict(image, "1:source", None)

    def test_scripted_default_fallback(self, tmp_path):
        script = tmp_path / "script.json"
        script.write_text(json.dumps({"frames": {}, "default": 0.5}))
        session = open_session(stub_descriptor("scripted", script=str(script)))
        assert session.raw_predict(np.zeros((4, 4, 3), dtype=np.uint8), "9:anything", None) == 0.5

    def test_brightness_centroid_uniform_is_zero(self):
        image = np.full((20, 30, 3), 128, dtype=np.uint8)
        assert execute(stub_descriptor("brightness-centroid"), image).value == pytest.approx(0.0, abs=1e-12)

    def test_brightness_centroid_black_is_zero(self):
        assert execute(stub_descriptor("brightness-centroid"), np.zeros((8, 8, 3), dtype=np.uint8)).value == 0.0

    def test_brightness_centroid_tracks_bright_column(self):
        image = np.zeros((10, 40, 3), dtype=np.uint8)
        image[:, 30:32] = 255
        right = execute(stub_descriptor("brightness-centroid"), image).value
        image2 = np.zeros((10, 40, 3), dtype=np.uint8)
        image2[:, 8:10] = 255
        left = execute(stub_descriptor("brightness-centroid"), image2).value
        assert right > 0 > left

    def test_statelessness(self):
        image = np.random.default_rng(1).integers(0, 255, (16, 16, 3), dtype=np.uint8)
        for name in ("constant-zero", "brightness-centroid"):
            a = execute(stub_descriptor(name), image).value
            b = execute(stub_descriptor(name), image).value
            assert a == b

    def test_register_custom_stub(self):
        register_stub("half", lambda options: (lambda image, rid: 0.5))
        assert execute(stub_descriptor("half"), np.zeros((2, 2, 3), dtype=np.uint8)).value == 0.5


class TestClamping:
    def test_in_range_untouched(self):
        assert clamp_sa(0.25, ClampPolicy.CLAMP) == 0.25

    def test_clamps_and_returns_bound(self):
        assert clamp_sa(1.7, ClampPolicy.CLAMP) == 1.0
        assert clamp_sa(-3.0, ClampPolicy.CLAMP) == -1.0

    def test_reject_policy_raises(self):
        with pytest.raises(ProtocolError):
            clamp_sa(1.7, ClampPolicy.REJECT)

    def test_nan_rejected(self):
        with pytest.raises(ProtocolError):
            clamp_sa(float("nan"), ClampPolicy.CLAMP)

    def test_execute_applies_policy(self):
        register_stub("too-big", lambda options: (lambda image, rid: 2.0))
        image = np.zeros((2, 2, 3), dtype=np.uint8)
        assert execute(stub_descriptor("too-big"), image) == SteeringAngle(1.0)


class TestSplitRequestId:
    def test_round_trip(self):
        assert split_request_id("17:car-blue") == (17, "car-blue")
        assert split_request_id("3:source") == (3, "source")

    def test_unparseable_keeps_label(self):
        assert split_request_id("free-form") == (0, "free-form")


def serve_runner(stub_name: str):
    """Run request lines through the in-process protocol server."""

    def run(lines):
        session = InProcessSession(stub_descriptor(stub_name))
        rfile = io.StringIO("".join(line + "\n" for line in lines))
        wfile = io.StringIO()
        serve_lines(session._fn, rfile, wfile)
        return wfile.getvalue().splitlines()

    return run


class TestServeLines:
    def test_conformance_suite(self, tiny_png, tmp_path):
        protocol_suite.run_suite(
            serve_runner("constant-zero"), str(tiny_png), str(tmp_path / "missing.png")
        )

    def test_order_preserved(self, tiny_png):
        lines, ids = protocol_suite.ordering_requests(str(tiny_png), n=100)
        responses = serve_runner("constant-zero")(lines)
        protocol_suite.check_ordering(responses, ids)

    def test_clamps_output(self, tiny_png):
        register_stub("way-out", lambda options: (lambda image, rid: 5.0))
        responses = serve_runner("way-out")([json.dumps({"id": "a", "image_path": str(tiny_png)})])
        assert json.loads(responses[0])["sa"] == 1.0


def child_descriptor(*extra_args: str, timeout_ms: int = 5000) -> SutDescriptor:
    argv = f"{sys.executable} {ECHO_CHILD}"
    if extra_args:
        argv += " " + " ".join(extra_args)
    return SutDescriptor(kind=SutKind.CHILD_PROCESS, target=argv, timeout_ms=timeout_ms)


class TestChildProcessAdapter:
    def test_round_trip(self, tiny_png):
        image = np.zeros((6, 8, 3), dtype=np.uint8)
        with open_session(child_descriptor()) as session:
            sa = session.raw_predict(image, "0:source", str(tiny_png))
            assert sa == 0.0

    def test_custom_value(self, tiny_png):
        with open_session(child_descriptor("--sa -0.25")) as session:
            assert session.raw_predict(None, "1:x", str(tiny_png)) == -0.25

    def test_error_response_is_protocol_error(self, tiny_png, tmp_path):
        with open_session(child_descriptor()) as session:
            with pytest.raises(ProtocolError):
                session.raw_predict(None, "2:x", str(tmp_path / "gone.png"))

    def test_timeout_then_recovers(self, tiny_png):
        with open_session(child_descriptor("--hang-on 0:slow", timeout_ms=300)) as session:
            with pytest.raises(SutTimeout):
                session.raw_predict(None, "0:slow", str(tiny_png))
            # the lane restarted: later calls still work
            assert session.raw_predict(None, "0:next", str(tiny_png)) == 0.0

    def test_garbled_response_is_protocol_error(self, tiny_png):
        with open_session(child_descriptor("--garble-on 0:bad")) as session:
            with pytest.raises(ProtocolError):
                session.raw_predict(None, "0:bad", str(tiny_png))
            assert session.raw_predict(None, "0:good", str(tiny_png)) == 0.0

    def test_unreachable_command(self):
        descriptor = SutDescriptor(kind=SutKind.CHILD_PROCESS, target="/no/such/binary-xyz")
        with pytest.raises(SutUnreachable):
            open_session(descriptor)

    def test_conformance_suite_through_child(self, tiny_png, tmp_path):
        def run(lines):
            import subprocess

            proc = subprocess.run(
                [sys.executable, str(ECHO_CHILD)],
                input="".join(line + "\n" for line in lines),
                capture_output=True,
                text=True,
                timeout=30,
            )
            return proc.stdout.splitlines()

        protocol_suite.run_suite(run, str(tiny_png), str(tmp_path / "missing.png"))


class _StubTCPHandler(socketserver.StreamRequestHandler):
    def handle(self):
        session = InProcessSession(stub_descriptor("constant-zero"))
        rfile = io.TextIOWrapper(self.rfile, encoding="utf-8")
        wfile = io.TextIOWrapper(self.wfile, encoding="utf-8", write_through=True)
        serve_lines(session._fn, rfile, wfile)


@pytest.fixture()
def tcp_server():
    server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), _StubTCPHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server.server_address
    server.shutdown()
    server.server_close()


class TestNetworkAdapter:
    def test_round_trip(self, tcp_server, tiny_png):
        host, port = tcp_server
        descriptor = SutDescriptor(kind=SutKind.NETWORK, target=f"{host}:{port}", timeout_ms=5000)
        with open_session(descriptor) as session:
            assert session.raw_predict(None, "0:source", str(tiny_png)) == 0.0
            assert session.raw_predict(None, "0:center", str(tiny_png)) == 0.0

    def test_connection_refused_unreachable(self):
        descriptor = SutDescriptor(kind=SutKind.NETWORK, target="127.0.0.1:1", timeout_ms=500)
        with pytest.raises(SutUnreachable):
            open_session(descriptor)
