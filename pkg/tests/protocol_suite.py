"""Black-box wire-protocol conformance suite.

The same fixture (tests/fixtures/protocol/basic_transcript.json) is applied to
every adapter implementation: the in-process stub server, the TCP server, and
the external shim. A runner is any callable that takes a list of raw request
lines and returns the list of raw response lines.

Expectation entries are matched structurally: the id must be preserved, a
numeric ``sa`` must match exactly, and ``"error": true`` means an error line
(no ``sa`` field) whose message text is implementation-defined.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Sequence

FIXTURE = Path(__file__).parent / "fixtures" / "protocol" / "basic_transcript.json"

Runner = Callable[[Sequence[str]], list[str]]


def load_cases(image_path: str, missing_path: str) -> list[dict]:
    """Load the fixture, substituting the real scratch paths."""
    text = FIXTURE.read_text()
    text = text.replace("<IMG>", json.dumps(image_path)[1:-1])
    text = text.replace("<MISSING>", json.dumps(missing_path)[1:-1])
    return json.loads(text)["cases"]


def request_lines(cases: Sequence[dict]) -> list[str]:
    lines = []
    for case in cases:
        if "raw_request" in case:
            lines.append(case["raw_request"])
        else:
            lines.append(json.dumps(case["request"]))
    return lines


def check_transcript(cases: Sequence[dict], responses: Sequence[str]) -> None:
    assert len(responses) == len(cases), (
        f"expected {len(cases)} response lines, got {len(responses)}: {responses!r}"
    )
    for case, raw in zip(cases, responses):
        doc = json.loads(raw)
        expect = case["expect"]
        name = case.get("name", "?")
        assert doc.get("id") == expect["id"], f"{name}: id {doc.get('id')!r} != {expect['id']!r}"
        if expect.get("error"):
            assert "error" in doc and "sa" not in doc, f"{name}: expected an error line, got {doc}"
        else:
            assert "error" not in doc, f"{name}: unexpected error {doc}"
            assert doc.get("sa") == expect["sa"], f"{name}: sa {doc.get('sa')!r} != {expect['sa']!r}"


def run_suite(runner: Runner, image_path: str, missing_path: str) -> list[str]:
    cases = load_cases(image_path, missing_path)
    responses = runner(request_lines(cases))
    check_transcript(cases, responses)
    return responses


def ordering_requests(image_path: str, n: int = 100) -> tuple[list[str], list[str]]:
    """n pipelined requests and their expected ids, for the order-preservation check."""
    ids = [f"order-{i}" for i in range(n)]
    lines = [json.dumps({"id": rid, "image_path": image_path}) for rid in ids]
    return lines, ids


def check_ordering(responses: Sequence[str], ids: Sequence[str]) -> None:
    assert len(responses) == len(ids)
    for raw, rid in zip(responses, ids):
        doc = json.loads(raw)
        assert doc["id"] == rid
        assert "sa" in doc
