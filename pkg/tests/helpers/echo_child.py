#!/usr/bin/env python3
"""Minimal child-process SUT used to exercise the proc adapter in tests.

Speaks the newline-delimited JSON protocol and answers 0.0 for every request
whose image file exists. ``--sa V`` overrides the constant; ``--hang-on ID``
never answers the request with that id (for timeout tests); ``--garble-on
ID`` answers with a non-JSON line (for protocol-error tests).
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--sa", type=float, default=0.0)
    parser.add_argument("--hang-on", default=None)
    parser.add_argument("--garble-on", default=None)
    args = parser.parse_args()

    for raw in sys.stdin:
        raw = raw.strip()
        if not raw:
            continue
        request_id = ""
        try:
            doc = json.loads(raw)
            if not isinstance(doc, dict) or not isinstance(doc.get("id"), str):
                raise ValueError("request must be an object with a string 'id'")
            request_id = doc["id"]
            if request_id == args.hang_on:
                continue
            if request_id == args.garble_on:
                sys.stdout.write("!!not json!!\n")
                sys.stdout.flush()
                continue
            if not os.path.isfile(doc["image_path"]):
                raise FileNotFoundError(doc["image_path"])
            response = {"id": request_id, "sa": args.sa}
        except Exception as exc:  # noqa: BLE001
            response = {"id": request_id, "error": str(exc)}
        sys.stdout.write(json.dumps(response) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
