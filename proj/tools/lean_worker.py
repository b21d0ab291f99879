#!/usr/bin/env python3
"""Checker worker that drives a real Lean toolchain.

Speaks the line-oriented JSON protocol on stdin/stdout:

    -> {"id": "<string>", "source": "<string>"}
    <- {"id": "<string>", "ok": <bool>, "messages": [...], "elapsed_ms": <int>}

Each request's source is written to a scratch .lean file and elaborated with
`lake env lean --json <file>` (plain `lean` when no lakefile is present).
Compiler diagnostics map onto the protocol's severity levels verbatim.

Usage:
    lean_worker.py [--project DIR] [--lean CMD]

The harness kills and respawns the worker on timeout, so no internal timeout
handling is needed here.
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time


def find_lean_command(project_dir: str, lean_override: str | None) -> list[str]:
    if lean_override:
        return lean_override.split()
    for name in ("lakefile.lean", "lakefile.toml"):
        if os.path.exists(os.path.join(project_dir, name)):
            return ["lake", "env", "lean"]
    return ["lean"]


def run_check(command: list[str], project_dir: str, source: str) -> tuple[bool, list[dict]]:
    with tempfile.NamedTemporaryFile(
        mode="w", suffix=".lean", dir=project_dir, delete=False, encoding="utf-8"
    ) as handle:
        handle.write(source)
        path = handle.name
    try:
        proc = subprocess.run(
            command + ["--json", path],
            cwd=project_dir,
            capture_output=True,
            text=True,
        )
        messages = []
        for line in proc.stdout.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                diag = json.loads(line)
            except json.JSONDecodeError:
                messages.append({"severity": "info", "text": line})
                continue
            severity = diag.get("severity", "info")
            if severity not in ("error", "warning", "info"):
                severity = "info"
            messages.append({"severity": severity, "text": diag.get("data", "")})
        if proc.returncode != 0 and not any(m["severity"] == "error" for m in messages):
            text = proc.stderr.strip() or f"lean exited with status {proc.returncode}"
            messages.append({"severity": "error", "text": text})
        ok = proc.returncode == 0 and not any(m["severity"] == "error" for m in messages)
        return ok, messages
    finally:
        os.unlink(path)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--project", default=".", help="Lean project root (default: cwd)")
    parser.add_argument("--lean", default=None, help="override the lean command line")
    args = parser.parse_args()

    command = find_lean_command(args.project, args.lean)

    for raw in sys.stdin:
        raw = raw.strip()
        if not raw:
            continue
        try:
            request = json.loads(raw)
            request_id = request["id"]
            source = request["source"]
            if not isinstance(request_id, str) or not isinstance(source, str):
                raise TypeError("id and source must be strings")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            print(f"lean_worker: malformed request: {exc}", file=sys.stderr)
            return 2

        start = time.monotonic()
        try:
            ok, messages = run_check(command, args.project, source)
        except FileNotFoundError as exc:
            ok, messages = False, [{"severity": "error", "text": f"cannot run lean: {exc}"}]
        elapsed_ms = int((time.monotonic() - start) * 1000)

        reply = {"id": request_id, "ok": ok, "messages": messages, "elapsed_ms": elapsed_ms}
        print(json.dumps(reply), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
