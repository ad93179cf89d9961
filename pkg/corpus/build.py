#!/usr/bin/env python3
"""Build the payload corpus: compile, extract, and refresh fixtures.

Drives everything through the external C toolchain and the `dynfn` CLI
(`runtime-map`, `rewrite`, `extract`), never the library internals.

Self-contained payloads get their hexstring fixtures refreshed only with
--refresh (the committed ones are golden). Payloads that link external
helpers embed addresses of the *build* process, so their fixtures are
decode-only reference material; behavioral checks rebuild them against a
live address map.
"""

import argparse
import json
import subprocess
import sys
import tempfile
from pathlib import Path

HERE = Path(__file__).resolve().parent
CFLAGS = ["-c", "-O0", "-fPIC", "-fno-stack-protector", "-w"]


def run(cmd, **kwargs):
    proc = subprocess.run(cmd, capture_output=True, text=True, **kwargs)
    if proc.returncode != 0:
        sys.exit(f"command failed: {' '.join(map(str, cmd))}\n{proc.stderr}")
    return proc.stdout


def build_entry(entry, cc, dynfn, tmp, refresh):
    name = entry["name"]
    source = HERE / entry["source"]
    obj = Path(tmp) / f"{name}.o"

    if entry["self_contained"]:
        run([cc, *CFLAGS, "-o", str(obj), str(source)])
    else:
        map_path = Path(tmp) / "runtime_map.json"
        map_path.write_text(run([*dynfn, "runtime-map"]))
        rewritten = Path(tmp) / f"{name}.rewritten.c"
        rewritten.write_text(
            run([*dynfn, "rewrite", str(source), "--map", str(map_path)])
        )
        run([cc, *CFLAGS, "-o", str(obj), str(rewritten)])

    hexstring = run([*dynfn, "extract", str(obj), name]).strip()
    fixture = HERE / entry["hexstring"]
    if refresh or not fixture.exists():
        fixture.write_text(hexstring + "\n")
        print(f"{name}: wrote {fixture.relative_to(HERE)} ({len(hexstring) // 4} bytes)")
    else:
        print(f"{name}: built OK, fixture kept ({len(hexstring) // 4} bytes fresh)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cc", default="cc")
    parser.add_argument("--refresh", action="store_true",
                        help="overwrite committed hexstring fixtures")
    parser.add_argument("--only", help="build a single corpus entry by name")
    args = parser.parse_args()

    dynfn = [sys.executable, "-m", "dynfn.cli"]
    manifest = json.loads((HERE / "manifest.json").read_text())
    with tempfile.TemporaryDirectory() as tmp:
        for entry in manifest:
            if args.only and entry["name"] != args.only:
                continue
            build_entry(entry, args.cc, dynfn, tmp, args.refresh)


if __name__ == "__main__":
    main()
