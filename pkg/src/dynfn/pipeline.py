"""Compile/rewrite/extract pipeline driven from the client side.

Stage order: rewrite -> compile -> parse -> extract -> check -> load.
Each failure is labeled with its stage so a user can tell a toolchain
problem from a linking problem from a server rejection.
"""

from __future__ import annotations

import subprocess
import tempfile
from pathlib import Path

from .addrmap import AddressMap
from .elfobj import ExtractedFunction, extract_function, parse_object, to_hexstring
from .errors import DynfnError
from .rewrite import rewrite_source, self_containment_check

# lowest optimization level for byte-stability across runs; stack
# canaries off because their failure hook cannot be distributed-linked
COMPILE_FLAGS = ["-c", "-O0", "-fPIC", "-fno-stack-protector", "-w"]


class PipelineError(DynfnError):
    def __init__(self, stage: str, cause: Exception | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


def compile_source(source: str, cc: str = "cc", workdir: str | None = None) -> bytes:
    """Run the external C toolchain on ``source``; return the object bytes."""
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        src = Path(tmp) / "payload.c"
        obj = Path(tmp) / "payload.o"
        src.write_text(source)
        proc = subprocess.run(
            [cc, *COMPILE_FLAGS, "-o", str(obj), str(src)],
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            raise PipelineError("compile", proc.stderr.strip() or f"{cc} failed")
        return obj.read_bytes()


def build_payload(
    source: str,
    fn_name: str,
    address_map: AddressMap,
    cc: str = "cc",
    workdir: str | None = None,
) -> ExtractedFunction:
    """Rewrite, compile, and extract one function; verified self-contained."""
    try:
        rewritten = rewrite_source(source, address_map)
    except DynfnError as exc:
        raise PipelineError("rewrite", exc) from exc
    object_bytes = compile_source(rewritten, cc=cc, workdir=workdir)
    try:
        image = parse_object(object_bytes)
    except DynfnError as exc:
        raise PipelineError("parse", exc) from exc
    try:
        extracted = extract_function(image, fn_name)
    except DynfnError as exc:
        raise PipelineError("extract", exc) from exc
    try:
        self_containment_check(extracted)
    except DynfnError as exc:
        raise PipelineError("check", exc) from exc
    return extracted


def provision_function(
    session,
    source_path: str | Path,
    fn_name: str,
    descriptor: str,
    cc: str = "cc",
    workdir: str | None = None,
) -> tuple[int, str]:
    """Full client pipeline against an attested session.

    Returns (function id, hexstring of the loaded bytes). The load is
    atomic server-side: any earlier stage failure sends nothing.
    """
    source = Path(source_path).read_text()
    if session.address_map is None:
        raise PipelineError("rewrite", "session has no cached address map")
    extracted = build_payload(source, fn_name, session.address_map, cc=cc, workdir=workdir)
    try:
        fn_id = session.load(fn_name, descriptor, extracted.bytes)
    except DynfnError as exc:
        raise PipelineError("load", exc) from exc
    return fn_id, to_hexstring(extracted.bytes)
