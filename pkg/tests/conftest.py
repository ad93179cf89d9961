import shutil
import subprocess
from pathlib import Path

import pytest

from dynfn.client import ClientSession
from dynfn.corpus import load_manifest
from dynfn.server import DynfnServer

REPO_ROOT = Path(__file__).resolve().parent.parent
MANIFEST = REPO_ROOT / "corpus" / "manifest.json"

CC = shutil.which("cc") or shutil.which("gcc")
CFLAGS = ["-c", "-O0", "-fPIC", "-fno-stack-protector", "-w"]

needs_cc = pytest.mark.skipif(CC is None, reason="no C toolchain on PATH")
needs_readelf = pytest.mark.skipif(
    shutil.which("readelf") is None, reason="readelf not available"
)


@pytest.fixture(scope="session")
def corpus():
    return load_manifest(MANIFEST)


def compile_c(source_path: Path, out_dir: Path) -> bytes:
    obj = out_dir / (source_path.stem + ".o")
    subprocess.run(
        [CC, *CFLAGS, "-o", str(obj), str(source_path)],
        check=True,
        capture_output=True,
    )
    return obj.read_bytes()


@pytest.fixture(scope="session")
def built_objects(corpus, tmp_path_factory):
    """Corpus sources compiled fresh, un-rewritten."""
    if CC is None:
        pytest.skip("no C toolchain on PATH")
    out = tmp_path_factory.mktemp("objects")
    return {
        name: compile_c(entry.source_path, out) for name, entry in corpus.items()
    }


@pytest.fixture()
def server():
    srv = DynfnServer(("127.0.0.1", 0))
    srv.start_background()
    yield srv
    srv.shutdown()


@pytest.fixture()
def session(server):
    s = ClientSession(server.address)
    s.attest(server.verify_key_bytes, server.measurement)
    yield s
    s.close()


def attested_session(server) -> ClientSession:
    s = ClientSession(server.address)
    s.attest(server.verify_key_bytes, server.measurement)
    return s
