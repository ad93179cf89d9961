"""Payload corpus checks: manifest integrity, buildability, and
behavioral equivalence between committed fixtures and fresh builds."""

import subprocess
import sys

import pytest

from dynfn.bench import local_address_map
from dynfn.descriptor import SignatureDescriptor
from dynfn.enclave import Enclave
from dynfn.pipeline import build_payload
from dynfn.rewrite import rewrite_source

from .conftest import CC, REPO_ROOT, needs_cc

ALL_NAMES = {"sum", "check_password", "sum_array", "recursive_fibonacci"}


class TestManifest:
    def test_expected_entries(self, corpus):
        assert set(corpus) == ALL_NAMES

    def test_referenced_files_exist(self, corpus):
        for entry in corpus.values():
            assert entry.source_path.is_file(), entry.name
            assert entry.hexstring_path.is_file(), entry.name
            assert entry.expected_io_path.is_file(), entry.name

    def test_descriptors_are_grammar_valid(self, corpus):
        for entry in corpus.values():
            SignatureDescriptor.parse(entry.descriptor)

    def test_fixtures_decode(self, corpus):
        for entry in corpus.values():
            assert len(entry.read_fixture_bytes()) > 0, entry.name

    def test_expected_io_tables_are_nonempty(self, corpus):
        for entry in corpus.values():
            table = entry.read_expected_io()
            assert table, entry.name
            arity = len(SignatureDescriptor.parse(entry.descriptor).args)
            for args, ret in table:
                assert len(args) == arity
                assert isinstance(ret, int)


def run_io_table(enclave, fn_id, entry):
    for args, expected in entry.read_expected_io():
        got = enclave.execute_function(fn_id, args).return_word
        assert got == expected, f"{entry.name}({args}) = {got}, expected {expected}"


@pytest.fixture(scope="module")
def enclave():
    enc = Enclave()
    yield enc
    enc.close()


@needs_cc
class TestFreshBuilds:
    @pytest.mark.parametrize("name", sorted(ALL_NAMES))
    def test_fresh_build_matches_expected_io(self, corpus, enclave, name):
        entry = corpus[name]
        payload = build_payload(
            entry.read_source(), entry.name, local_address_map(), cc=CC
        )
        fn_id = enclave.register_function(
            payload.bytes, f"{name}_fresh", entry.descriptor
        )
        run_io_table(enclave, fn_id, entry)
        enclave.unregister_function(fn_id)

    @pytest.mark.parametrize("name", ["sum", "recursive_fibonacci"])
    def test_committed_fixture_matches_expected_io(self, corpus, enclave, name):
        # self-contained fixtures are portable bytes: run them as committed
        entry = corpus[name]
        fn_id = enclave.register_function(
            entry.read_fixture_bytes(), f"{name}_fixture", entry.descriptor
        )
        run_io_table(enclave, fn_id, entry)
        enclave.unregister_function(fn_id)

    @pytest.mark.parametrize("name", ["check_password", "sum_array"])
    def test_committed_fixture_is_shape_equivalent(self, corpus, name):
        # address-embedding fixtures cannot run here; a fresh build against
        # this process differs only in the embedded addresses, so the byte
        # length is the invariant that survives
        entry = corpus[name]
        payload = build_payload(
            entry.read_source(), entry.name, local_address_map(), cc=CC
        )
        assert len(entry.read_fixture_bytes()) == len(payload.bytes)

    def test_fibonacci_needs_no_rewriting(self, corpus):
        source = corpus["recursive_fibonacci"].read_source()
        assert rewrite_source(source, local_address_map()) == source

    def test_sum_needs_no_rewriting(self, corpus):
        source = corpus["sum"].read_source()
        assert rewrite_source(source, local_address_map()) == source


@needs_cc
class TestBuildTool:
    def test_build_runs_clean_and_keeps_committed_fixtures(self, corpus):
        before = {
            name: entry.hexstring_path.read_bytes()
            for name, entry in corpus.items()
        }
        result = subprocess.run(
            [sys.executable, str(REPO_ROOT / "corpus" / "build.py"), "--cc", CC],
            capture_output=True, text=True, cwd=REPO_ROOT,
        )
        assert result.returncode == 0, result.stderr
        for name, entry in corpus.items():
            assert "built OK" in result.stdout
            assert entry.hexstring_path.read_bytes() == before[name], name

    def test_build_single_entry(self):
        result = subprocess.run(
            [sys.executable, str(REPO_ROOT / "corpus" / "build.py"),
             "--cc", CC, "--only", "sum"],
            capture_output=True, text=True, cwd=REPO_ROOT,
        )
        assert result.returncode == 0, result.stderr
        assert "sum" in result.stdout
        assert "recursive_fibonacci" not in result.stdout
