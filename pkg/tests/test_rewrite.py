import ctypes

import pytest

from dynfn.addrmap import AddressMap, AddressMapEntry, parse_map_json
from dynfn.elfobj import ExtractedFunction, extract_function, parse_object
from dynfn.errors import ExternalSymbolUnresolved, UnbalancedSource
from dynfn.rewrite import rewrite_source, self_containment_check, tokenize

from .conftest import needs_cc

REFERENCE_MAP_JSON = b"""{
  "snprintf":  "(*(int(*)(0x7f1e438176f0)))",
  "vsnprintf": "(*(int(*)(0x7f1e4381d770)))",
  "strcmp":    "(*(int(*)(0x7f1e438179a0)))"
}"""

CHECK_PASSWORD_SRC = """int check_password(char* input) {
  char password[] = "topsecret123";
  return !strcmp(input, password);
}
"""


@pytest.fixture(scope="module")
def reference_map():
    return parse_map_json(REFERENCE_MAP_JSON)


class TestRewrite:
    def test_check_password_call_site(self, reference_map):
        out = rewrite_source(CHECK_PASSWORD_SRC, reference_map)
        assert "!((int (*)())0x7f1e438179a0ULL)(input, password)" in out
        assert "strcmp" not in out

    def test_string_literal_untouched(self, reference_map):
        src = 'const char *s = "strcmp(a,b)";\n'
        assert rewrite_source(src, reference_map) == src

    def test_char_literal_and_comments_untouched(self, reference_map):
        src = (
            "// strcmp(a, b) in a line comment\n"
            "/* strcmp(a, b) in a block comment */\n"
            "int c = 's';\n"
        )
        assert rewrite_source(src, reference_map) == src

    def test_no_mapped_names_is_byte_identical(self, reference_map):
        src = "int add(int a, int b) { return a + b; }\n"
        assert rewrite_source(src, reference_map) == src

    def test_identifier_not_followed_by_paren_untouched(self, reference_map):
        src = "int (*fp)(const char *, const char *) = strcmp;\n"
        assert rewrite_source(src, reference_map) == src

    def test_same_named_definition_untouched(self, reference_map):
        src = (
            "int strcmp(const char *a, const char *b) {\n"
            "  return 0;\n"
            "}\n"
        )
        assert rewrite_source(src, reference_map) == src

    def test_same_named_declaration_untouched(self, reference_map):
        src = "int strcmp(const char *a, const char *b);\n"
        assert rewrite_source(src, reference_map) == src

    def test_idempotent(self, reference_map):
        once = rewrite_source(CHECK_PASSWORD_SRC, reference_map)
        assert rewrite_source(once, reference_map) == once

    def test_multiple_call_sites(self, reference_map):
        src = "int f(char *a){ return strcmp(a, a) + strcmp(a, a); }\n"
        out = rewrite_source(src, reference_map)
        assert out.count("0x7f1e438179a0ULL") == 2

    def test_pointer_return_type(self):
        m = AddressMap([AddressMapEntry("dup", "char *", 0xABC)])
        out = rewrite_source("char *x = dup(s);\n", m)
        assert "((char * (*)())0xabcULL)(s)" in out


class TestTokenizer:
    def test_unterminated_block_comment(self):
        with pytest.raises(UnbalancedSource):
            tokenize("int a; /* never ends")

    def test_unterminated_string(self):
        with pytest.raises(UnbalancedSource):
            tokenize('char *s = "no end')

    def test_escaped_quote_in_string(self):
        tokens = tokenize(r'char *s = "a\"b";')
        strings = [t for t in tokens if t.kind == "string"]
        assert len(strings) == 1


class TestSelfContainment:
    def test_empty_unresolved_passes(self):
        extracted = ExtractedFunction("f", b"\xc3", ".text", 0, ())
        self_containment_check(extracted)

    def test_nonempty_unresolved_raises(self):
        extracted = ExtractedFunction("f", b"\xc3", ".text", 0, ("strcmp",))
        with pytest.raises(ExternalSymbolUnresolved) as excinfo:
            self_containment_check(extracted)
        assert excinfo.value.names == ["strcmp"]


@needs_cc
class TestCompiledRewrite:
    def real_map(self):
        libc = ctypes.CDLL(None)
        return AddressMap(
            [
                AddressMapEntry(
                    "strcmp", "int",
                    ctypes.cast(libc.strcmp, ctypes.c_void_p).value,
                )
            ]
        )

    def compile_and_extract(self, source, name, tmp_path):
        from .conftest import compile_c

        src = tmp_path / f"{name}.c"
        src.write_text(source)
        return extract_function(parse_object(compile_c(src, tmp_path)), name)

    def test_rewritten_object_has_no_relocations(self, tmp_path, reference_map):
        rewritten = rewrite_source(CHECK_PASSWORD_SRC, reference_map)
        extracted = self.compile_and_extract(rewritten, "check_password", tmp_path)
        assert extracted.unresolved == ()

    def test_unrewritten_object_flags_strcmp(self, tmp_path):
        extracted = self.compile_and_extract(
            CHECK_PASSWORD_SRC, "check_password", tmp_path
        )
        with pytest.raises(ExternalSymbolUnresolved):
            self_containment_check(extracted)

    def test_semantic_preservation_against_native_build(self, tmp_path):
        # oracle: the same logic natively linked in-process via ctypes
        import random
        import string
        import subprocess

        from .conftest import CC

        shared = tmp_path / "native.so"
        src = tmp_path / "native.c"
        src.write_text("#include <string.h>\n" + CHECK_PASSWORD_SRC)
        subprocess.run(
            [CC, "-shared", "-O0", "-fPIC", "-o", str(shared), str(src)],
            check=True, capture_output=True,
        )
        native = ctypes.CDLL(str(shared)).check_password
        native.argtypes = [ctypes.c_char_p]

        rewritten = rewrite_source(CHECK_PASSWORD_SRC, self.real_map())
        extracted = self.compile_and_extract(rewritten, "check_password", tmp_path)
        from .test_enclave import make_enclave

        enclave = make_enclave()
        fn_id = enclave.register_function(extracted.bytes, "check_password", "i(s)")

        rng = random.Random(99)
        inputs = ["topsecret123", "", "topsecret12", "topsecret1234"] + [
            "".join(rng.choices(string.printable[:90], k=rng.randint(0, 24)))
            for _ in range(30)
        ]
        for text in inputs:
            expected = native(text.encode())
            got = enclave.execute_function(fn_id, [text]).return_word
            assert got == expected, text
        enclave.close()
