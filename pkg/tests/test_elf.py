import re
import shutil
import subprocess

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynfn.elfobj import (
    extract_function,
    from_hexstring,
    parse_object,
    to_hexstring,
)
from dynfn.errors import (
    BadHexstring,
    NotAFunction,
    NotAnObject,
    SymbolNotFound,
    TruncatedObject,
    UnsupportedClass,
    ZeroSize,
)

from .conftest import needs_cc, needs_readelf


class TestParseObject:
    def test_random_bytes_rejected(self):
        with pytest.raises(NotAnObject):
            parse_object(b"\x00" * 200)

    def test_short_input_rejected(self):
        with pytest.raises(NotAnObject):
            parse_object(b"\x7fELF")

    @needs_cc
    def test_truncated_body_rejected(self, built_objects):
        data = built_objects["sum"]
        with pytest.raises(TruncatedObject):
            parse_object(data[: len(data) // 2])

    @needs_cc
    def test_32bit_class_rejected(self, built_objects):
        data = bytearray(built_objects["sum"])
        data[4] = 1  # 32-bit class byte
        with pytest.raises(UnsupportedClass):
            parse_object(bytes(data))

    @needs_cc
    def test_parses_symbols_and_sections(self, built_objects):
        image = parse_object(built_objects["sum"])
        names = {sym.name for sym in image.symbols}
        assert "sum" in names
        assert any(sec.name == ".text" for sec in image.sections)


class TestExtractFunction:
    @needs_cc
    def test_sum_is_self_contained_and_runs(self, built_objects):
        extracted = extract_function(parse_object(built_objects["sum"]), "sum")
        assert extracted.unresolved == ()
        assert extracted.section == ".text"
        assert len(extracted.bytes) > 0
        from .test_enclave import direct_call

        assert direct_call(extracted.bytes, 7, 8) == 15

    @needs_cc
    def test_unrewritten_check_password_flags_strcmp(self, built_objects):
        extracted = extract_function(
            parse_object(built_objects["check_password"]), "check_password"
        )
        assert "strcmp" in extracted.unresolved

    @needs_cc
    def test_static_recursive_function_is_self_contained(self, built_objects):
        extracted = extract_function(
            parse_object(built_objects["recursive_fibonacci"]), "recursive_fibonacci"
        )
        assert extracted.unresolved == ()

    @needs_cc
    def test_missing_symbol(self, built_objects):
        with pytest.raises(SymbolNotFound):
            extract_function(parse_object(built_objects["sum"]), "nope")

    @needs_cc
    def test_non_function_symbol(self, built_objects, tmp_path):
        from .conftest import compile_c

        src = tmp_path / "data.c"
        src.write_text("int the_data = 42;\nint use(void){return the_data;}\n")
        image = parse_object(compile_c(src, tmp_path))
        with pytest.raises(NotAFunction):
            extract_function(image, "the_data")

    @needs_cc
    def test_zero_size_symbol(self, built_objects, tmp_path):
        from .conftest import compile_c

        src = tmp_path / "asmfn.c"
        # assembler-level symbol without a .size directive
        src.write_text(
            '__asm__(".globl bare\\n.type bare,@function\\nbare: ret\\n");\n'
            "int anchor(void){return 0;}\n"
        )
        image = parse_object(compile_c(src, tmp_path))
        with pytest.raises(ZeroSize):
            extract_function(image, "bare")


@needs_cc
@needs_readelf
class TestReadelfOracle:
    """Independent oracle: readelf's own parse of the same object."""

    @staticmethod
    def readelf_symbol(obj_path, name):
        out = subprocess.run(
            ["readelf", "-sW", str(obj_path)], capture_output=True, text=True,
            check=True,
        ).stdout
        for line in out.splitlines():
            m = re.match(
                r"\s*\d+:\s+([0-9a-f]+)\s+(\d+)\s+FUNC\s+\S+\s+\S+\s+(\d+)\s+(\S+)$",
                line,
            )
            if m and m.group(4) == name:
                return int(m.group(1), 16), int(m.group(2)), int(m.group(3))
        raise AssertionError(f"readelf did not list {name}")

    @staticmethod
    def readelf_section_bytes(obj_path, index):
        out = subprocess.run(
            ["readelf", "-SW", str(obj_path)], capture_output=True, text=True,
            check=True,
        ).stdout
        m = re.search(
            rf"\[\s*{index}\]\s+(\S+)\s+\S+\s+[0-9a-f]+\s+([0-9a-f]+)\s+([0-9a-f]+)",
            out,
        )
        assert m, f"readelf did not list section {index}"
        name, offset, size = m.group(1), int(m.group(2), 16), int(m.group(3), 16)
        return name, offset, size

    @pytest.mark.parametrize(
        "entry_name,symbol",
        [
            ("sum", "sum"),
            ("check_password", "check_password"),
            ("recursive_fibonacci", "recursive_fibonacci"),
            ("sum_array", "sum_array"),
        ],
    )
    def test_bytes_match_readelf(self, corpus, tmp_path, entry_name, symbol):
        from .conftest import compile_c

        obj_path = tmp_path / f"{entry_name}.o"
        obj_bytes = compile_c(corpus[entry_name].source_path, tmp_path)
        obj_path.write_bytes(obj_bytes)

        value, size, shndx = self.readelf_symbol(obj_path, symbol)
        sec_name, sec_offset, _ = self.readelf_section_bytes(obj_path, shndx)
        oracle = obj_bytes[sec_offset + value : sec_offset + value + size]

        extracted = extract_function(parse_object(obj_bytes), symbol)
        assert extracted.section == sec_name
        assert len(extracted.bytes) == size
        assert extracted.bytes == oracle


class TestHexstring:
    def test_escaped_byte_rendering(self):
        assert to_hexstring(bytes([0x55, 0x48])) == r"\x55\x48"

    def test_empty(self):
        assert to_hexstring(b"") == ""
        assert from_hexstring("") == b""

    def test_bad_token(self):
        with pytest.raises(BadHexstring):
            from_hexstring(r"\x5g")
        with pytest.raises(BadHexstring):
            from_hexstring(r"\x5A")  # uppercase is not canonical
        with pytest.raises(BadHexstring):
            from_hexstring("55 48")

    @given(data=st.binary(max_size=512))
    def test_bijection(self, data):
        assert from_hexstring(to_hexstring(data)) == data
