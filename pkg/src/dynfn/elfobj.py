"""ELF64 object parsing and function byte extraction.

Parses relocatable (.o) and shared (.so) objects enough to pull a named
function's bytes out of its section, using the symbol-table size — never
disassembly. Relocations overlapping the byte range are reported as
unresolved external references: their sites hold assembler placeholders,
so such a payload is not self-contained.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

from .errors import (
    BadHexstring,
    NotAFunction,
    NotAnObject,
    SymbolNotFound,
    TruncatedObject,
    UnsupportedClass,
    ZeroSize,
)

_ELF_MAGIC = b"\x7fELF"
_ELFCLASS64 = 2
_ELFDATA2LSB = 1

_SHT_SYMTAB = 2
_SHT_STRTAB = 3
_SHT_RELA = 4
_SHT_NOBITS = 8
_SHT_DYNSYM = 11

_SHN_UNDEF = 0
_SHN_LORESERVE = 0xFF00

_STT_FUNC = 2
_STT_SECTION = 3

_ET_REL = 1
_ET_DYN = 3


@dataclass(frozen=True)
class Section:
    name: str
    sh_type: int
    addr: int
    offset: int
    size: int
    link: int
    info: int
    entsize: int


@dataclass(frozen=True)
class Symbol:
    name: str
    info: int
    shndx: int
    value: int
    size: int

    @property
    def sym_type(self) -> int:
        return self.info & 0xF


@dataclass(frozen=True)
class Relocation:
    offset: int
    sym_index: int
    reloc_type: int
    addend: int
    section_index: int  # section the relocation applies to (0 for dynamic)


@dataclass
class ObjectImage:
    raw: bytes
    obj_type: int
    sections: list[Section] = field(default_factory=list)
    symbols: list[Symbol] = field(default_factory=list)
    dyn_symbols: list[Symbol] = field(default_factory=list)
    relocations: list[Relocation] = field(default_factory=list)


@dataclass(frozen=True)
class ExtractedFunction:
    name: str
    bytes: bytes
    section: str
    offset: int
    unresolved: tuple[str, ...]


def parse_object(data: bytes) -> ObjectImage:
    """Structural parse of header, sections, symbols, and relocations."""
    if len(data) < 64 or data[:4] != _ELF_MAGIC:
        raise NotAnObject("missing ELF magic")
    if data[4] != _ELFCLASS64 or data[5] != _ELFDATA2LSB:
        raise UnsupportedClass("only little-endian 64-bit objects are supported")
    (e_type, _machine, _version, _entry, _phoff, shoff, _flags, _ehsize,
     _phentsize, _phnum, shentsize, shnum, shstrndx) = struct.unpack_from(
        "<HHIQQQIHHHHHH", data, 16
    )
    if e_type not in (_ET_REL, _ET_DYN):
        raise NotAnObject(f"not a relocatable or shared object (type {e_type})")
    if shoff == 0 or shnum == 0:
        raise TruncatedObject("no section header table")
    if shoff + shnum * shentsize > len(data):
        raise TruncatedObject("section header table out of bounds")

    raw_sections = []
    for i in range(shnum):
        fields = struct.unpack_from("<IIQQQQIIQQ", data, shoff + i * shentsize)
        raw_sections.append(fields)

    if shstrndx >= shnum:
        raise TruncatedObject("bad section name string table index")
    shstr_off, shstr_size = raw_sections[shstrndx][4], raw_sections[shstrndx][5]
    if shstr_off + shstr_size > len(data):
        raise TruncatedObject("section name string table out of bounds")

    def section_name(name_off: int) -> str:
        return _cstr(data, shstr_off + name_off, shstr_off + shstr_size)

    image = ObjectImage(raw=data, obj_type=e_type)
    for name_off, sh_type, _flags, addr, offset, size, link, info, _align, entsize in raw_sections:
        if sh_type != _SHT_NOBITS and offset + size > len(data):
            raise TruncatedObject(f"section body out of bounds at offset {offset:#x}")
        image.sections.append(
            Section(
                name=section_name(name_off),
                sh_type=sh_type,
                addr=addr,
                offset=offset,
                size=size,
                link=link,
                info=info,
                entsize=entsize,
            )
        )

    for idx, sec in enumerate(image.sections):
        if sec.sh_type in (_SHT_SYMTAB, _SHT_DYNSYM):
            table = _parse_symbols(data, sec, image.sections)
            if sec.sh_type == _SHT_SYMTAB:
                image.symbols = table
            else:
                image.dyn_symbols = table
        elif sec.sh_type == _SHT_RELA:
            for off in range(sec.offset, sec.offset + sec.size, 24):
                r_offset, r_info, r_addend = struct.unpack_from("<QQq", data, off)
                image.relocations.append(
                    Relocation(
                        offset=r_offset,
                        sym_index=r_info >> 32,
                        reloc_type=r_info & 0xFFFFFFFF,
                        addend=r_addend,
                        section_index=sec.info,
                    )
                )
    return image


def _cstr(data: bytes, start: int, limit: int) -> str:
    end = data.find(b"\x00", start, limit)
    if end < 0:
        end = limit
    return data[start:end].decode("utf-8", errors="replace")


def _parse_symbols(data: bytes, sec: Section, sections: list[Section]) -> list[Symbol]:
    if sec.link >= len(sections):
        raise TruncatedObject("symbol table links to a bad string table")
    strtab = sections[sec.link]
    symbols = []
    for off in range(sec.offset, sec.offset + sec.size, 24):
        name_off, info, _other, shndx, value, size = struct.unpack_from(
            "<IBBHQQ", data, off
        )
        symbols.append(
            Symbol(
                name=_cstr(data, strtab.offset + name_off, strtab.offset + strtab.size),
                info=info,
                shndx=shndx,
                value=value,
                size=size,
            )
        )
    return symbols


def _find_symbol(image: ObjectImage, name: str) -> tuple[Symbol, list[Symbol]]:
    # shared objects may carry only a dynamic symbol table
    for table in (image.symbols, image.dyn_symbols):
        for sym in table:
            if sym.name == name and sym.shndx != _SHN_UNDEF:
                return sym, table
    raise SymbolNotFound(f"symbol {name!r} not found")


def extract_function(image: ObjectImage, symbol_name: str) -> ExtractedFunction:
    """Copy a function's bytes out of its section, flagging relocations."""
    sym, table = _find_symbol(image, symbol_name)
    if sym.sym_type != _STT_FUNC:
        raise NotAFunction(f"symbol {symbol_name!r} is not a function")
    if sym.size == 0:
        raise ZeroSize(f"symbol {symbol_name!r} has zero size")
    if sym.shndx >= _SHN_LORESERVE or sym.shndx >= len(image.sections):
        raise NotAFunction(f"symbol {symbol_name!r} has no backing section")
    sec = image.sections[sym.shndx]

    if image.obj_type == _ET_REL:
        # st_value is section-relative for relocatable objects
        start_in_section = sym.value
        range_lo, range_hi = sym.value, sym.value + sym.size
        in_range = [
            r for r in image.relocations
            if r.section_index == sym.shndx and range_lo <= r.offset < range_hi
        ]
    else:
        # shared object: st_value is a virtual address
        start_in_section = sym.value - sec.addr
        range_lo, range_hi = sym.value, sym.value + sym.size
        in_range = [
            r for r in image.relocations if range_lo <= r.offset < range_hi
        ]

    file_start = sec.offset + start_in_section
    if file_start + sym.size > len(image.raw):
        raise TruncatedObject(f"symbol {symbol_name!r} extends past end of file")
    code = image.raw[file_start : file_start + sym.size]

    unresolved = []
    for reloc in in_range:
        target = _reloc_target_name(image, table, reloc)
        if target not in unresolved:
            unresolved.append(target)

    return ExtractedFunction(
        name=symbol_name,
        bytes=code,
        section=sec.name,
        offset=start_in_section,
        unresolved=tuple(unresolved),
    )


def _reloc_target_name(image: ObjectImage, table: list[Symbol], reloc: Relocation) -> str:
    if reloc.sym_index < len(table):
        sym = table[reloc.sym_index]
        if sym.sym_type == _STT_SECTION and sym.shndx < len(image.sections):
            return image.sections[sym.shndx].name
        if sym.name:
            return sym.name
    return f"<sym#{reloc.sym_index}>"


# -- hexstring codec ------------------------------------------------------

_HEXSTRING_RE = re.compile(r"^(\\x[0-9a-f]{2})*$")


def to_hexstring(data: bytes) -> str:
    r"""Render bytes as the ``\xNN``-per-byte textual form."""
    return "".join(f"\\x{b:02x}" for b in data)


def from_hexstring(text: str) -> bytes:
    if not _HEXSTRING_RE.match(text):
        raise BadHexstring(f"not a \\xNN hexstring: {text[:40]!r}")
    return bytes(int(text[i + 2 : i + 4], 16) for i in range(0, len(text), 4))
