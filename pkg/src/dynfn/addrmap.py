"""Name -> (return type, address) tables and their JSON wire form.

The wire value format is the cast string ``(*(RET(*)(0xADDR)))``; the
source rewriter emits a different, compilable spelling (see
:mod:`dynfn.rewrite`).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import BadCastString, MalformedMap

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_CAST_RE = re.compile(r"^\(\*\((?P<ret>.+?)\(\*\)\((?P<addr>0x[0-9a-f]+)\)\)\)$")


@dataclass(frozen=True)
class AddressMapEntry:
    name: str
    return_type: str
    address: int

    def __post_init__(self):
        if not _IDENT_RE.match(self.name):
            raise MalformedMap(f"{self.name!r} is not a valid C identifier")
        if self.address == 0:
            raise MalformedMap(f"entry {self.name!r} has a null address")

    def cast_string(self) -> str:
        return f"(*({self.return_type}(*)({self.address:#x})))"


class AddressMap:
    """Ordered name -> entry table; names are unique."""

    def __init__(self, entries: list[AddressMapEntry] | None = None):
        self._entries: dict[str, AddressMapEntry] = {}
        for entry in entries or []:
            self.add(entry)

    def add(self, entry: AddressMapEntry) -> None:
        if entry.name in self._entries:
            raise MalformedMap(f"duplicate map name {entry.name!r}")
        self._entries[entry.name] = entry

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.values())

    def __getitem__(self, name: str) -> AddressMapEntry:
        return self._entries[name]

    def __eq__(self, other) -> bool:
        if not isinstance(other, AddressMap):
            return NotImplemented
        return list(self) == list(other)

    def names(self) -> list[str]:
        return list(self._entries)


def build_address_map(enclave) -> AddressMap:
    """Snapshot the enclave's callable surface: runtime helpers + live
    user functions."""
    return AddressMap(
        [AddressMapEntry(name, ret, addr) for name, ret, addr in enclave.get_fas()]
    )


def render_map_json(address_map: AddressMap) -> bytes:
    obj = {entry.name: entry.cast_string() for entry in address_map}
    return json.dumps(obj, indent=2).encode()


def parse_map_json(data: bytes) -> AddressMap:
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedMap(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or not all(isinstance(v, str) for v in obj.values()):
        raise MalformedMap("address map must be a JSON object of strings")
    address_map = AddressMap()
    for name, value in obj.items():
        m = _CAST_RE.match(value)
        if m is None:
            raise BadCastString(f"bad cast string for {name!r}: {value!r}")
        address_map.add(
            AddressMapEntry(
                name=name,
                return_type=m.group("ret"),
                address=int(m.group("addr"), 16),
            )
        )
    return address_map
