"""Reader for the payload corpus manifest.

The corpus is a separate build-time artifact (C sources compiled by an
external toolchain, with committed hexstring fixtures); this module only
consumes its manifest file, which is the corpus's stable interface::

    [
      {
        "name": "sum",
        "source": "src/sum.c",
        "descriptor": "i(ii)",
        "hexstring": "fixtures/sum.hex",
        "expected_io": "expected/sum.json",
        "self_contained": true
      },
      ...
    ]

Paths are relative to the manifest. ``self_contained`` marks payloads
whose committed bytes run anywhere; payloads that link external helpers
embed process-specific addresses and must be rebuilt against a live
address map before execution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .elfobj import from_hexstring

DEFAULT_MANIFEST = Path("corpus") / "manifest.json"


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    source_path: Path
    descriptor: str
    hexstring_path: Path
    expected_io_path: Path
    self_contained: bool

    def read_source(self) -> str:
        return self.source_path.read_text()

    def read_fixture_bytes(self) -> bytes:
        return from_hexstring(self.hexstring_path.read_text().strip())

    def read_expected_io(self) -> list[tuple[list, int | None]]:
        rows = json.loads(self.expected_io_path.read_text())
        return [(row["args"], row.get("ret")) for row in rows]


def load_manifest(path: str | Path = DEFAULT_MANIFEST) -> dict[str, CorpusEntry]:
    path = Path(path)
    base = path.parent
    entries = {}
    for row in json.loads(path.read_text()):
        entry = CorpusEntry(
            name=row["name"],
            source_path=base / row["source"],
            descriptor=row["descriptor"],
            hexstring_path=base / row["hexstring"],
            expected_io_path=base / row["expected_io"],
            self_contained=bool(row["self_contained"]),
        )
        entries[entry.name] = entry
    return entries
