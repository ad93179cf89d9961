"""Signature descriptors for loaded functions.

A descriptor is a compact string ``ret(args)``:

* ``ret`` is ``i`` (signed 64-bit word) or ``v`` (no return value);
* each arg is ``i`` (64-bit word), ``s`` (NUL-terminated byte string,
  passed as one address word) or ``b`` (byte buffer, passed as two words:
  address, length).

The expanded word count of the arguments may not exceed four: dispatch
always passes exactly four words, which the standard 64-bit calling
convention places in registers, so callees with fewer parameters simply
ignore the padding.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import BadDescriptor

MAX_ARG_WORDS = 4

_DESCRIPTOR_RE = re.compile(r"^(?P<ret>[iv])\((?P<args>[isb]*)\)$")

#: argument kind -> number of machine words it expands to
WORDS_OF_KIND = {"i": 1, "s": 1, "b": 2}


@dataclass(frozen=True)
class SignatureDescriptor:
    """Parsed form of a ``ret(args)`` descriptor string."""

    ret: str
    args: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "SignatureDescriptor":
        m = _DESCRIPTOR_RE.match(text)
        if m is None:
            raise BadDescriptor(f"invalid descriptor: {text!r}")
        args = tuple(m.group("args"))
        desc = cls(ret=m.group("ret"), args=args)
        if desc.arg_words > MAX_ARG_WORDS:
            raise BadDescriptor(
                f"descriptor {text!r} expands to {desc.arg_words} words "
                f"(max {MAX_ARG_WORDS})"
            )
        return desc

    @property
    def arg_words(self) -> int:
        return sum(WORDS_OF_KIND[a] for a in self.args)

    @property
    def returns_word(self) -> bool:
        return self.ret == "i"

    def __str__(self) -> str:
        return f"{self.ret}({''.join(self.args)})"
