"""Client-side C source rewriting against an address map.

Replaces each call-position identifier that appears in the map with a
call-through-address expression. The wire cast-string format is kept for
fidelity with the map encoding, but it is not a valid C expression, so
the rewriter emits the compilable equivalent
``((RET (*)())0xADDRULL)`` — an unprototyped function-pointer call that
accepts the call-site arguments unchanged (argument promotion rules
apply, since parameter types are not carried in the map).

Rewriting is token-based: identifiers inside string literals, character
literals, and comments are never touched, and declarations/definitions
(identifier preceded by a type name, or parameter list followed by a
body) are left intact.
"""

from __future__ import annotations

from dataclasses import dataclass

from .addrmap import AddressMap
from .elfobj import ExtractedFunction
from .errors import ExternalSymbolUnresolved, UnbalancedSource

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")

# keywords that precede an expression, never a declarator
_EXPR_KEYWORDS = {"return", "else", "case", "goto", "do", "sizeof"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | char | comment | space | punct
    start: int
    end: int


def tokenize(source: str) -> list[Token]:
    """Minimal C lexer, precise about the constructs that can hide
    identifiers (strings, chars, comments)."""
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            j = i
            while j < n and source[j].isspace():
                j += 1
            tokens.append(Token("space", i, j))
        elif c == "/" and i + 1 < n and source[i + 1] == "/":
            j = source.find("\n", i)
            j = n if j < 0 else j
            tokens.append(Token("comment", i, j))
        elif c == "/" and i + 1 < n and source[i + 1] == "*":
            j = source.find("*/", i + 2)
            if j < 0:
                raise UnbalancedSource(f"unterminated block comment at offset {i}")
            j += 2
            tokens.append(Token("comment", i, j))
        elif c in "\"'":
            j = i + 1
            while j < n:
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == c:
                    break
                if source[j] == "\n" and c == '"':
                    raise UnbalancedSource(f"unterminated string at offset {i}")
                j += 1
            if j >= n:
                what = "string" if c == '"' else "char"
                raise UnbalancedSource(f"unterminated {what} literal at offset {i}")
            tokens.append(Token("string" if c == '"' else "char", i, j + 1))
            j += 1
        elif c in _IDENT_START:
            j = i
            while j < n and source[j] in _IDENT_CONT:
                j += 1
            tokens.append(Token("ident", i, j))
        elif c.isdigit():
            j = i
            while j < n and (source[j] in _IDENT_CONT or source[j] == "."):
                j += 1
            tokens.append(Token("number", i, j))
        else:
            tokens.append(Token("punct", i, i + 1))
        i = tokens[-1].end
    return tokens


def _next_significant(tokens: list[Token], index: int) -> int:
    for j in range(index + 1, len(tokens)):
        if tokens[j].kind not in ("space", "comment"):
            return j
    return -1


def _prev_significant(tokens: list[Token], index: int) -> int:
    for j in range(index - 1, -1, -1):
        if tokens[j].kind not in ("space", "comment"):
            return j
    return -1


def _is_definition_or_declaration(source: str, tokens: list[Token], index: int) -> bool:
    """True when the identifier heads a declarator rather than a call."""
    prev = _prev_significant(tokens, index)
    if prev >= 0:
        tok = tokens[prev]
        text = source[tok.start : tok.end]
        if (tok.kind == "ident" and text not in _EXPR_KEYWORDS) or text == "*":
            return True
    # parameter list followed by a body: scan to the matching close paren
    open_paren = _next_significant(tokens, index)
    depth = 0
    j = open_paren
    while j >= 0 and j < len(tokens):
        text = source[tokens[j].start : tokens[j].end]
        if tokens[j].kind == "punct":
            if text == "(":
                depth += 1
            elif text == ")":
                depth -= 1
                if depth == 0:
                    after = _next_significant(tokens, j)
                    return after >= 0 and source[
                        tokens[after].start : tokens[after].end
                    ] == "{"
        j = _next_significant(tokens, j)
    return False


def call_expression(return_type: str, address: int) -> str:
    return f"(({return_type} (*)())0x{address:x}ULL)"


def rewrite_source(source: str, address_map: AddressMap) -> str:
    """Rewrite mapped call-position identifiers; byte-identical output
    when nothing matches. Idempotent: rewritten call sites contain no
    identifier left to match."""
    tokens = tokenize(source)
    pieces = []
    last = 0
    for index, tok in enumerate(tokens):
        if tok.kind != "ident":
            continue
        name = source[tok.start : tok.end]
        if name not in address_map:
            continue
        following = _next_significant(tokens, index)
        if following < 0 or source[
            tokens[following].start : tokens[following].end
        ] != "(":
            continue
        if _is_definition_or_declaration(source, tokens, index):
            continue
        entry = address_map[name]
        pieces.append(source[last : tok.start])
        pieces.append(call_expression(entry.return_type, entry.address))
        last = tok.end
    pieces.append(source[last:])
    return "".join(pieces)


def self_containment_check(extracted: ExtractedFunction) -> None:
    """Reject payloads whose byte range still carries relocations."""
    if extracted.unresolved:
        raise ExternalSymbolUnresolved(extracted.unresolved)
