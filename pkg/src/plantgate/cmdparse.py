"""Parser for the remote-maintenance command language.

One command per line, space-separated tokens, case-sensitive verbs:

    read <asset id> <addr> <length>
    write <asset id> <addr> <length> <space separated hex data>
    update <asset id> <filename>
    read_s <key> <asset id> <addr> <length>
    write_s <key> <asset id> <addr> <length> <space separated hex data>
    store_s <key> <asset id>
    gen_threat_profile_s <key>

Numeric tokens are decimal or 0x-prefixed hexadecimal; addresses and lengths
fit 16 bits. Data words are exactly four hex digits each and ``length`` counts
registers. Keys are 64 hex characters (32 bytes). Parsing is pure: no side
effects, and every line not derivable from the grammar yields exactly one
error code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

KEY_HEX_LEN = 64
WORD_RE = re.compile(r"^[0-9a-fA-F]{4}$")
HEX_RE = re.compile(r"^[0-9a-fA-F]+$")
DEC_RE = re.compile(r"^[0-9]+$")
HEXNUM_RE = re.compile(r"^0[xX][0-9a-fA-F]+$")


class CommandKind(Enum):
    READ = "read"
    WRITE = "write"
    UPDATE = "update"
    READ_S = "read_s"
    WRITE_S = "write_s"
    STORE_S = "store_s"
    GEN_THREAT_PROFILE_S = "gen_threat_profile_s"


KEYED_KINDS = {
    CommandKind.READ_S,
    CommandKind.WRITE_S,
    CommandKind.STORE_S,
    CommandKind.GEN_THREAT_PROFILE_S,
}


class ParseErrorCode(Enum):
    EMPTY_INPUT = "EmptyInput"
    UNKNOWN_VERB = "UnknownVerb"
    ARITY_MISMATCH = "ArityMismatch"
    BAD_NUMBER = "BadNumber"
    LENGTH_MISMATCH = "LengthMismatch"
    BAD_HEX = "BadHex"
    BAD_KEY_LENGTH = "BadKeyLength"


class ParseError(ValueError):
    def __init__(self, code: ParseErrorCode, detail: str = ""):
        super().__init__(f"{code.value}: {detail}" if detail else code.value)
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class ValidatedCommand:
    """A parsed, integrity-checked command. Field presence matches the kind."""

    kind: CommandKind
    key: Optional[bytes] = None
    asset_id: Optional[int] = None
    addr: Optional[int] = None
    length: Optional[int] = None
    data: Optional[tuple[int, ...]] = None
    filename: Optional[str] = None

    def __post_init__(self):
        want_key = self.kind in KEYED_KINDS
        if want_key != (self.key is not None):
            raise ValueError(f"{self.kind.value}: key presence mismatch")
        if self.key is not None and len(self.key) != KEY_HEX_LEN // 2:
            raise ValueError("key must be 32 bytes")

        want_asset = self.kind is not CommandKind.GEN_THREAT_PROFILE_S
        if want_asset != (self.asset_id is not None):
            raise ValueError(f"{self.kind.value}: asset_id presence mismatch")
        if self.asset_id is not None and self.asset_id < 1:
            raise ValueError("asset_id must be positive")

        want_window = self.kind in (
            CommandKind.READ,
            CommandKind.WRITE,
            CommandKind.READ_S,
            CommandKind.WRITE_S,
        )
        if want_window != (self.addr is not None) or want_window != (self.length is not None):
            raise ValueError(f"{self.kind.value}: addr/length presence mismatch")
        if self.length is not None and self.length < 1:
            raise ValueError("length must be at least 1")

        want_data = self.kind in (CommandKind.WRITE, CommandKind.WRITE_S)
        if want_data != (self.data is not None):
            raise ValueError(f"{self.kind.value}: data presence mismatch")
        if self.data is not None and len(self.data) != self.length:
            raise ValueError("data word count must equal length")
        if self.data is not None and any(not 0 <= w <= 0xFFFF for w in self.data):
            raise ValueError("data words must fit 16 bits")

        want_filename = self.kind is CommandKind.UPDATE
        if want_filename != (self.filename is not None):
            raise ValueError(f"{self.kind.value}: filename presence mismatch")
        if self.filename is not None and not self.filename:
            raise ValueError("filename must be non-empty")


def _number(token: str, lo: int, hi: int, what: str) -> int:
    if DEC_RE.match(token):
        value = int(token, 10)
    elif HEXNUM_RE.match(token):
        value = int(token, 16)
    else:
        raise ParseError(ParseErrorCode.BAD_NUMBER, f"{what}: {token!r} is not a number")
    if not lo <= value <= hi:
        raise ParseError(
            ParseErrorCode.BAD_NUMBER, f"{what}: {token!r} outside [{lo}, {hi}]"
        )
    return value


def _asset_id(token: str) -> int:
    return _number(token, 1, 0xFFFFFFFF, "asset id")


def _addr(token: str) -> int:
    return _number(token, 0, 0xFFFF, "address")


def _length(token: str) -> int:
    return _number(token, 1, 0xFFFF, "length")


def _key(token: str) -> bytes:
    if len(token) != KEY_HEX_LEN:
        raise ParseError(
            ParseErrorCode.BAD_KEY_LENGTH,
            f"key must be {KEY_HEX_LEN} hex characters, got {len(token)}",
        )
    if not HEX_RE.match(token):
        raise ParseError(ParseErrorCode.BAD_HEX, "key contains non-hex characters")
    return bytes.fromhex(token)


def _data_words(tokens: list[str], length: int) -> tuple[int, ...]:
    if len(tokens) != length:
        raise ParseError(
            ParseErrorCode.LENGTH_MISMATCH,
            f"{len(tokens)} data word(s) for length {length}",
        )
    words = []
    for token in tokens:
        if not WORD_RE.match(token):
            raise ParseError(
                ParseErrorCode.BAD_HEX, f"data word {token!r} is not 4 hex digits"
            )
        words.append(int(token, 16))
    return tuple(words)


def _exact_arity(args: list[str], n: int, verb: str) -> None:
    if len(args) != n:
        raise ParseError(
            ParseErrorCode.ARITY_MISMATCH, f"{verb} takes {n} argument(s), got {len(args)}"
        )


def _min_arity(args: list[str], n: int, verb: str) -> None:
    if len(args) < n:
        raise ParseError(
            ParseErrorCode.ARITY_MISMATCH,
            f"{verb} takes at least {n} argument(s), got {len(args)}",
        )


def parse(line: str) -> ValidatedCommand:
    tokens = line.split()
    if not tokens:
        raise ParseError(ParseErrorCode.EMPTY_INPUT)
    verb, args = tokens[0], tokens[1:]

    if verb == CommandKind.READ.value:
        _exact_arity(args, 3, verb)
        return ValidatedCommand(
            CommandKind.READ,
            asset_id=_asset_id(args[0]),
            addr=_addr(args[1]),
            length=_length(args[2]),
        )
    if verb == CommandKind.WRITE.value:
        _min_arity(args, 3, verb)
        length = _length(args[2])
        return ValidatedCommand(
            CommandKind.WRITE,
            asset_id=_asset_id(args[0]),
            addr=_addr(args[1]),
            length=length,
            data=_data_words(args[3:], length),
        )
    if verb == CommandKind.UPDATE.value:
        _exact_arity(args, 2, verb)
        return ValidatedCommand(
            CommandKind.UPDATE, asset_id=_asset_id(args[0]), filename=args[1]
        )
    if verb == CommandKind.READ_S.value:
        _exact_arity(args, 4, verb)
        return ValidatedCommand(
            CommandKind.READ_S,
            key=_key(args[0]),
            asset_id=_asset_id(args[1]),
            addr=_addr(args[2]),
            length=_length(args[3]),
        )
    if verb == CommandKind.WRITE_S.value:
        _min_arity(args, 4, verb)
        length = _length(args[3])
        return ValidatedCommand(
            CommandKind.WRITE_S,
            key=_key(args[0]),
            asset_id=_asset_id(args[1]),
            addr=_addr(args[2]),
            length=length,
            data=_data_words(args[4:], length),
        )
    if verb == CommandKind.STORE_S.value:
        _exact_arity(args, 2, verb)
        return ValidatedCommand(
            CommandKind.STORE_S, key=_key(args[0]), asset_id=_asset_id(args[1])
        )
    if verb == CommandKind.GEN_THREAT_PROFILE_S.value:
        _exact_arity(args, 1, verb)
        return ValidatedCommand(CommandKind.GEN_THREAT_PROFILE_S, key=_key(args[0]))

    raise ParseError(ParseErrorCode.UNKNOWN_VERB, f"unknown verb {verb!r}")


def render(cmd: ValidatedCommand) -> str:
    """Canonical line for a command; parse(render(cmd)) == cmd."""
    parts = [cmd.kind.value]
    if cmd.key is not None:
        parts.append(cmd.key.hex())
    if cmd.asset_id is not None:
        parts.append(str(cmd.asset_id))
    if cmd.addr is not None:
        parts.append(f"0x{cmd.addr:04x}")
    if cmd.length is not None:
        parts.append(str(cmd.length))
    if cmd.data is not None:
        parts.extend(f"{w:04x}" for w in cmd.data)
    if cmd.filename is not None:
        parts.append(cmd.filename)
    return " ".join(parts)
