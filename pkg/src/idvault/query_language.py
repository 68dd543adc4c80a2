"""Lexer, parser, and printer for the query subset the generated API speaks.

The grammar covers named and anonymous query/mutation operations, variable
definitions, arguments, and nested selection sets — no fragments, directives,
or subscriptions. ``parse`` and ``print_document`` are exact inverses over
valid documents: parse(print_document(d)) reproduces d structurally.

All functions here are pure; errors carry 1-based line/column positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

from .errors import IdVaultError

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1

_PUNCT_CHARS = "{}():[]"

_NAME_START = set("_abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
_NAME_CONT = _NAME_START | set("0123456789")

_ESCAPES = {'"': '"', "\\": "\\", "/": "/", "b": "\b", "f": "\f", "n": "\n", "r": "\r", "t": "\t"}
_REVERSE_ESCAPES = {"\\": "\\\\", '"': '\\"', "\b": "\\b", "\f": "\\f", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


class LexError(IdVaultError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at {line}:{column}")
        self.line = line
        self.column = column


class ParseError(IdVaultError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at {line}:{column}")
        self.line = line
        self.column = column


class TokenKind(Enum):
    NAME = "NAME"
    INT = "INT"
    FLOAT = "FLOAT"
    STRING = "STRING"
    PUNCT = "PUNCT"
    DOLLAR = "DOLLAR"
    BANG = "BANG"
    EOF = "EOF"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int
    column: int


# -- abstract syntax ----------------------------------------------------------


class OpType(Enum):
    QUERY = "query"
    MUTATION = "mutation"


@dataclass(frozen=True)
class IntValue:
    value: int


@dataclass(frozen=True)
class FloatValue:
    value: float


@dataclass(frozen=True)
class StringValue:
    value: str


@dataclass(frozen=True)
class BooleanValue:
    value: bool


@dataclass(frozen=True)
class NullValue:
    pass


@dataclass(frozen=True)
class EnumValue:
    name: str


@dataclass(frozen=True)
class VariableRef:
    name: str


@dataclass(frozen=True)
class ListValue:
    items: tuple["Value", ...]


@dataclass(frozen=True)
class ObjectValue:
    fields: tuple[tuple[str, "Value"], ...]


Value = Union[IntValue, FloatValue, StringValue, BooleanValue, NullValue, EnumValue, VariableRef, ListValue, ObjectValue]


@dataclass(frozen=True)
class VariableDef:
    name: str
    type_ref: str
    non_null: bool


@dataclass(frozen=True)
class Selection:
    field_name: str
    alias: Optional[str] = None
    arguments: tuple[tuple[str, Value], ...] = ()
    selection_set: Optional[tuple["Selection", ...]] = None
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    @property
    def output_name(self) -> str:
        return self.alias or self.field_name


@dataclass(frozen=True)
class Operation:
    op_type: OpType
    name: Optional[str]
    variable_defs: tuple[VariableDef, ...]
    selection_set: tuple[Selection, ...]


@dataclass(frozen=True)
class QueryDocument:
    operations: tuple[Operation, ...]


# -- lexer --------------------------------------------------------------------


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    col = 1
    pos = 0
    n = len(source)

    def error(message: str, at_line: int, at_col: int) -> LexError:
        return LexError(message, at_line, at_col)

    while pos < n:
        ch = source[pos]
        if ch == "\n":
            pos += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r,":
            pos += 1
            col += 1
            continue
        if ch == "#":
            while pos < n and source[pos] != "\n":
                pos += 1
                col += 1
            continue
        start_line, start_col = line, col
        if ch in _NAME_START:
            end = pos + 1
            while end < n and source[end] in _NAME_CONT:
                end += 1
            tokens.append(Token(TokenKind.NAME, source[pos:end], start_line, start_col))
            col += end - pos
            pos = end
            continue
        if ch == "-" or ch.isdigit():
            end = pos + 1 if ch == "-" else pos
            if end >= n or not source[end].isdigit():
                raise error("illegal character '-'", start_line, start_col)
            digit_start = end
            while end < n and source[end].isdigit():
                end += 1
            if source[digit_start] == "0" and end - digit_start > 1:
                raise error("numbers may not have leading zeros", start_line, start_col)
            is_float = False
            if end < n and source[end] == ".":
                is_float = True
                end += 1
                if end >= n or not source[end].isdigit():
                    raise error("malformed float literal", start_line, start_col)
                while end < n and source[end].isdigit():
                    end += 1
            if end < n and source[end] in "eE":
                is_float = True
                end += 1
                if end < n and source[end] in "+-":
                    end += 1
                if end >= n or not source[end].isdigit():
                    raise error("malformed float exponent", start_line, start_col)
                while end < n and source[end].isdigit():
                    end += 1
            kind = TokenKind.FLOAT if is_float else TokenKind.INT
            tokens.append(Token(kind, source[pos:end], start_line, start_col))
            col += end - pos
            pos = end
            continue
        if ch == '"':
            if source.startswith('"""', pos):
                raise error("block strings are not supported", start_line, start_col)
            end = pos + 1
            chars: list[str] = []
            while True:
                if end >= n or source[end] == "\n":
                    raise error("unterminated string", start_line, start_col)
                c = source[end]
                if c == '"':
                    end += 1
                    break
                if c == "\\":
                    if end + 1 >= n:
                        raise error("unterminated string", start_line, start_col)
                    esc = source[end + 1]
                    if esc == "u":
                        hex_digits = source[end + 2 : end + 6]
                        if len(hex_digits) != 4 or any(h not in "0123456789abcdefABCDEF" for h in hex_digits):
                            raise error("invalid unicode escape", start_line, start_col)
                        chars.append(chr(int(hex_digits, 16)))
                        end += 6
                        continue
                    if esc not in _ESCAPES:
                        raise error(f"invalid escape '\\{esc}'", start_line, start_col)
                    chars.append(_ESCAPES[esc])
                    end += 2
                    continue
                chars.append(c)
                end += 1
            tokens.append(Token(TokenKind.STRING, "".join(chars), start_line, start_col))
            col += end - pos
            pos = end
            continue
        if ch == "$":
            tokens.append(Token(TokenKind.DOLLAR, "$", start_line, start_col))
            pos += 1
            col += 1
            continue
        if ch == "!":
            tokens.append(Token(TokenKind.BANG, "!", start_line, start_col))
            pos += 1
            col += 1
            continue
        if ch in _PUNCT_CHARS:
            tokens.append(Token(TokenKind.PUNCT, ch, start_line, start_col))
            pos += 1
            col += 1
            continue
        raise error(f"illegal character {ch!r}", start_line, start_col)
    tokens.append(Token(TokenKind.EOF, "", line, col))
    return tokens


# -- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.declared: set[str] = set()  # variables of the operation being parsed

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.current
        self.pos += 1
        return token

    def fail(self, expected: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.current
        found = token.kind.value if token.kind is TokenKind.EOF else repr(token.text)
        return ParseError(f"expected {expected}, found {found}", token.line, token.column)

    def expect_punct(self, text: str) -> Token:
        token = self.current
        if token.kind is not TokenKind.PUNCT or token.text != text:
            raise self.fail(f"'{text}'")
        return self.advance()

    def expect_name(self, what: str = "a name") -> Token:
        token = self.current
        if token.kind is not TokenKind.NAME:
            raise self.fail(what)
        return self.advance()

    def at_punct(self, text: str) -> bool:
        return self.current.kind is TokenKind.PUNCT and self.current.text == text

    def parse_document(self) -> QueryDocument:
        operations = [self.parse_operation()]
        while self.current.kind is not TokenKind.EOF:
            operations.append(self.parse_operation())
        return QueryDocument(tuple(operations))

    def parse_operation(self) -> Operation:
        token = self.current
        if token.kind is TokenKind.PUNCT and token.text == "{":
            self.declared = set()
            return Operation(OpType.QUERY, None, (), self.parse_selection_set())
        if token.kind is not TokenKind.NAME or token.text not in ("query", "mutation"):
            raise self.fail("'query', 'mutation', or '{'")
        self.advance()
        op_type = OpType.QUERY if token.text == "query" else OpType.MUTATION
        name = None
        if self.current.kind is TokenKind.NAME:
            name = self.advance().text
        variable_defs: tuple[VariableDef, ...] = ()
        if self.at_punct("("):
            variable_defs = self.parse_variable_defs()
        self.declared = {v.name for v in variable_defs}
        return Operation(op_type, name, variable_defs, self.parse_selection_set())

    def parse_variable_defs(self) -> tuple[VariableDef, ...]:
        self.expect_punct("(")
        defs: list[VariableDef] = []
        seen: set[str] = set()
        while not self.at_punct(")"):
            token = self.current
            if token.kind is not TokenKind.DOLLAR:
                raise self.fail("'$' starting a variable definition")
            self.advance()
            name_token = self.expect_name("a variable name")
            if name_token.text in seen:
                raise ParseError(
                    f"duplicate variable ${name_token.text}", name_token.line, name_token.column
                )
            seen.add(name_token.text)
            self.expect_punct(":")
            type_token = self.expect_name("a type name")
            non_null = False
            if self.current.kind is TokenKind.BANG:
                self.advance()
                non_null = True
            defs.append(VariableDef(name_token.text, type_token.text, non_null))
        if not defs:
            raise self.fail("a variable definition")
        self.expect_punct(")")
        return tuple(defs)

    def parse_selection_set(self) -> tuple[Selection, ...]:
        self.expect_punct("{")
        selections: list[Selection] = []
        while not self.at_punct("}"):
            selections.append(self.parse_selection())
        if not selections:
            raise self.fail("at least one field in a selection set")
        self.expect_punct("}")
        return tuple(selections)

    def parse_selection(self) -> Selection:
        first = self.expect_name("a field name")
        alias = None
        name_token = first
        if self.at_punct(":"):
            self.advance()
            alias = first.text
            name_token = self.expect_name("a field name after alias")
        arguments: tuple[tuple[str, Value], ...] = ()
        if self.at_punct("("):
            arguments = self.parse_arguments()
        selection_set = None
        if self.at_punct("{"):
            selection_set = self.parse_selection_set()
        return Selection(
            field_name=name_token.text,
            alias=alias,
            arguments=arguments,
            selection_set=selection_set,
            line=first.line,
            column=first.column,
        )

    def parse_arguments(self) -> tuple[tuple[str, Value], ...]:
        self.expect_punct("(")
        args: list[tuple[str, Value]] = []
        seen: set[str] = set()
        while not self.at_punct(")"):
            name_token = self.expect_name("an argument name")
            if name_token.text in seen:
                raise ParseError(
                    f"duplicate argument {name_token.text!r}", name_token.line, name_token.column
                )
            seen.add(name_token.text)
            self.expect_punct(":")
            args.append((name_token.text, self.parse_value()))
        if not args:
            raise self.fail("an argument")
        self.expect_punct(")")
        return tuple(args)

    def parse_value(self) -> Value:
        token = self.current
        if token.kind is TokenKind.INT:
            self.advance()
            value = int(token.text)
            if not (_INT64_MIN <= value <= _INT64_MAX):
                raise ParseError("integer literal outside 64-bit range", token.line, token.column)
            return IntValue(value)
        if token.kind is TokenKind.FLOAT:
            self.advance()
            return FloatValue(float(token.text))
        if token.kind is TokenKind.STRING:
            self.advance()
            return StringValue(token.text)
        if token.kind is TokenKind.NAME:
            self.advance()
            if token.text == "true":
                return BooleanValue(True)
            if token.text == "false":
                return BooleanValue(False)
            if token.text == "null":
                return NullValue()
            return EnumValue(token.text)
        if token.kind is TokenKind.DOLLAR:
            self.advance()
            name_token = self.expect_name("a variable name")
            if name_token.text not in self.declared:
                raise ParseError(
                    f"variable ${name_token.text} is not declared by its operation",
                    name_token.line,
                    name_token.column,
                )
            return VariableRef(name_token.text)
        if token.kind is TokenKind.PUNCT and token.text == "[":
            self.advance()
            items: list[Value] = []
            while not self.at_punct("]"):
                items.append(self.parse_value())
            self.expect_punct("]")
            return ListValue(tuple(items))
        if token.kind is TokenKind.PUNCT and token.text == "{":
            self.advance()
            fields: list[tuple[str, Value]] = []
            seen: set[str] = set()
            while not self.at_punct("}"):
                name_token = self.expect_name("an object field name")
                if name_token.text in seen:
                    raise ParseError(
                        f"duplicate object field {name_token.text!r}", name_token.line, name_token.column
                    )
                seen.add(name_token.text)
                self.expect_punct(":")
                fields.append((name_token.text, self.parse_value()))
            self.expect_punct("}")
            return ObjectValue(tuple(fields))
        raise self.fail("a value")

def parse(source: str) -> QueryDocument:
    return _Parser(tokenize(source)).parse_document()


# -- printer ------------------------------------------------------------------


def _print_string(text: str) -> str:
    out = ['"']
    for ch in text:
        if ch in _REVERSE_ESCAPES:
            out.append(_REVERSE_ESCAPES[ch])
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def print_value(value: Value) -> str:
    if isinstance(value, IntValue):
        return str(value.value)
    if isinstance(value, FloatValue):
        return repr(value.value)
    if isinstance(value, StringValue):
        return _print_string(value.value)
    if isinstance(value, BooleanValue):
        return "true" if value.value else "false"
    if isinstance(value, NullValue):
        return "null"
    if isinstance(value, EnumValue):
        return value.name
    if isinstance(value, VariableRef):
        return f"${value.name}"
    if isinstance(value, ListValue):
        return "[" + ", ".join(print_value(v) for v in value.items) + "]"
    if isinstance(value, ObjectValue):
        return "{" + ", ".join(f"{k}: {print_value(v)}" for k, v in value.fields) + "}"
    raise TypeError(f"not a value node: {value!r}")


def _print_selection(sel: Selection) -> str:
    parts = []
    if sel.alias:
        parts.append(f"{sel.alias}: {sel.field_name}")
    else:
        parts.append(sel.field_name)
    if sel.arguments:
        parts.append("(" + ", ".join(f"{n}: {print_value(v)}" for n, v in sel.arguments) + ")")
    text = "".join(parts)
    if sel.selection_set:
        text += " " + _print_selection_set(sel.selection_set)
    return text


def _print_selection_set(selections: tuple[Selection, ...]) -> str:
    return "{ " + " ".join(_print_selection(s) for s in selections) + " }"


def _print_operation(op: Operation) -> str:
    head = op.op_type.value
    if op.name:
        head += f" {op.name}"
    if op.variable_defs:
        rendered = ", ".join(
            f"${v.name}: {v.type_ref}" + ("!" if v.non_null else "") for v in op.variable_defs
        )
        head += f"({rendered})"
    return f"{head} {_print_selection_set(op.selection_set)}"


def print_document(doc: QueryDocument) -> str:
    """Canonical single-line-per-operation rendering; re-parses to an equal AST."""
    return "\n".join(_print_operation(op) for op in doc.operations)
