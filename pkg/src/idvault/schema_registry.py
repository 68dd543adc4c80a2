"""Content-type definitions: the registry every other layer is generated from.

A content type is a named, ordered list of typed fields. Definitions are
persisted one canonical JSON file per type under ``<data-dir>/schema/`` so a
schema change is a readable diff. Registration and evolution notify
listeners (the API engine regenerates its schema on that signal).

validate_document() is the single checkpoint for record values: it returns
violations as data and never raises, so resolvers can surface every problem
at once.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import IdVaultError
from .persistence import StoreBackend, utc_now_text

RESERVED_TYPE_NAMES = frozenset({"user", "media"})

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_TYPE_NAME = re.compile(r"^[a-z][a-z0-9_]*$")
_EMAIL = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")
_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_DATETIME = re.compile(r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(\.\d{1,6})?Z$")
_TIME = re.compile(r"^(\d{2}):(\d{2}):(\d{2})\.(\d{3})$")
_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1
_INT32_MIN = -(2**31)
_INT32_MAX = 2**31 - 1


class SchemaError(IdVaultError):
    pass


class DuplicateName(SchemaError):
    def __init__(self, name: str):
        super().__init__(f"content type {name!r} is already registered")
        self.name = name


class ReservedName(SchemaError):
    def __init__(self, name: str):
        super().__init__(f"content type name {name!r} is reserved")
        self.name = name


class InvalidFieldDefinition(SchemaError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"field {field_name!r}: {reason}")
        self.field_name = field_name
        self.reason = reason


class UnknownContentType(SchemaError):
    def __init__(self, name: str):
        super().__init__(f"no content type named {name!r}")
        self.name = name


class FieldKind(Enum):
    SHORT_TEXT = "SHORT_TEXT"
    LONG_TEXT = "LONG_TEXT"
    RICH_TEXT = "RICH_TEXT"
    INTEGER = "INTEGER"
    BIG_INTEGER = "BIG_INTEGER"
    DECIMAL = "DECIMAL"
    FLOAT = "FLOAT"
    DATE = "DATE"
    DATETIME = "DATETIME"
    TIME = "TIME"
    BOOLEAN = "BOOLEAN"
    RELATION = "RELATION"
    EMAIL = "EMAIL"
    PASSWORD = "PASSWORD"
    ENUMERATION = "ENUMERATION"
    SINGLE_MEDIA = "SINGLE_MEDIA"
    MULTIPLE_MEDIA = "MULTIPLE_MEDIA"
    JSON = "JSON"
    UID = "UID"


TEXT_KINDS = frozenset({FieldKind.SHORT_TEXT, FieldKind.LONG_TEXT, FieldKind.RICH_TEXT})


@dataclass(frozen=True)
class FieldDefinition:
    name: str
    kind: FieldKind
    required: bool = False
    unique: bool = False
    enum_values: tuple[str, ...] = ()
    relation_target: Optional[str] = None

    def check(self) -> None:
        if not _IDENTIFIER.match(self.name):
            raise InvalidFieldDefinition(self.name, "name is not a valid identifier")
        if self.kind is FieldKind.ENUMERATION:
            if not self.enum_values:
                raise InvalidFieldDefinition(self.name, "enumeration needs at least one value")
            if len(set(self.enum_values)) != len(self.enum_values):
                raise InvalidFieldDefinition(self.name, "enumeration values must be distinct")
        elif self.enum_values:
            raise InvalidFieldDefinition(self.name, "enumValues only allowed on ENUMERATION fields")
        if self.kind is FieldKind.RELATION:
            if not self.relation_target:
                raise InvalidFieldDefinition(self.name, "relation needs a target content type")
        elif self.relation_target is not None:
            raise InvalidFieldDefinition(self.name, "relationTarget only allowed on RELATION fields")
        if self.kind is FieldKind.UID and not self.unique:
            raise InvalidFieldDefinition(self.name, "UID fields must be unique")


@dataclass(frozen=True)
class ContentTypeDefinition:
    name: str
    fields: tuple[FieldDefinition, ...]
    created_at: str = ""
    updated_at: str = ""

    def field_map(self) -> dict[str, FieldDefinition]:
        return {f.name: f for f in self.fields}

    def check(self, known_types: Callable[[str], bool]) -> None:
        if not _TYPE_NAME.match(self.name):
            raise InvalidFieldDefinition(self.name, "content type name must be lowercase singular identifier")
        if not self.fields:
            raise InvalidFieldDefinition(self.name, "content type needs at least one field")
        seen: set[str] = set()
        for f in self.fields:
            f.check()
            if f.name in seen:
                raise InvalidFieldDefinition(f.name, "duplicate field name")
            seen.add(f.name)
            if f.kind is FieldKind.RELATION and not known_types(f.relation_target or ""):
                raise InvalidFieldDefinition(
                    f.name, f"relation target {f.relation_target!r} is not a registered content type"
                )


@dataclass(frozen=True)
class Violation:
    field: str
    reason: str


def _definition_to_json(definition: ContentTypeDefinition) -> dict[str, Any]:
    fields = []
    for f in definition.fields:
        entry: dict[str, Any] = {
            "name": f.name,
            "kind": f.kind.value,
            "required": f.required,
            "unique": f.unique,
        }
        if f.kind is FieldKind.ENUMERATION:
            entry["enumValues"] = list(f.enum_values)
        if f.kind is FieldKind.RELATION:
            entry["relationTarget"] = f.relation_target
        fields.append(entry)
    return {
        "name": definition.name,
        "fields": fields,
        "createdAt": definition.created_at,
        "updatedAt": definition.updated_at,
    }


def definition_from_json(data: dict[str, Any]) -> ContentTypeDefinition:
    fields = tuple(
        FieldDefinition(
            name=f["name"],
            kind=FieldKind(f["kind"]),
            required=bool(f.get("required", False)),
            unique=bool(f.get("unique", False)),
            enum_values=tuple(f.get("enumValues", ())),
            relation_target=f.get("relationTarget"),
        )
        for f in data["fields"]
    )
    return ContentTypeDefinition(
        name=data["name"],
        fields=fields,
        created_at=data.get("createdAt", ""),
        updated_at=data.get("updatedAt", ""),
    )


class SchemaRegistry:
    """Owns content-type definitions and their on-disk JSON files."""

    def __init__(self, data_dir: str | Path):
        self.schema_dir = Path(data_dir) / "schema"
        self.schema_dir.mkdir(parents=True, exist_ok=True)
        self._types: dict[str, ContentTypeDefinition] = {}
        self._listeners: list[Callable[[], None]] = []
        self._lock = threading.RLock()
        self._load_all()

    def _load_all(self) -> None:
        for path in sorted(self.schema_dir.glob("*.json")):
            data = json.loads(path.read_text("utf-8"))
            definition = definition_from_json(data)
            self._types[definition.name] = definition

    def _write(self, definition: ContentTypeDefinition) -> None:
        path = self.schema_dir / f"{definition.name}.json"
        tmp = path.with_suffix(".json.tmp")
        text = json.dumps(_definition_to_json(definition), indent=2) + "\n"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def on_change(self, listener: Callable[[], None]) -> None:
        self._listeners.append(listener)

    def _notify(self) -> None:
        for listener in self._listeners:
            listener()

    def register_content_type(self, definition: ContentTypeDefinition) -> ContentTypeDefinition:
        with self._lock:
            if definition.name in RESERVED_TYPE_NAMES:
                raise ReservedName(definition.name)
            if definition.name in self._types:
                raise DuplicateName(definition.name)
            definition.check(lambda t: t in self._types or t == definition.name)
            now = utc_now_text()
            stored = replace(definition, created_at=now, updated_at=now)
            self._write(stored)
            self._types[stored.name] = stored
        self._notify()
        return stored

    def evolve_content_type(
        self, definition: ContentTypeDefinition, store: Optional[StoreBackend] = None
    ) -> ContentTypeDefinition:
        """Replace an existing definition. Adding fields is always allowed;
        removing or retyping a field is rejected once documents exist."""
        with self._lock:
            current = self._types.get(definition.name)
            if current is None:
                raise UnknownContentType(definition.name)
            definition.check(lambda t: t in self._types)
            has_documents = bool(store and store.scan(definition.name, limit=1))
            new_fields = definition.field_map()
            for old in current.fields:
                new = new_fields.get(old.name)
                if new is None:
                    if has_documents:
                        raise InvalidFieldDefinition(
                            old.name, "cannot remove a field while documents exist"
                        )
                elif new.kind is not old.kind and has_documents:
                    raise InvalidFieldDefinition(
                        old.name, "cannot retype a field while documents exist"
                    )
            stored = replace(definition, created_at=current.created_at, updated_at=utc_now_text())
            self._write(stored)
            self._types[stored.name] = stored
        self._notify()
        return stored

    def get_content_type(self, name: str) -> Optional[ContentTypeDefinition]:
        with self._lock:
            return self._types.get(name)

    def list_content_types(self) -> list[ContentTypeDefinition]:
        with self._lock:
            return [self._types[n] for n in sorted(self._types)]


# -- value validation ---------------------------------------------------------


def is_valid_date(text: Any) -> bool:
    if not isinstance(text, str) or not _DATE.match(text):
        return False
    try:
        date.fromisoformat(text)
    except ValueError:
        return False
    return True


def is_valid_datetime(text: Any) -> bool:
    if not isinstance(text, str):
        return False
    m = _DATETIME.match(text)
    if not m:
        return False
    try:
        datetime(
            int(m.group(1)), int(m.group(2)), int(m.group(3)),
            int(m.group(4)), int(m.group(5)), int(m.group(6)),
        )
    except ValueError:
        return False
    return True


def is_valid_time(text: Any) -> bool:
    if not isinstance(text, str):
        return False
    m = _TIME.match(text)
    if not m:
        return False
    hh, mm, ss = int(m.group(1)), int(m.group(2)), int(m.group(3))
    return hh < 24 and mm < 60 and ss < 60


def is_valid_email(text: Any) -> bool:
    return isinstance(text, str) and bool(_EMAIL.match(text))


def is_valid_long(value: Any) -> bool:
    if not isinstance(value, str):
        return False
    body = value[1:] if value[:1] == "-" else value
    if not body.isdigit():
        return False
    return _INT64_MIN <= int(value) <= _INT64_MAX


def _is_json_value(value: Any) -> bool:
    if value is None or isinstance(value, (bool, int, float, str)):
        return True
    if isinstance(value, list):
        return all(_is_json_value(v) for v in value)
    if isinstance(value, dict):
        return all(isinstance(k, str) and _is_json_value(v) for k, v in value.items())
    return False


def check_field_value(fdef: FieldDefinition, value: Any) -> Optional[str]:
    """Return a violation reason for one value, or None when it fits."""
    kind = fdef.kind
    if kind in TEXT_KINDS or kind is FieldKind.UID or kind is FieldKind.PASSWORD:
        if not isinstance(value, str):
            return f"expected text for {kind.value}"
        return None
    if kind is FieldKind.INTEGER:
        if isinstance(value, bool) or not isinstance(value, int):
            return "expected an integer"
        if not (_INT32_MIN <= value <= _INT32_MAX):
            return "integer out of 32-bit range"
        return None
    if kind is FieldKind.BIG_INTEGER:
        return None if is_valid_long(value) else "expected a decimal string within 64-bit range"
    if kind in (FieldKind.DECIMAL, FieldKind.FLOAT):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return "expected a number"
        return None
    if kind is FieldKind.DATE:
        return None if is_valid_date(value) else "expected a calendar date formatted YYYY-MM-DD"
    if kind is FieldKind.DATETIME:
        return None if is_valid_datetime(value) else "expected an RFC 3339 UTC datetime ending in Z"
    if kind is FieldKind.TIME:
        return None if is_valid_time(value) else "expected a time formatted HH:MM:SS.mmm"
    if kind is FieldKind.BOOLEAN:
        return None if isinstance(value, bool) else "expected a boolean"
    if kind is FieldKind.EMAIL:
        return None if is_valid_email(value) else "expected a mailbox address"
    if kind is FieldKind.ENUMERATION:
        if not isinstance(value, str) or value not in fdef.enum_values:
            return f"expected one of {list(fdef.enum_values)}"
        return None
    if kind is FieldKind.RELATION or kind is FieldKind.SINGLE_MEDIA:
        return None if isinstance(value, str) and value else "expected a reference id"
    if kind is FieldKind.MULTIPLE_MEDIA:
        if not isinstance(value, list) or not all(isinstance(v, str) and v for v in value):
            return "expected a list of reference ids"
        return None
    if kind is FieldKind.JSON:
        return None if _is_json_value(value) else "expected a JSON-encodable value"
    return f"unhandled field kind {kind.value}"


def validate_document(
    definition: ContentTypeDefinition,
    values: dict[str, Any],
    store: Optional[StoreBackend] = None,
    exclude_id: Optional[str] = None,
) -> list[Violation]:
    """Check a value map against a definition; [] means the document is ok.

    Uniqueness of unique-marked fields is checked against the store when one
    is supplied; exclude_id skips the record being updated.
    """
    violations: list[Violation] = []
    fields = definition.field_map()
    for name in values:
        if name not in fields:
            violations.append(Violation(name, "unknown field"))
    for fdef in definition.fields:
        present = fdef.name in values and values[fdef.name] is not None
        if not present:
            if fdef.required:
                violations.append(Violation(fdef.name, "required field missing"))
            continue
        value = values[fdef.name]
        reason = check_field_value(fdef, value)
        if reason is not None:
            violations.append(Violation(fdef.name, reason))
            continue
        if fdef.unique and store is not None:
            for other in store.scan(definition.name, filter={fdef.name: value}):
                if other.id != exclude_id:
                    violations.append(Violation(fdef.name, "value already in use"))
                    break
    return violations
