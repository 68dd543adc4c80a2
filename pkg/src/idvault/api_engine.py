"""Schema generation and request execution: the engine behind /graphql.

generate_schema() turns a registry snapshot into SDL text plus the executable
indexes the executor walks; it is a pure function, so identical registries
yield byte-identical SDL. Every content type contributes an object type,
create/update inputs, payload wrappers, two queries, and three mutations.
The built-in auth surface (createUser, login, me) is always present.

execute() validates a parsed document against the generated schema first
(unknown fields, argument shape, variable coercion) and only then dispatches
resolvers, so validation failures never touch the store. Results mirror the
request: data keys follow selection order and aliases, absent values
serialize as null.
"""

from __future__ import annotations

import copy
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Optional

from . import auth as auth_mod
from . import persistence
from .auth import AuthService, Principal
from .errors import IdVaultError
from .media import MediaStore
from .persistence import Document, StoreBackend
from .query_language import (
    BooleanValue,
    EnumValue,
    FloatValue,
    IntValue,
    ListValue,
    NullValue,
    ObjectValue,
    OpType,
    QueryDocument,
    Selection,
    StringValue,
    Value,
    VariableRef,
)
from .schema_registry import (
    ContentTypeDefinition,
    FieldDefinition,
    FieldKind,
    SchemaRegistry,
    validate_document,
)

SCALAR_NAMES = ("Date", "DateTime", "Time", "Long", "JSON")
BUILTIN_SCALARS = frozenset(("ID", "String", "Int", "Float", "Boolean") + SCALAR_NAMES)

# content-type field kind -> GraphQL type spelling (output side)
KIND_TO_GRAPHQL = {
    FieldKind.SHORT_TEXT: "String",
    FieldKind.LONG_TEXT: "String",
    FieldKind.RICH_TEXT: "String",
    FieldKind.EMAIL: "String",
    FieldKind.UID: "String",
    FieldKind.PASSWORD: "String",
    FieldKind.INTEGER: "Int",
    FieldKind.BIG_INTEGER: "Long",
    FieldKind.DECIMAL: "Float",
    FieldKind.FLOAT: "Float",
    FieldKind.DATE: "Date",
    FieldKind.DATETIME: "DateTime",
    FieldKind.TIME: "Time",
    FieldKind.BOOLEAN: "Boolean",
    FieldKind.JSON: "JSON",
    FieldKind.SINGLE_MEDIA: "UploadFile",
}


class EngineError(IdVaultError):
    code = "INTERNAL"


class UnsupportedDocument(EngineError):
    code = "UNSUPPORTED_DOCUMENT"


class Unauthenticated(EngineError):
    code = "UNAUTHENTICATED"

    def __init__(self, message: str = "authentication required"):
        super().__init__(message)


class Forbidden(EngineError):
    code = "FORBIDDEN"

    def __init__(self, message: str = "not allowed"):
        super().__init__(message)


class NotFoundError(EngineError):
    code = "NOT_FOUND"


class ValidationFailed(EngineError):
    code = "VALIDATION_FAILED"

    def __init__(self, violations: list):
        detail = "; ".join(f"{v.field}: {v.reason}" for v in violations)
        super().__init__(f"document is invalid: {detail}")
        self.violations = violations


@dataclass
class ExecutionContext:
    principal: Optional[Principal] = None
    request_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    now: Callable[[], datetime] = lambda: datetime.now(timezone.utc)

    def epoch_seconds(self) -> int:
        return int(self.now().timestamp())


@dataclass
class ExecutionResult:
    data: Optional[dict[str, Any]]
    errors: list[dict[str, Any]]

    def as_json(self) -> dict[str, Any]:
        body: dict[str, Any] = {}
        if self.data is not None or not self.errors:
            body["data"] = self.data
        if self.errors:
            body["errors"] = self.errors
        return body


@dataclass(frozen=True)
class ArgSpec:
    name: str
    type_name: str
    non_null: bool = False


@dataclass(frozen=True)
class FieldSpec:
    type_name: str
    is_list: bool = False
    args: tuple[ArgSpec, ...] = ()
    resolver: tuple = ()


@dataclass(frozen=True)
class InputFieldSpec:
    type_name: str
    non_null: bool = False
    is_list: bool = False


@dataclass
class GeneratedSchema:
    sdl_text: str
    type_index: dict[str, dict[str, FieldSpec]]
    enum_index: dict[str, tuple[str, ...]]
    input_index: dict[str, dict[str, InputFieldSpec]]
    query_fields: dict[str, FieldSpec]
    mutation_fields: dict[str, FieldSpec]

    def root_fields(self, op_type: OpType) -> dict[str, FieldSpec]:
        return self.query_fields if op_type is OpType.QUERY else self.mutation_fields


def object_type_name(content_type: str) -> str:
    return content_type[:1].upper() + content_type[1:]


def enum_type_name(content_type: str, field_name: str) -> str:
    return f"ENUM_{content_type.upper()}_{field_name.upper()}"


def _graphql_type_for(ct_name: str, fdef: FieldDefinition) -> tuple[str, bool]:
    """(type name, is_list) for a content field on the output side."""
    if fdef.kind is FieldKind.ENUMERATION:
        return enum_type_name(ct_name, fdef.name), False
    if fdef.kind is FieldKind.MULTIPLE_MEDIA:
        return "UploadFile", True
    if fdef.kind is FieldKind.RELATION:
        return object_type_name(fdef.relation_target or ""), False
    return KIND_TO_GRAPHQL[fdef.kind], False


def _input_type_for(ct_name: str, fdef: FieldDefinition) -> tuple[str, bool]:
    """(type name, is_list) for a content field on the input side."""
    if fdef.kind is FieldKind.ENUMERATION:
        return enum_type_name(ct_name, fdef.name), False
    if fdef.kind is FieldKind.SINGLE_MEDIA or fdef.kind is FieldKind.RELATION:
        return "ID", False
    if fdef.kind is FieldKind.MULTIPLE_MEDIA:
        return "ID", True
    return KIND_TO_GRAPHQL[fdef.kind], False


def _render(type_name: str, is_list: bool, non_null: bool = False) -> str:
    text = f"[{type_name}]" if is_list else type_name
    return text + "!" if non_null else text


def generate_schema(content_types: tuple[ContentTypeDefinition, ...]) -> GeneratedSchema:
    """Build SDL text and executable indexes from a registry snapshot."""
    lines: list[str] = []
    type_index: dict[str, dict[str, FieldSpec]] = {}
    enum_index: dict[str, tuple[str, ...]] = {}
    input_index: dict[str, dict[str, InputFieldSpec]] = {}
    query_fields: dict[str, FieldSpec] = {}
    mutation_fields: dict[str, FieldSpec] = {}

    for scalar in SCALAR_NAMES:
        lines.append(f"scalar {scalar}")
    lines.append("")

    # built-in media object
    upload_fields = {
        "id": FieldSpec("ID", resolver=("asset", "id")),
        "name": FieldSpec("String", resolver=("asset", "original_filename")),
        "mime": FieldSpec("String", resolver=("asset", "mime_type")),
        "size": FieldSpec("Int", resolver=("asset", "size_bytes")),
        "sha256": FieldSpec("String", resolver=("asset", "sha256_hex")),
        "width": FieldSpec("Int", resolver=("asset", "width")),
        "height": FieldSpec("Int", resolver=("asset", "height")),
        "url": FieldSpec("String", resolver=("asset", "url")),
    }
    type_index["UploadFile"] = upload_fields
    lines.append("type UploadFile {")
    lines.append("  id: ID!")
    for fname in ("name", "mime", "size", "sha256", "width", "height", "url"):
        lines.append(f"  {fname}: {upload_fields[fname].type_name}")
    lines.append("}")
    lines.append("")

    # built-in auth surface
    me_fields = {
        "id": FieldSpec("ID", resolver=("user", "id")),
        "username": FieldSpec("String", resolver=("user", "username")),
        "email": FieldSpec("String", resolver=("user", "email")),
        "role": FieldSpec("String", resolver=("user", "role")),
    }
    type_index["UsersPermissionsMe"] = me_fields
    lines.extend(
        [
            "type UsersPermissionsMe {",
            "  id: ID!",
            "  username: String!",
            "  email: String!",
            "  role: String",
            "}",
            "",
            "input createUserInput {",
            "  username: String!",
            "  email: String!",
            "  password: String!",
            "}",
            "",
            "type createUserPayload {",
            "  user: UsersPermissionsMe",
            "}",
            "",
            "input UsersPermissionsLoginInput {",
            "  identifier: String!",
            "  password: String!",
            "}",
            "",
            "type UsersPermissionsLoginPayload {",
            "  jwt: String",
            "  user: UsersPermissionsMe",
            "}",
            "",
        ]
    )
    input_index["createUserInput"] = {
        "username": InputFieldSpec("String", non_null=True),
        "email": InputFieldSpec("String", non_null=True),
        "password": InputFieldSpec("String", non_null=True),
    }
    input_index["UsersPermissionsLoginInput"] = {
        "identifier": InputFieldSpec("String", non_null=True),
        "password": InputFieldSpec("String", non_null=True),
    }
    type_index["createUserPayload"] = {
        "user": FieldSpec("UsersPermissionsMe", resolver=("payload", "user"))
    }
    type_index["UsersPermissionsLoginPayload"] = {
        "jwt": FieldSpec("String", resolver=("payload", "jwt")),
        "user": FieldSpec("UsersPermissionsMe", resolver=("payload", "user")),
    }

    for ct in sorted(content_types, key=lambda c: c.name):
        type_name = object_type_name(ct.name)

        for fdef in ct.fields:
            if fdef.kind is FieldKind.ENUMERATION:
                ename = enum_type_name(ct.name, fdef.name)
                enum_index[ename] = tuple(fdef.enum_values)
                lines.append(f"enum {ename} {{")
                for member in fdef.enum_values:
                    lines.append(f"  {member}")
                lines.append("}")
                lines.append("")

        object_fields: dict[str, FieldSpec] = {
            "id": FieldSpec("ID", resolver=("id",)),
            "createdAt": FieldSpec("DateTime", resolver=("created_at",)),
            "updatedAt": FieldSpec("DateTime", resolver=("updated_at",)),
        }
        lines.append(f"type {type_name} {{")
        lines.append("  id: ID!")
        for fdef in ct.fields:
            if fdef.kind is FieldKind.PASSWORD:
                continue  # password-kind fields never surface in output types
            gql_type, is_list = _graphql_type_for(ct.name, fdef)
            lines.append(f"  {fdef.name}: {_render(gql_type, is_list)}")
            if fdef.kind is FieldKind.SINGLE_MEDIA:
                resolver = ("media", fdef.name)
            elif fdef.kind is FieldKind.MULTIPLE_MEDIA:
                resolver = ("media_list", fdef.name)
            elif fdef.kind is FieldKind.RELATION:
                resolver = ("relation", fdef.name, fdef.relation_target or "")
            else:
                resolver = ("value", fdef.name)
            object_fields[fdef.name] = FieldSpec(gql_type, is_list=is_list, resolver=resolver)
        lines.append("  createdAt: DateTime")
        lines.append("  updatedAt: DateTime")
        lines.append("}")
        lines.append("")
        type_index[type_name] = object_fields

        create_input: dict[str, InputFieldSpec] = {}
        update_input: dict[str, InputFieldSpec] = {}
        lines.append(f"input create{type_name}Input {{")
        for fdef in ct.fields:
            in_type, is_list = _input_type_for(ct.name, fdef)
            lines.append(f"  {fdef.name}: {_render(in_type, is_list, fdef.required)}")
            create_input[fdef.name] = InputFieldSpec(in_type, non_null=fdef.required, is_list=is_list)
        lines.append("}")
        lines.append("")
        lines.append(f"input update{type_name}Input {{")
        for fdef in ct.fields:
            in_type, is_list = _input_type_for(ct.name, fdef)
            lines.append(f"  {fdef.name}: {_render(in_type, is_list)}")
            update_input[fdef.name] = InputFieldSpec(in_type, is_list=is_list)
        lines.append("}")
        lines.append("")
        input_index[f"create{type_name}Input"] = create_input
        input_index[f"update{type_name}Input"] = update_input

        for verb in ("create", "update", "delete"):
            payload_name = f"{verb}{type_name}Payload"
            lines.append(f"type {payload_name} {{")
            lines.append(f"  {ct.name}: {type_name}")
            lines.append("}")
            lines.append("")
            type_index[payload_name] = {
                ct.name: FieldSpec(type_name, resolver=("payload", ct.name))
            }

        query_fields[ct.name] = FieldSpec(
            type_name,
            args=(ArgSpec("id", "ID", non_null=True),),
            resolver=("crud", ct.name, auth_mod.FIND_ONE),
        )
        query_fields[f"{ct.name}s"] = FieldSpec(
            type_name,
            is_list=True,
            args=(ArgSpec("limit", "Int"), ArgSpec("start", "Int")),
            resolver=("crud", ct.name, auth_mod.FIND),
        )
        mutation_fields[f"create{type_name}"] = FieldSpec(
            f"create{type_name}Payload",
            args=(ArgSpec("input", f"create{type_name}Input", non_null=True),),
            resolver=("crud", ct.name, auth_mod.CREATE),
        )
        mutation_fields[f"update{type_name}"] = FieldSpec(
            f"update{type_name}Payload",
            args=(
                ArgSpec("id", "ID", non_null=True),
                ArgSpec("input", f"update{type_name}Input", non_null=True),
            ),
            resolver=("crud", ct.name, auth_mod.UPDATE),
        )
        mutation_fields[f"delete{type_name}"] = FieldSpec(
            f"delete{type_name}Payload",
            args=(ArgSpec("id", "ID", non_null=True),),
            resolver=("crud", ct.name, auth_mod.DELETE),
        )

    query_fields["me"] = FieldSpec("UsersPermissionsMe", resolver=("me",))
    mutation_fields["createUser"] = FieldSpec(
        "createUserPayload",
        args=(ArgSpec("input", "createUserInput"),),
        resolver=("create_user",),
    )
    mutation_fields["login"] = FieldSpec(
        "UsersPermissionsLoginPayload",
        args=(ArgSpec("input", "UsersPermissionsLoginInput", non_null=True),),
        resolver=("login",),
    )

    lines.append("type Query {")
    for ct in sorted(content_types, key=lambda c: c.name):
        type_name = object_type_name(ct.name)
        lines.append(f"  {ct.name}(id: ID!): {type_name}")
        lines.append(f"  {ct.name}s(limit: Int, start: Int): [{type_name}]")
    lines.append("  me: UsersPermissionsMe")
    lines.append("}")
    lines.append("")
    lines.append("type Mutation {")
    for ct in sorted(content_types, key=lambda c: c.name):
        type_name = object_type_name(ct.name)
        lines.append(f"  create{type_name}(input: create{type_name}Input!): create{type_name}Payload")
        lines.append(f"  update{type_name}(id: ID!, input: update{type_name}Input!): update{type_name}Payload")
        lines.append(f"  delete{type_name}(id: ID!): delete{type_name}Payload")
    lines.append("  createUser(input: createUserInput): createUserPayload")
    lines.append("  login(input: UsersPermissionsLoginInput!): UsersPermissionsLoginPayload")
    lines.append("}")
    lines.append("")

    return GeneratedSchema(
        sdl_text="\n".join(lines),
        type_index=type_index,
        enum_index=enum_index,
        input_index=input_index,
        query_fields=query_fields,
        mutation_fields=mutation_fields,
    )


# -- value coercion -------------------------------------------------------------


class _CoercionError(Exception):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


def _coerce_scalar(type_name: str, value: Any) -> Any:
    from . import schema_registry as sr

    if type_name == "String":
        if not isinstance(value, str):
            raise _CoercionError(f"expected String, got {value!r}")
        return value
    if type_name == "ID":
        if isinstance(value, str) and value:
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            return str(value)
        raise _CoercionError(f"expected ID, got {value!r}")
    if type_name == "Int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise _CoercionError(f"expected Int, got {value!r}")
        if not (-(2**31) <= value <= 2**31 - 1):
            raise _CoercionError("Int outside 32-bit range")
        return value
    if type_name == "Float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _CoercionError(f"expected Float, got {value!r}")
        return float(value)
    if type_name == "Boolean":
        if not isinstance(value, bool):
            raise _CoercionError(f"expected Boolean, got {value!r}")
        return value
    if type_name == "Long":
        if isinstance(value, int) and not isinstance(value, bool):
            value = str(value)
        if not sr.is_valid_long(value):
            raise _CoercionError(f"expected Long (decimal string), got {value!r}")
        return value
    if type_name == "Date":
        if not sr.is_valid_date(value):
            raise _CoercionError(f"expected Date as YYYY-MM-DD, got {value!r}")
        return value
    if type_name == "DateTime":
        if not sr.is_valid_datetime(value):
            raise _CoercionError(f"expected DateTime as RFC 3339 UTC, got {value!r}")
        return value
    if type_name == "Time":
        if not sr.is_valid_time(value):
            raise _CoercionError(f"expected Time as HH:MM:SS.mmm, got {value!r}")
        return value
    if type_name == "JSON":
        return value
    raise _CoercionError(f"unknown scalar {type_name}")


def _coerce_json(schema: GeneratedSchema, type_name: str, non_null: bool, is_list: bool, value: Any) -> Any:
    """Coerce a JSON-shaped (variable) value against a schema type."""
    if value is None:
        if non_null:
            raise _CoercionError(f"null is not allowed for {type_name}!")
        return None
    if is_list:
        if not isinstance(value, list):
            raise _CoercionError(f"expected a list of {type_name}")
        return [_coerce_json(schema, type_name, False, False, item) for item in value]
    if type_name in schema.enum_index:
        if not isinstance(value, str) or value not in schema.enum_index[type_name]:
            raise _CoercionError(f"expected a member of enum {type_name}, got {value!r}")
        return value
    if type_name in schema.input_index:
        if not isinstance(value, dict):
            raise _CoercionError(f"expected an input object {type_name}")
        fields = schema.input_index[type_name]
        out: dict[str, Any] = {}
        for key in value:
            if key not in fields:
                raise _CoercionError(f"unknown field {key!r} on input {type_name}")
        for fname, fspec in fields.items():
            if fname not in value:
                if fspec.non_null:
                    raise _CoercionError(f"input {type_name}.{fname} is required")
                continue
            try:
                out[fname] = _coerce_json(schema, fspec.type_name, fspec.non_null, fspec.is_list, value[fname])
            except _CoercionError as exc:
                raise _CoercionError(f"{type_name}.{fname}: {exc.message}") from None
        return out
    if type_name in BUILTIN_SCALARS:
        return _coerce_scalar(type_name, value)
    raise _CoercionError(f"unknown input type {type_name}")


def _literal_to_json(value: Value, variables: dict[str, Any]) -> Any:
    if isinstance(value, IntValue):
        return value.value
    if isinstance(value, FloatValue):
        return value.value
    if isinstance(value, StringValue):
        return value.value
    if isinstance(value, BooleanValue):
        return value.value
    if isinstance(value, NullValue):
        return None
    if isinstance(value, EnumValue):
        return value.name
    if isinstance(value, VariableRef):
        return variables.get(value.name)
    if isinstance(value, ListValue):
        return [_literal_to_json(v, variables) for v in value.items]
    if isinstance(value, ObjectValue):
        return {k: _literal_to_json(v, variables) for k, v in value.fields}
    raise TypeError(f"not a literal: {value!r}")


# -- hooks ------------------------------------------------------------------------


class ContentTypeHooks:
    """Domain extension point a content type may install on the engine.

    owner_field names the record field holding the creating user's id; when
    set, the engine scopes reads to the owner and refuses foreign mutations.
    """

    owner_field: Optional[str] = None

    def prepare_create(self, ctx: ExecutionContext, values: dict[str, Any]) -> dict[str, Any]:
        return values

    def prepare_update(
        self, ctx: ExecutionContext, current: Document, values: dict[str, Any]
    ) -> dict[str, Any]:
        return values


# -- engine -----------------------------------------------------------------------


class ApiEngine:
    def __init__(
        self,
        registry: SchemaRegistry,
        store: StoreBackend,
        media_store: MediaStore,
        auth_service: AuthService,
    ):
        self.registry = registry
        self.store = store
        self.media_store = media_store
        self.auth = auth_service
        self.hooks: dict[str, ContentTypeHooks] = {}
        self._schema: GeneratedSchema = generate_schema(tuple(registry.list_content_types()))
        self._rebuild_lock = threading.Lock()
        registry.on_change(self.rebuild)

    @property
    def schema(self) -> GeneratedSchema:
        return self._schema

    def rebuild(self) -> None:
        with self._rebuild_lock:
            # built fully, then swapped in one assignment: in-flight requests
            # keep executing against the snapshot they started with
            self._schema = generate_schema(tuple(self.registry.list_content_types()))

    def register_hooks(self, content_type: str, hooks: ContentTypeHooks) -> None:
        self.hooks[content_type] = hooks

    # -- request execution -------------------------------------------------------

    def execute(
        self,
        doc: QueryDocument,
        variables: Optional[dict[str, Any]] = None,
        ctx: Optional[ExecutionContext] = None,
    ) -> ExecutionResult:
        schema = self._schema
        ctx = ctx or ExecutionContext()
        variables = variables or {}
        if len(doc.operations) != 1:
            return ExecutionResult(
                data=None,
                errors=[_error(UnsupportedDocument("exactly one operation per request is supported"))],
            )
        op = doc.operations[0]

        coerced_vars: dict[str, Any] = {}
        for vdef in op.variable_defs:
            known = (
                vdef.type_ref in schema.input_index
                or vdef.type_ref in schema.enum_index
                or vdef.type_ref in BUILTIN_SCALARS
            )
            if not known:
                return ExecutionResult(
                    data=None,
                    errors=[_validation_error(f"unknown type {vdef.type_ref} for ${vdef.name}", [])],
                )
            provided = variables.get(vdef.name)
            if provided is None and vdef.non_null:
                return ExecutionResult(
                    data=None,
                    errors=[_validation_error(f"variable ${vdef.name} of required type {vdef.type_ref}! was not provided", [])],
                )
            try:
                coerced_vars[vdef.name] = _coerce_json(schema, vdef.type_ref, vdef.non_null, False, provided)
            except _CoercionError as exc:
                return ExecutionResult(
                    data=None,
                    errors=[_validation_error(f"variable ${vdef.name}: {exc.message}", [])],
                )

        root_fields = schema.root_fields(op.op_type)
        root_name = "Query" if op.op_type is OpType.QUERY else "Mutation"
        errors: list[dict[str, Any]] = []
        self._validate_selections(schema, root_fields, root_name, op.selection_set, [], errors)
        if errors:
            return ExecutionResult(data=None, errors=errors)

        data: dict[str, Any] = {}
        for sel in op.selection_set:
            path = [sel.output_name]
            spec = root_fields[sel.field_name]
            try:
                args = self._coerce_args(schema, spec, sel, coerced_vars)
                parent = self._dispatch_root(spec, args, ctx)
                data[sel.output_name] = self._complete(schema, spec, parent, sel, ctx, path, errors)
            except IdVaultError as exc:
                errors.append(_error(exc, path, sel))
                data[sel.output_name] = None
        return ExecutionResult(data=data, errors=errors)

    def execute_text(
        self,
        source: str,
        variables: Optional[dict[str, Any]] = None,
        ctx: Optional[ExecutionContext] = None,
    ) -> ExecutionResult:
        from .query_language import parse

        return self.execute(parse(source), variables, ctx)

    # -- validation ---------------------------------------------------------------

    def _validate_selections(
        self,
        schema: GeneratedSchema,
        fields: dict[str, FieldSpec],
        type_name: str,
        selections: tuple[Selection, ...],
        path: list[str],
        errors: list[dict[str, Any]],
    ) -> None:
        for sel in selections:
            sel_path = path + [sel.output_name]
            spec = fields.get(sel.field_name)
            if spec is None:
                errors.append(
                    _validation_error(f"unknown field {sel.field_name!r} on type {type_name}", sel_path, sel)
                )
                continue
            known_args = {a.name: a for a in spec.args}
            for arg_name, _ in sel.arguments:
                if arg_name not in known_args:
                    errors.append(
                        _validation_error(
                            f"unknown argument {arg_name!r} on field {sel.field_name!r}", sel_path, sel
                        )
                    )
            for arg in spec.args:
                if arg.non_null and arg.name not in dict(sel.arguments):
                    errors.append(
                        _validation_error(
                            f"missing required argument {arg.name!r} on field {sel.field_name!r}",
                            sel_path,
                            sel,
                        )
                    )
            child_fields = schema.type_index.get(spec.type_name)
            if child_fields is None:
                if sel.selection_set is not None:
                    errors.append(
                        _validation_error(
                            f"field {sel.field_name!r} of type {spec.type_name} takes no sub-selection",
                            sel_path,
                            sel,
                        )
                    )
            else:
                if sel.selection_set is None:
                    errors.append(
                        _validation_error(
                            f"field {sel.field_name!r} of type {spec.type_name} needs a sub-selection",
                            sel_path,
                            sel,
                        )
                    )
                else:
                    self._validate_selections(
                        schema, child_fields, spec.type_name, sel.selection_set, sel_path, errors
                    )

    def _coerce_args(
        self,
        schema: GeneratedSchema,
        spec: FieldSpec,
        sel: Selection,
        variables: dict[str, Any],
    ) -> dict[str, Any]:
        provided = dict(sel.arguments)
        out: dict[str, Any] = {}
        for arg in spec.args:
            if arg.name not in provided:
                continue
            raw = _literal_to_json(provided[arg.name], variables)
            try:
                value = _coerce_json(schema, arg.type_name, arg.non_null, False, raw)
            except _CoercionError as exc:
                raise ValidationFailedArg(f"argument {arg.name!r}: {exc.message}") from None
            if value is not None:
                out[arg.name] = value
        return out

    # -- resolvers -----------------------------------------------------------------

    def _dispatch_root(self, spec: FieldSpec, args: dict[str, Any], ctx: ExecutionContext) -> Any:
        kind = spec.resolver[0]
        if kind == "create_user":
            payload = args.get("input") or {}
            for required in ("username", "email", "password"):
                if required not in payload:
                    raise ValidationFailedArg(f"createUser input needs {required!r}")
            user = self.auth.register(payload["username"], payload["email"], payload["password"])
            return {"user": user}
        if kind == "login":
            payload = args["input"]
            token, user = self.auth.login(payload["identifier"], payload["password"], ctx.epoch_seconds())
            return {"jwt": token, "user": user}
        if kind == "me":
            if ctx.principal is None:
                raise Unauthenticated()
            user = self.auth.get_user(ctx.principal.user_id)
            if user is None:
                raise Unauthenticated("token subject no longer exists")
            return user
        if kind == "crud":
            _, ct_name, action = spec.resolver
            return self.resolve_crud(ct_name, action, args, ctx)
        raise EngineError(f"unroutable resolver {spec.resolver!r}")

    def resolve_crud(self, content_type: str, action: str, args: dict[str, Any], ctx: ExecutionContext) -> Any:
        decision = self.auth.authorize(ctx.principal, content_type, action)
        if not decision.allowed:
            if decision.anonymous:
                raise Unauthenticated()
            raise Forbidden(f"{action} on {content_type} is not allowed")
        definition = self.registry.get_content_type(content_type)
        if definition is None:
            raise NotFoundError(f"content type {content_type!r} is not registered")
        hooks = self.hooks.get(content_type)
        owner_field = hooks.owner_field if hooks else None

        if action == auth_mod.FIND:
            limit = args.get("limit", 25)
            start = args.get("start", 0)
            filter_map: Optional[dict[str, Any]] = None
            if owner_field and ctx.principal:
                filter_map = {owner_field: ctx.principal.user_id}
            return self.store.scan(content_type, limit=limit, start=start, filter=filter_map)

        if action == auth_mod.FIND_ONE:
            doc = self.store.get(content_type, args["id"])
            if doc is None:
                raise NotFoundError(f"no {content_type} with id {args['id']!r}")
            self._check_owner(owner_field, doc, ctx)
            return doc

        if action == auth_mod.CREATE:
            values = dict(args.get("input") or {})
            if hooks:
                values = hooks.prepare_create(ctx, values)
            violations = validate_document(definition, values, store=self.store)
            if violations:
                raise ValidationFailed(violations)
            values = self._hash_password_fields(definition, values)
            return {content_type: self.store.insert(content_type, values)}

        if action == auth_mod.UPDATE:
            current = self.store.get(content_type, args["id"])
            if current is None:
                raise NotFoundError(f"no {content_type} with id {args['id']!r}")
            self._check_owner(owner_field, current, ctx)
            incoming = dict(args.get("input") or {})
            if hooks:
                incoming = hooks.prepare_update(ctx, current, incoming)
            incoming = self._hash_password_fields(definition, incoming)
            merged = {**current.values, **incoming}
            merged = {k: v for k, v in merged.items() if v is not None}
            violations = validate_document(definition, merged, store=self.store, exclude_id=current.id)
            if violations:
                raise ValidationFailed(violations)
            return {content_type: self.store.update(content_type, current.id, merged)}

        if action == auth_mod.DELETE:
            current = self.store.get(content_type, args["id"])
            if current is None:
                raise NotFoundError(f"no {content_type} with id {args['id']!r}")
            self._check_owner(owner_field, current, ctx)
            return {content_type: self.store.delete(content_type, args["id"])}

        raise EngineError(f"unknown CRUD action {action!r}")

    def _check_owner(self, owner_field: Optional[str], doc: Document, ctx: ExecutionContext) -> None:
        if owner_field is None:
            return
        owner = doc.values.get(owner_field)
        if ctx.principal is None or (owner is not None and owner != ctx.principal.user_id):
            raise Forbidden("record belongs to another user")

    def _hash_password_fields(self, definition: ContentTypeDefinition, values: dict[str, Any]) -> dict[str, Any]:
        out = dict(values)
        for fdef in definition.fields:
            if fdef.kind is FieldKind.PASSWORD and isinstance(out.get(fdef.name), str):
                out[fdef.name] = auth_mod.hash_password(
                    out[fdef.name], os.urandom(auth_mod.MIN_SALT_BYTES), self.auth.hash_iterations
                )
        return out

    # -- value completion ------------------------------------------------------------

    def _complete(
        self,
        schema: GeneratedSchema,
        spec: FieldSpec,
        value: Any,
        sel: Selection,
        ctx: ExecutionContext,
        path: list[str],
        errors: list[dict[str, Any]],
    ) -> Any:
        if value is None:
            return None
        if spec.is_list:
            item_spec = FieldSpec(spec.type_name, is_list=False, resolver=spec.resolver)
            return [
                self._complete(schema, item_spec, item, sel, ctx, path + [str(i)], errors)
                for i, item in enumerate(value)
            ]
        child_fields = schema.type_index.get(spec.type_name)
        if child_fields is None:
            return _serialize_scalar(schema, spec.type_name, value)
        assert sel.selection_set is not None  # validated earlier
        out: dict[str, Any] = {}
        for child in sel.selection_set:
            child_spec = child_fields[child.field_name]
            child_path = path + [child.output_name]
            try:
                raw = self._resolve_field(child_spec, value, ctx)
                out[child.output_name] = self._complete(
                    schema, child_spec, raw, child, ctx, child_path, errors
                )
            except IdVaultError as exc:
                errors.append(_error(exc, child_path, child))
                out[child.output_name] = None
        return out

    def _resolve_field(self, spec: FieldSpec, parent: Any, ctx: ExecutionContext) -> Any:
        kind = spec.resolver[0]
        if kind == "id":
            return parent.id
        if kind == "created_at":
            return parent.created_at
        if kind == "updated_at":
            return parent.updated_at
        if kind == "value":
            return parent.values.get(spec.resolver[1])
        if kind == "media":
            media_id = parent.values.get(spec.resolver[1])
            return self.media_store.get_asset(media_id) if media_id else None
        if kind == "media_list":
            media_ids = parent.values.get(spec.resolver[1]) or []
            return [self.media_store.get_asset(mid) for mid in media_ids]
        if kind == "relation":
            target_id = parent.values.get(spec.resolver[1])
            return self.store.get(spec.resolver[2], target_id) if target_id else None
        if kind == "asset":
            attr = getattr(parent, spec.resolver[1])
            return attr
        if kind == "user":
            attr = getattr(parent, spec.resolver[1])
            return attr.value if spec.resolver[1] == "role" else attr
        if kind == "payload":
            return parent.get(spec.resolver[1])
        raise EngineError(f"unroutable field resolver {spec.resolver!r}")


class ValidationFailedArg(EngineError):
    code = "VALIDATION_FAILED"


def _serialize_scalar(schema: GeneratedSchema, type_name: str, value: Any) -> Any:
    if type_name in schema.enum_index or type_name in BUILTIN_SCALARS:
        return copy.deepcopy(value) if isinstance(value, (dict, list)) else value
    return value


def _location(sel: Optional[Selection]) -> list[dict[str, int]]:
    if sel is None or sel.line == 0:
        return []
    return [{"line": sel.line, "column": sel.column}]


def _error(exc: IdVaultError, path: Optional[list[str]] = None, sel: Optional[Selection] = None) -> dict[str, Any]:
    code = getattr(exc, "code", None)
    if code is None:
        if isinstance(exc, (auth_mod.Expired, auth_mod.TokenError)):
            code = "UNAUTHENTICATED"
        elif isinstance(exc, auth_mod.AuthError):
            code = "BAD_USER_INPUT"
        elif isinstance(exc, persistence.NotFound):
            code = "NOT_FOUND"
        elif isinstance(exc, persistence.UniqueViolation):
            code = "VALIDATION_FAILED"
        else:
            code = "INTERNAL"
    entry: dict[str, Any] = {"message": str(exc), "extensions": {"code": code}}
    if isinstance(exc, ValidationFailed):
        entry["extensions"]["violations"] = [
            {"field": v.field, "reason": v.reason} for v in exc.violations
        ]
    if path:
        entry["path"] = path
    locations = _location(sel)
    if locations:
        entry["locations"] = locations
    return entry


def _validation_error(message: str, path: list[str], sel: Optional[Selection] = None) -> dict[str, Any]:
    entry: dict[str, Any] = {"message": message, "extensions": {"code": "VALIDATION"}}
    if path:
        entry["path"] = path
    locations = _location(sel)
    if locations:
        entry["locations"] = locations
    return entry
