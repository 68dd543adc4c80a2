"""Identity-card domain: the flagship content type and its verification flow.

A card record moves UPLOADED -> EXTRACTED -> VERIFIED | REJECTED and nowhere
else; VERIFIED and REJECTED are terminal. Extraction merges machine-read
fields into the record without clobbering what the uploader declared, and
records the face bounding box (validated against the card image's pixel
dimensions). Verification delegates the decision to a pluggable client; the
bundled mock is deterministic so the whole pipeline is testable offline, and
an HTTP client speaks the same contract to a real service.
"""

from __future__ import annotations

import io
import json
import urllib.error
import urllib.request
import uuid
from dataclasses import dataclass
from datetime import date, datetime
from typing import Any, Optional

from .api_engine import ApiEngine, ContentTypeHooks, ExecutionContext, Forbidden, Unauthenticated, ValidationFailed
from .errors import IdVaultError
from .media import MediaNotFound, MediaStore
from .persistence import Document, StoreBackend, utc_now_text
from .schema_registry import (
    ContentTypeDefinition,
    FieldDefinition,
    FieldKind,
    SchemaRegistry,
    validate_document,
)

IDCARD_TYPE_NAME = "idcard"

STATUS_UPLOADED = "UPLOADED"
STATUS_EXTRACTED = "EXTRACTED"
STATUS_VERIFIED = "VERIFIED"
STATUS_REJECTED = "REJECTED"

STATUS_CODES = (STATUS_UPLOADED, STATUS_EXTRACTED, STATUS_VERIFIED, STATUS_REJECTED)

# the only legal moves; anything absent here is an IllegalTransition
LEGAL_TRANSITIONS = {
    (STATUS_UPLOADED, STATUS_EXTRACTED),
    (STATUS_EXTRACTED, STATUS_VERIFIED),
    (STATUS_EXTRACTED, STATUS_REJECTED),
}

KIND_VALUES = ("NATIONAL_ID", "PASSPORT", "DRIVER_LICENSE")
GENDER_VALUES = ("MALE", "FEMALE")
BLOOD_TYPE_VALUES = ("A", "B", "AB", "O", "UNKNOWN")
MARRIAGE_STATUS_VALUES = ("SINGLE", "MARRIED", "DIVORCED", "WIDOWED")

SYSTEM_MANAGED_FIELDS = ("statusCode", "uploadedAt", "extractedAt", "verifiedAt", "uploaderId")

FACE_BOX_FIELDS = ("faceTop", "faceLeft", "faceWidth", "faceHeight")


class IdCardError(IdVaultError):
    pass


class IllegalTransition(IdCardError):
    code = "ILLEGAL_TRANSITION"

    def __init__(self, current: str, attempted: str):
        super().__init__(f"cannot move card from {current} to {attempted}")
        self.current = current
        self.attempted = attempted


class FaceBoxOutOfBounds(IdCardError):
    code = "FACE_BOX_OUT_OF_BOUNDS"


class ClientUnavailable(IdCardError):
    code = "CLIENT_UNAVAILABLE"


class RecordNotFound(IdCardError):
    code = "NOT_FOUND"

    def __init__(self, record_id: str):
        super().__init__(f"no idcard record {record_id!r}")


@dataclass(frozen=True)
class FaceBox:
    top: int
    left: int
    width: int
    height: int

    def check(self, image_width: Optional[int], image_height: Optional[int]) -> None:
        if self.top < 0 or self.left < 0 or self.width <= 0 or self.height <= 0:
            raise FaceBoxOutOfBounds(
                f"face box ({self.top},{self.left},{self.width},{self.height}) has illegal geometry"
            )
        if image_width is not None and self.left + self.width > image_width:
            raise FaceBoxOutOfBounds(
                f"face box right edge {self.left + self.width} exceeds image width {image_width}"
            )
        if image_height is not None and self.top + self.height > image_height:
            raise FaceBoxOutOfBounds(
                f"face box bottom edge {self.top + self.height} exceeds image height {image_height}"
            )


@dataclass(frozen=True)
class VerificationOutcome:
    decision: str  # VERIFIED | REJECTED
    fields: dict[str, Any]
    face_box: Optional[FaceBox]


def idcard_definition() -> ContentTypeDefinition:
    """The 29-field card schema, in its canonical field order."""
    f = FieldDefinition
    k = FieldKind
    return ContentTypeDefinition(
        name=IDCARD_TYPE_NAME,
        fields=(
            f("kind", k.ENUMERATION, required=True, enum_values=KIND_VALUES),
            f("identifier", k.SHORT_TEXT, required=True),
            f("name", k.SHORT_TEXT, required=True),
            f("birthPlace", k.SHORT_TEXT),
            f("birthDate", k.DATE),
            f("gender", k.ENUMERATION, enum_values=GENDER_VALUES),
            f("bloodType", k.ENUMERATION, enum_values=BLOOD_TYPE_VALUES),
            f("address", k.LONG_TEXT),
            f("religion", k.SHORT_TEXT),
            f("marriageStatus", k.ENUMERATION, enum_values=MARRIAGE_STATUS_VALUES),
            f("occupation", k.SHORT_TEXT),
            f("nationalityCode", k.SHORT_TEXT),
            f("expiryDate", k.DATE),
            f("facePhoto", k.SINGLE_MEDIA),
            f("cardImage", k.SINGLE_MEDIA, required=True),
            f("personWithCardPhoto", k.SINGLE_MEDIA),
            f("issuerCountryCode", k.SHORT_TEXT),
            f("issuedDate", k.DATE),
            f("faceTop", k.INTEGER),
            f("faceLeft", k.INTEGER),
            f("faceWidth", k.INTEGER),
            f("faceHeight", k.INTEGER),
            f("statusCode", k.ENUMERATION, enum_values=STATUS_CODES),
            f("uploadedAt", k.DATETIME),
            f("extractedAt", k.DATETIME),
            f("verifiedAt", k.DATETIME),
            f("issuerProvince", k.SHORT_TEXT),
            f("issuerCity", k.SHORT_TEXT),
            f("uploaderId", k.SHORT_TEXT),
        ),
    )


def register_idcard_type(registry: SchemaRegistry) -> ContentTypeDefinition:
    existing = registry.get_content_type(IDCARD_TYPE_NAME)
    if existing is not None:
        return existing
    return registry.register_content_type(idcard_definition())


def _stamp_after(now: datetime, floor_text: Optional[str]) -> str:
    """Timestamp text for now, clamped so stamps never run backwards."""
    text = utc_now_text(now)
    if floor_text and text < floor_text:
        return floor_text
    return text


class MockVerificationClient:
    """Deterministic stand-in for the external verification service.

    Rejects when the card is expired at adjudication time, when a national id
    is not exactly 16 digits, or when no face box is available; everything
    else verifies. Declared fields are echoed back as the extraction result.
    """

    def verify(self, card_image: bytes, declared: dict[str, Any], now: datetime) -> VerificationOutcome:
        face_box = face_box_from_fields(declared)
        decision = STATUS_VERIFIED
        expiry = declared.get("expiryDate")
        if isinstance(expiry, str):
            try:
                if date.fromisoformat(expiry) < now.date():
                    decision = STATUS_REJECTED
            except ValueError:
                decision = STATUS_REJECTED
        identifier = declared.get("identifier")
        if declared.get("kind") == "NATIONAL_ID":
            if not (isinstance(identifier, str) and len(identifier) == 16 and identifier.isdigit()):
                decision = STATUS_REJECTED
        if face_box is None:
            decision = STATUS_REJECTED
        fields = {k: v for k, v in declared.items() if k not in SYSTEM_MANAGED_FIELDS}
        return VerificationOutcome(decision=decision, fields=fields, face_box=face_box)


class HttpVerificationClient:
    """Talks to a real verification endpoint: multipart POST of the card image
    plus the declared fields as JSON; expects {decision, fields, faceBox}."""

    def __init__(self, url: str, timeout_seconds: float = 30.0):
        self.url = url
        self.timeout_seconds = timeout_seconds

    def verify(self, card_image: bytes, declared: dict[str, Any], now: datetime) -> VerificationOutcome:
        boundary = f"----idvault-{uuid.uuid4().hex}"
        body = io.BytesIO()

        def part(headers: str, payload: bytes) -> None:
            body.write(f"--{boundary}\r\n{headers}\r\n\r\n".encode("utf-8"))
            body.write(payload)
            body.write(b"\r\n")

        part(
            'Content-Disposition: form-data; name="cardImage"; filename="card"\r\n'
            "Content-Type: application/octet-stream",
            card_image,
        )
        part(
            'Content-Disposition: form-data; name="fields"\r\nContent-Type: application/json',
            json.dumps(declared).encode("utf-8"),
        )
        body.write(f"--{boundary}--\r\n".encode("utf-8"))
        request = urllib.request.Request(
            self.url,
            data=body.getvalue(),
            headers={"Content-Type": f"multipart/form-data; boundary={boundary}"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_seconds) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ClientUnavailable(f"verification endpoint failed: {exc}") from exc
        decision = payload.get("decision")
        if decision not in (STATUS_VERIFIED, STATUS_REJECTED):
            raise ClientUnavailable(f"verification endpoint returned decision {decision!r}")
        box = None
        raw_box = payload.get("faceBox")
        if isinstance(raw_box, dict):
            try:
                box = FaceBox(
                    top=int(raw_box["top"]),
                    left=int(raw_box["left"]),
                    width=int(raw_box["width"]),
                    height=int(raw_box["height"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ClientUnavailable(f"verification endpoint returned bad faceBox: {exc}") from exc
        fields = payload.get("fields") or {}
        if not isinstance(fields, dict):
            raise ClientUnavailable("verification endpoint returned non-object fields")
        return VerificationOutcome(decision=decision, fields=fields, face_box=box)


def face_box_from_fields(values: dict[str, Any]) -> Optional[FaceBox]:
    if all(isinstance(values.get(name), int) for name in FACE_BOX_FIELDS):
        return FaceBox(
            top=values["faceTop"],
            left=values["faceLeft"],
            width=values["faceWidth"],
            height=values["faceHeight"],
        )
    return None


class IdCardWorkflow:
    """Lifecycle operations on card records; one writer turn per record via
    the store's per-collection serialization."""

    def __init__(self, registry: SchemaRegistry, store: StoreBackend, media_store: MediaStore):
        self.registry = registry
        self.store = store
        self.media_store = media_store
        register_idcard_type(registry)

    def _definition(self) -> ContentTypeDefinition:
        definition = self.registry.get_content_type(IDCARD_TYPE_NAME)
        assert definition is not None
        return definition

    def _load(self, record_id: str) -> Document:
        doc = self.store.get(IDCARD_TYPE_NAME, record_id)
        if doc is None:
            raise RecordNotFound(record_id)
        return doc

    def create_card(
        self,
        ctx: ExecutionContext,
        declared: dict[str, Any],
        card_image_id: Optional[str] = None,
        now: Optional[datetime] = None,
    ) -> Document:
        if ctx.principal is None:
            raise Unauthenticated("uploading a card requires a logged-in user")
        values = dict(declared)
        if card_image_id is not None:
            values["cardImage"] = card_image_id
        image_id = values.get("cardImage")
        if not image_id or self.media_store.get_asset(image_id) is None:
            raise MediaNotFound(str(image_id))
        for name in ("statusCode", "uploadedAt", "extractedAt", "verifiedAt"):
            values.pop(name, None)
        values["statusCode"] = STATUS_UPLOADED
        values["uploadedAt"] = utc_now_text(now or ctx.now())
        values["uploaderId"] = ctx.principal.user_id
        violations = validate_document(self._definition(), values, store=self.store)
        if violations:
            raise ValidationFailed(violations)
        box = face_box_from_fields(values)
        if box is not None:
            asset = self.media_store.get_asset(values["cardImage"])
            box.check(asset.width if asset else None, asset.height if asset else None)
        return self.store.insert(IDCARD_TYPE_NAME, values)

    def record_extraction(
        self,
        record_id: str,
        extracted: dict[str, Any],
        face_box: Optional[FaceBox],
        now: datetime,
    ) -> Document:
        doc = self._load(record_id)
        current = doc.values.get("statusCode", STATUS_UPLOADED)
        if (current, STATUS_EXTRACTED) not in LEGAL_TRANSITIONS:
            raise IllegalTransition(current, STATUS_EXTRACTED)
        values = dict(doc.values)
        if face_box is not None:
            asset = self.media_store.get_asset(values.get("cardImage", ""))
            face_box.check(asset.width if asset else None, asset.height if asset else None)
            values["faceTop"] = face_box.top
            values["faceLeft"] = face_box.left
            values["faceWidth"] = face_box.width
            values["faceHeight"] = face_box.height
        for name, value in extracted.items():
            if name in SYSTEM_MANAGED_FIELDS or name in FACE_BOX_FIELDS:
                continue
            if values.get(name) in (None, ""):
                values[name] = value  # declared values win over extracted ones
        values["statusCode"] = STATUS_EXTRACTED
        values["extractedAt"] = _stamp_after(now, values.get("uploadedAt"))
        violations = validate_document(self._definition(), values, store=self.store, exclude_id=doc.id)
        if violations:
            raise ValidationFailed(violations)
        return self.store.update(IDCARD_TYPE_NAME, record_id, values)

    def run_verification(self, record_id: str, client: Any, now: datetime) -> Document:
        doc = self._load(record_id)
        current = doc.values.get("statusCode", STATUS_UPLOADED)
        if current not in (STATUS_EXTRACTED,):
            raise IllegalTransition(current, STATUS_VERIFIED)
        card_image = self.media_store.load_media(doc.values["cardImage"])
        outcome = client.verify(card_image, dict(doc.values), now)
        return self._apply_decision(doc, outcome.decision, now)

    def _apply_decision(self, doc: Document, decision: str, now: datetime) -> Document:
        current = doc.values.get("statusCode", STATUS_UPLOADED)
        if (current, decision) not in LEGAL_TRANSITIONS:
            raise IllegalTransition(current, decision)
        values = dict(doc.values)
        values["statusCode"] = decision
        values["verifiedAt"] = _stamp_after(now, values.get("extractedAt"))
        return self.store.update(IDCARD_TYPE_NAME, doc.id, values)

    def advance_with_client(self, record_id: str, client: Any, now: datetime) -> Document:
        """One verification pass: a single client call carries an UPLOADED
        record through extraction and adjudication, or adjudicates an
        EXTRACTED one."""
        doc = self._load(record_id)
        status = doc.values.get("statusCode", STATUS_UPLOADED)
        if status == STATUS_UPLOADED:
            card_image = self.media_store.load_media(doc.values["cardImage"])
            outcome = client.verify(card_image, dict(doc.values), now)
            doc = self.record_extraction(record_id, outcome.fields, outcome.face_box, now)
            return self._apply_decision(doc, outcome.decision, now)
        if status == STATUS_EXTRACTED:
            return self.run_verification(record_id, client, now)
        raise IllegalTransition(status, STATUS_VERIFIED)


class IdCardHooks(ContentTypeHooks):
    """Engine hooks that route GraphQL CRUD on idcard through the workflow
    rules: creates are stamped, lifecycle fields are never client-writable,
    and records are scoped to their uploader."""

    owner_field = "uploaderId"

    def __init__(self, workflow: IdCardWorkflow):
        self.workflow = workflow

    def prepare_create(self, ctx: ExecutionContext, values: dict[str, Any]) -> dict[str, Any]:
        if ctx.principal is None:
            raise Unauthenticated("uploading a card requires a logged-in user")
        stamped = dict(values)
        image_id = stamped.get("cardImage")
        if not image_id or self.workflow.media_store.get_asset(image_id) is None:
            raise MediaNotFound(str(image_id))
        for name in ("statusCode", "uploadedAt", "extractedAt", "verifiedAt"):
            stamped.pop(name, None)
        stamped["statusCode"] = STATUS_UPLOADED
        stamped["uploadedAt"] = utc_now_text(ctx.now())
        stamped["uploaderId"] = ctx.principal.user_id
        box = face_box_from_fields(stamped)
        if box is not None:
            asset = self.workflow.media_store.get_asset(image_id)
            box.check(asset.width if asset else None, asset.height if asset else None)
        return stamped

    def prepare_update(self, ctx: ExecutionContext, current: Document, values: dict[str, Any]) -> dict[str, Any]:
        from .schema_registry import Violation

        touched = [name for name in SYSTEM_MANAGED_FIELDS if name in values]
        if touched:
            raise ValidationFailed(
                [Violation(name, "lifecycle field is system-managed") for name in touched]
            )
        return values


def install_idcard(engine: ApiEngine) -> IdCardWorkflow:
    """Register the card content type on an engine and wire its hooks."""
    workflow = IdCardWorkflow(engine.registry, engine.store, engine.media_store)
    engine.register_hooks(IDCARD_TYPE_NAME, IdCardHooks(workflow))
    return workflow
