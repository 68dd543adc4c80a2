"""Card content type, verification state machine, and clients."""

from __future__ import annotations

import itertools
import json
import threading
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idvault.api_engine import (
    ApiEngine,
    ExecutionContext,
    Forbidden,
    Unauthenticated,
    ValidationFailed,
)
from idvault.auth import AuthService, Principal, Role
from idvault.idcard import (
    STATUS_EXTRACTED,
    STATUS_REJECTED,
    STATUS_UPLOADED,
    STATUS_VERIFIED,
    ClientUnavailable,
    FaceBox,
    FaceBoxOutOfBounds,
    HttpVerificationClient,
    IdCardWorkflow,
    IllegalTransition,
    MockVerificationClient,
    VerificationOutcome,
    idcard_definition,
    install_idcard,
)
from idvault.media import MediaNotFound, MediaStore
from idvault.persistence import MemoryStore
from idvault.query_language import parse
from idvault.schema_registry import FieldKind, SchemaRegistry

from .helpers import make_png

NOW = datetime(2026, 8, 8, 12, 0, 0, tzinfo=timezone.utc)

# the card schema's canonical field order and kinds
TABLE_FIELDS = [
    ("kind", FieldKind.ENUMERATION),
    ("identifier", FieldKind.SHORT_TEXT),
    ("name", FieldKind.SHORT_TEXT),
    ("birthPlace", FieldKind.SHORT_TEXT),
    ("birthDate", FieldKind.DATE),
    ("gender", FieldKind.ENUMERATION),
    ("bloodType", FieldKind.ENUMERATION),
    ("address", FieldKind.LONG_TEXT),
    ("religion", FieldKind.SHORT_TEXT),
    ("marriageStatus", FieldKind.ENUMERATION),
    ("occupation", FieldKind.SHORT_TEXT),
    ("nationalityCode", FieldKind.SHORT_TEXT),
    ("expiryDate", FieldKind.DATE),
    ("facePhoto", FieldKind.SINGLE_MEDIA),
    ("cardImage", FieldKind.SINGLE_MEDIA),
    ("personWithCardPhoto", FieldKind.SINGLE_MEDIA),
    ("issuerCountryCode", FieldKind.SHORT_TEXT),
    ("issuedDate", FieldKind.DATE),
    ("faceTop", FieldKind.INTEGER),
    ("faceLeft", FieldKind.INTEGER),
    ("faceWidth", FieldKind.INTEGER),
    ("faceHeight", FieldKind.INTEGER),
    ("statusCode", FieldKind.ENUMERATION),
    ("uploadedAt", FieldKind.DATETIME),
    ("extractedAt", FieldKind.DATETIME),
    ("verifiedAt", FieldKind.DATETIME),
    ("issuerProvince", FieldKind.SHORT_TEXT),
    ("issuerCity", FieldKind.SHORT_TEXT),
    ("uploaderId", FieldKind.SHORT_TEXT),
]


class FixedDecisionClient:
    """Stub verifier that always answers with one decision."""

    def __init__(self, decision: str):
        self.decision = decision

    def verify(self, card_image, declared, now):
        return VerificationOutcome(
            decision=self.decision,
            fields={},
            face_box=FaceBox(10, 10, 50, 50),
        )


class FailingClient:
    def verify(self, card_image, declared, now):
        raise ClientUnavailable("connection refused")


@pytest.fixture
def world(tmp_path):
    store = MemoryStore()
    registry = SchemaRegistry(tmp_path / "data")
    media = MediaStore(tmp_path / "data", store)
    auth = AuthService(store, secret="s", ttl_seconds=3600, hash_iterations=5)
    engine = ApiEngine(registry, store, media, auth)
    workflow = install_idcard(engine)
    user = auth.register("uploader", "u@x.io", "pw123456")
    principal = Principal(user_id=user.id, role=Role.AUTHENTICATED)
    asset = media.store_media(make_png(600, 400), "card.png", "image/png")
    return engine, workflow, principal, asset


def declared_fields(asset, **extra):
    base = {
        "kind": "NATIONAL_ID",
        "identifier": "3204011702990001",
        "name": "Kevin",
        "cardImage": asset.id,
        "expiryDate": "2030-01-01",
    }
    base.update(extra)
    return base


def fresh_record(world, **extra):
    engine, workflow, principal, asset = world
    ctx = ExecutionContext(principal=principal, now=lambda: NOW)
    return workflow.create_card(ctx, declared_fields(asset, **extra))


class TestDefinition:
    def test_card_schema_has_29_fields_in_canonical_order(self):
        definition = idcard_definition()
        assert [(f.name, f.kind) for f in definition.fields] == TABLE_FIELDS
        assert len(definition.fields) == 29

    def test_enumeration_value_sets(self):
        fields = idcard_definition().field_map()
        assert fields["gender"].enum_values == ("MALE", "FEMALE")
        assert fields["bloodType"].enum_values == ("A", "B", "AB", "O", "UNKNOWN")
        assert fields["marriageStatus"].enum_values == ("SINGLE", "MARRIED", "DIVORCED", "WIDOWED")
        assert fields["statusCode"].enum_values == ("UPLOADED", "EXTRACTED", "VERIFIED", "REJECTED")
        assert fields["kind"].enum_values == ("NATIONAL_ID", "PASSPORT", "DRIVER_LICENSE")


class TestCreateCard:
    def test_authenticated_create_sets_initial_state(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        assert record.values["statusCode"] == STATUS_UPLOADED
        assert record.values["uploaderId"] == principal.user_id
        assert record.values["uploadedAt"].endswith("Z")
        assert "extractedAt" not in record.values
        assert "verifiedAt" not in record.values

    def test_anonymous_create_refused(self, world):
        engine, workflow, principal, asset = world
        with pytest.raises(Unauthenticated):
            workflow.create_card(ExecutionContext(principal=None), declared_fields(asset))

    def test_absent_media_refused(self, world):
        engine, workflow, principal, asset = world
        ctx = ExecutionContext(principal=principal)
        with pytest.raises(MediaNotFound):
            workflow.create_card(ctx, declared_fields(asset, cardImage="0" * 26))

    def test_validation_failure_surfaces_violations(self, world):
        engine, workflow, principal, asset = world
        ctx = ExecutionContext(principal=principal)
        with pytest.raises(ValidationFailed) as err:
            workflow.create_card(ctx, declared_fields(asset, gender="OTHER"))
        assert any(v.field == "gender" for v in err.value.violations)


class TestExtraction:
    def test_box_inside_image_extracts(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        updated = workflow.record_extraction(
            record.id, {"religion": "ISLAM"}, FaceBox(10, 10, 100, 120), NOW + timedelta(minutes=1)
        )
        assert updated.values["statusCode"] == STATUS_EXTRACTED
        assert updated.values["faceWidth"] == 100
        assert updated.values["religion"] == "ISLAM"
        assert updated.values["extractedAt"] >= updated.values["uploadedAt"]

    def test_box_past_right_edge_rejected(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        with pytest.raises(FaceBoxOutOfBounds):
            workflow.record_extraction(record.id, {}, FaceBox(10, 550, 100, 100), NOW)
        assert engine.store.get("idcard", record.id).values["statusCode"] == STATUS_UPLOADED

    def test_box_past_bottom_edge_rejected(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        with pytest.raises(FaceBoxOutOfBounds):
            workflow.record_extraction(record.id, {}, FaceBox(350, 10, 100, 100), NOW)

    def test_declared_values_win_over_extracted(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        updated = workflow.record_extraction(
            record.id, {"name": "Machine Read", "occupation": "engineer"}, FaceBox(0, 0, 10, 10), NOW
        )
        assert updated.values["name"] == "Kevin"  # declared at upload time
        assert updated.values["occupation"] == "engineer"  # was empty

    def test_extraction_on_verified_record_is_illegal(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        workflow.record_extraction(record.id, {}, FaceBox(0, 0, 10, 10), NOW)
        workflow.run_verification(record.id, FixedDecisionClient(STATUS_VERIFIED), NOW)
        with pytest.raises(IllegalTransition):
            workflow.record_extraction(record.id, {}, FaceBox(0, 0, 10, 10), NOW)


class TestVerification:
    def test_verified_outcome(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        workflow.record_extraction(record.id, {}, FaceBox(0, 0, 10, 10), NOW)
        done = workflow.run_verification(record.id, FixedDecisionClient(STATUS_VERIFIED), NOW)
        assert done.values["statusCode"] == STATUS_VERIFIED
        assert done.values["verifiedAt"] >= done.values["extractedAt"]

    def test_rejected_outcome_also_stamps_verified_at(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        workflow.record_extraction(record.id, {}, FaceBox(0, 0, 10, 10), NOW)
        done = workflow.run_verification(record.id, FixedDecisionClient(STATUS_REJECTED), NOW)
        assert done.values["statusCode"] == STATUS_REJECTED
        assert "verifiedAt" in done.values

    def test_verification_before_extraction_is_illegal(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        with pytest.raises(IllegalTransition):
            workflow.run_verification(record.id, FixedDecisionClient(STATUS_VERIFIED), NOW)

    def test_client_failure_leaves_state_unchanged(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        workflow.record_extraction(record.id, {}, FaceBox(0, 0, 10, 10), NOW)
        with pytest.raises(ClientUnavailable):
            workflow.run_verification(record.id, FailingClient(), NOW)
        after = engine.store.get("idcard", record.id)
        assert after.values["statusCode"] == STATUS_EXTRACTED
        assert "verifiedAt" not in after.values


class TestMockClient:
    def test_consistent_card_verifies(self):
        outcome = MockVerificationClient().verify(
            b"", {"kind": "NATIONAL_ID", "identifier": "3204011702990001", "expiryDate": "2030-01-01",
                  "faceTop": 1, "faceLeft": 1, "faceWidth": 5, "faceHeight": 5}, NOW
        )
        assert outcome.decision == STATUS_VERIFIED

    def test_expired_card_rejected(self):
        outcome = MockVerificationClient().verify(
            b"", {"expiryDate": "2019-01-01", "faceTop": 0, "faceLeft": 0, "faceWidth": 1, "faceHeight": 1},
            datetime(2020, 6, 1, tzinfo=timezone.utc),
        )
        assert outcome.decision == STATUS_REJECTED

    def test_national_id_with_bad_identifier_rejected(self):
        outcome = MockVerificationClient().verify(
            b"", {"kind": "NATIONAL_ID", "identifier": "12AB", "faceTop": 0, "faceLeft": 0,
                  "faceWidth": 1, "faceHeight": 1}, NOW
        )
        assert outcome.decision == STATUS_REJECTED

    def test_missing_face_box_rejected(self):
        outcome = MockVerificationClient().verify(b"", {"identifier": "x"}, NOW)
        assert outcome.decision == STATUS_REJECTED and outcome.face_box is None

    def test_declared_fields_echoed_as_extracted(self):
        declared = {"name": "Kevin", "religion": "ISLAM", "statusCode": "VERIFIED"}
        outcome = MockVerificationClient().verify(b"", declared, NOW)
        assert outcome.fields == {"name": "Kevin", "religion": "ISLAM"}  # lifecycle fields dropped

    def test_deterministic_for_identical_input(self):
        declared = {"kind": "PASSPORT", "identifier": "A123", "faceTop": 0, "faceLeft": 0,
                    "faceWidth": 2, "faceHeight": 2}
        first = MockVerificationClient().verify(b"img", declared, NOW)
        second = MockVerificationClient().verify(b"img", declared, NOW)
        assert first == second


# -- state machine oracle -----------------------------------------------------------

OPS = ("extract", "verify_ok", "verify_reject")

REFERENCE_TABLE = {
    (STATUS_UPLOADED, "extract"): STATUS_EXTRACTED,
    (STATUS_EXTRACTED, "verify_ok"): STATUS_VERIFIED,
    (STATUS_EXTRACTED, "verify_reject"): STATUS_REJECTED,
}


def reference_run(sequence):
    """Hand-coded model: (status, ok?) after each op starting from UPLOADED."""
    status = STATUS_UPLOADED
    trace = []
    for op in sequence:
        nxt = REFERENCE_TABLE.get((status, op))
        if nxt is None:
            trace.append((status, False))
        else:
            status = nxt
            trace.append((status, True))
    return trace


def workflow_run(world, sequence):
    engine, workflow, principal, asset = world
    record = fresh_record(world)
    trace = []
    for op in sequence:
        try:
            if op == "extract":
                workflow.record_extraction(record.id, {}, FaceBox(0, 0, 10, 10), NOW)
            elif op == "verify_ok":
                workflow.run_verification(record.id, FixedDecisionClient(STATUS_VERIFIED), NOW)
            else:
                workflow.run_verification(record.id, FixedDecisionClient(STATUS_REJECTED), NOW)
            ok = True
        except IllegalTransition:
            ok = False
        status = engine.store.get("idcard", record.id).values["statusCode"]
        trace.append((status, ok))
    return trace


class TestStateMachineOracle:
    def test_exhaustive_interleavings_up_to_length_four(self, world):
        for length in range(0, 5):
            for sequence in itertools.product(OPS, repeat=length):
                assert workflow_run(world, sequence) == reference_run(sequence), sequence

    @given(st.lists(st.sampled_from(OPS), max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_random_sequences_follow_reference(self, sequence):
        store = MemoryStore()
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            registry = SchemaRegistry(tmp)
            media = MediaStore(tmp, store)
            auth = AuthService(store, secret="s", ttl_seconds=60, hash_iterations=5)
            engine = ApiEngine(registry, store, media, auth)
            workflow = install_idcard(engine)
            user = auth.register("u", "u@x.io", "pw123456")
            principal = Principal(user_id=user.id, role=Role.AUTHENTICATED)
            asset = media.store_media(make_png(64, 64), "c.png", "image/png")
            world = (engine, workflow, principal, asset)
            trace = workflow_run(world, sequence)
            assert trace == reference_run(sequence)
            # timestamp monotonicity on whatever was stamped
            record = engine.store.scan("idcard")[0].values
            stamps = [record.get("uploadedAt"), record.get("extractedAt"), record.get("verifiedAt")]
            present = [s for s in stamps if s is not None]
            assert present == sorted(present)

    def test_illegal_calls_never_mutate(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        before = engine.store.get("idcard", record.id).values
        with pytest.raises(IllegalTransition):
            workflow.run_verification(record.id, FixedDecisionClient(STATUS_VERIFIED), NOW)
        assert engine.store.get("idcard", record.id).values == before


class TestOwnership:
    def test_foreign_update_is_forbidden(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        intruder = engine.auth.register("intruder", "i@x.io", "pw123456")
        intruder_principal = Principal(user_id=intruder.id, role=Role.AUTHENTICATED)
        body = engine.execute(
            parse(f'mutation {{ updateIdcard(id: "{record.id}", input: {{name: "stolen"}}) {{ idcard {{ id }} }} }}'),
            {},
            ExecutionContext(principal=intruder_principal),
        ).as_json()
        assert body["errors"][0]["extensions"]["code"] == "FORBIDDEN"
        assert engine.store.get("idcard", record.id).values["name"] == "Kevin"

    def test_foreign_delete_is_forbidden(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        intruder = engine.auth.register("intruder2", "i2@x.io", "pw123456")
        body = engine.execute(
            parse(f'mutation {{ deleteIdcard(id: "{record.id}") {{ idcard {{ id }} }} }}'),
            {},
            ExecutionContext(principal=Principal(user_id=intruder.id, role=Role.AUTHENTICATED)),
        ).as_json()
        assert body["errors"][0]["extensions"]["code"] == "FORBIDDEN"
        assert engine.store.get("idcard", record.id) is not None

    def test_find_is_scoped_to_uploader(self, world):
        engine, workflow, principal, asset = world
        fresh_record(world)
        other = engine.auth.register("other", "o@x.io", "pw123456")
        body = engine.execute(
            parse("query { idcards { id } }"),
            {},
            ExecutionContext(principal=Principal(user_id=other.id, role=Role.AUTHENTICATED)),
        ).as_json()
        assert body["data"]["idcards"] == []

    def test_owner_sees_own_records(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        body = engine.execute(
            parse("query { idcards { id } }"), {}, ExecutionContext(principal=principal)
        ).as_json()
        assert [r["id"] for r in body["data"]["idcards"]] == [record.id]


class TestGraphQLLifecycleGuards:
    def test_create_ignores_client_supplied_status(self, world):
        engine, workflow, principal, asset = world
        body = engine.execute(
            parse(
                "mutation M($input: createIdcardInput!) { createIdcard(input: $input) "
                "{ idcard { statusCode uploaderId } } }"
            ),
            {"input": {**declared_fields(asset), "statusCode": "VERIFIED"}},
            ExecutionContext(principal=principal),
        ).as_json()
        card = body["data"]["createIdcard"]["idcard"]
        assert card["statusCode"] == STATUS_UPLOADED
        assert card["uploaderId"] == principal.user_id

    def test_update_refuses_lifecycle_fields(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        body = engine.execute(
            parse(f'mutation {{ updateIdcard(id: "{record.id}", input: {{statusCode: VERIFIED}}) {{ idcard {{ id }} }} }}'),
            {},
            ExecutionContext(principal=principal),
        ).as_json()
        error = body["errors"][0]
        assert error["extensions"]["code"] == "VALIDATION_FAILED"
        assert "system-managed" in error["message"]

    def test_update_of_declared_fields_allowed(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        body = engine.execute(
            parse(f'mutation {{ updateIdcard(id: "{record.id}", input: {{occupation: "engineer"}}) {{ idcard {{ occupation }} }} }}'),
            {},
            ExecutionContext(principal=principal),
        ).as_json()
        assert body["data"]["updateIdcard"]["idcard"]["occupation"] == "engineer"


class TestSelectionErrors:
    def test_unknown_card_field_error_path(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world)
        body = engine.execute(
            parse(f'query {{ idcard(id: "{record.id}") {{ bogus }} }}'),
            {},
            ExecutionContext(principal=principal),
        ).as_json()
        assert "data" not in body
        assert body["errors"][0]["path"] == ["idcard", "bogus"]


class TestAdvanceWithClient:
    def test_uploaded_record_reaches_verified_in_one_pass(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world, faceTop=10, faceLeft=10, faceWidth=100, faceHeight=100)
        done = workflow.advance_with_client(record.id, MockVerificationClient(), NOW)
        assert done.values["statusCode"] == STATUS_VERIFIED
        values = done.values
        assert values["uploadedAt"] <= values["extractedAt"] <= values["verifiedAt"]

    def test_expired_card_lands_rejected(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(
            world, expiryDate="2019-01-01", faceTop=0, faceLeft=0, faceWidth=10, faceHeight=10
        )
        done = workflow.advance_with_client(
            record.id, MockVerificationClient(), datetime(2020, 6, 1, tzinfo=timezone.utc)
        )
        assert done.values["statusCode"] == STATUS_REJECTED

    def test_terminal_record_cannot_advance(self, world):
        engine, workflow, principal, asset = world
        record = fresh_record(world, faceTop=0, faceLeft=0, faceWidth=10, faceHeight=10)
        workflow.advance_with_client(record.id, MockVerificationClient(), NOW)
        with pytest.raises(IllegalTransition):
            workflow.advance_with_client(record.id, MockVerificationClient(), NOW)


class _CannedVerifier(BaseHTTPRequestHandler):
    received: dict = {}

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        type(self).received = {
            "content_type": self.headers.get("Content-Type", ""),
            "body": self.rfile.read(length),
        }
        response = json.dumps(
            {"decision": "VERIFIED", "fields": {"occupation": "engineer"},
             "faceBox": {"top": 1, "left": 2, "width": 3, "height": 4}}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(response)))
        self.end_headers()
        self.wfile.write(response)

    def log_message(self, *args):
        pass


class TestHttpClient:
    def test_wire_contract_round_trip(self):
        server = HTTPServer(("127.0.0.1", 0), _CannedVerifier)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            client = HttpVerificationClient(f"http://127.0.0.1:{server.server_address[1]}/")
            outcome = client.verify(b"IMAGEBYTES", {"name": "Kevin"}, NOW)
        finally:
            server.shutdown()
            server.server_close()
        assert outcome.decision == STATUS_VERIFIED
        assert outcome.fields == {"occupation": "engineer"}
        assert outcome.face_box == FaceBox(1, 2, 3, 4)
        body = _CannedVerifier.received["body"]
        assert b"IMAGEBYTES" in body
        assert b'{"name": "Kevin"}' in body
        assert "multipart/form-data" in _CannedVerifier.received["content_type"]

    def test_unreachable_endpoint_is_client_unavailable(self, free_port):
        client = HttpVerificationClient(f"http://127.0.0.1:{free_port}/", timeout_seconds=0.5)
        with pytest.raises(ClientUnavailable):
            client.verify(b"", {}, NOW)
