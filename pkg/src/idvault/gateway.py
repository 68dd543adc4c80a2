"""HTTP face of the service: /graphql, /upload, /media/<id>, /healthz.

All query and mutation traffic goes through the single /graphql endpoint;
/upload exists because multipart bytes do not belong in a JSON body, and
/media serves stored blobs back. GraphQL-level failures (validation,
resolver errors) travel inside a 200 response per the usual convention;
transport-level problems use 4xx.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Optional
from urllib.parse import urlparse

from . import __version__
from . import auth as auth_mod
from .api_engine import ApiEngine, ExecutionContext
from .auth import AuthService, Principal, TokenError
from .config import ServiceConfig
from .errors import ConfigError, IdVaultError
from .idcard import (
    IDCARD_TYPE_NAME,
    STATUS_EXTRACTED,
    STATUS_UPLOADED,
    HttpVerificationClient,
    IdCardWorkflow,
    MockVerificationClient,
    install_idcard,
)
from .media import CorruptImage, MediaStore, TooLarge, UnsupportedMediaType
from .persistence import JournalStore
from .query_language import LexError, ParseError, parse
from .schema_registry import SchemaRegistry

GRAPHQL_BODY_LIMIT = 1024 * 1024

logger = logging.getLogger(__name__)


class ServiceStack:
    """Everything the gateway serves, assembled over one data directory."""

    def __init__(self, config: ServiceConfig, install_card_type: bool = True):
        self.config = config
        self.store = JournalStore(config.data_dir)
        self.registry = SchemaRegistry(config.data_dir)
        self.media_store = MediaStore(config.data_dir, self.store, max_bytes=config.max_upload_bytes)
        self.auth = AuthService(
            self.store,
            secret=config.jwt_secret or "local-only",
            ttl_seconds=config.token_ttl_seconds,
        )
        self.engine = ApiEngine(self.registry, self.store, self.media_store, self.auth)
        self.workflow: Optional[IdCardWorkflow] = None
        if install_card_type:
            self.workflow = install_idcard(self.engine)

    def verification_client(self) -> Any:
        if self.config.verification_url:
            return HttpVerificationClient(self.config.verification_url)
        return MockVerificationClient()

    def principal_from_header(self, header: Optional[str], now: int) -> Optional[Principal]:
        if not header or not header.startswith("Bearer "):
            return None
        token = header[len("Bearer ") :].strip()
        try:
            return self.auth.principal_from_token(token, now)
        except TokenError:
            return None

    def close(self) -> None:
        self.store.close()


class _GatewayServer(ThreadingHTTPServer):
    allow_reuse_address = True

    def __init__(self, address, handler, stack: ServiceStack):
        super().__init__(address, handler)
        self.stack = stack


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: _GatewayServer

    # -- plumbing ---------------------------------------------------------------

    def log_message(self, format: str, *args: Any) -> None:
        logger.debug("%s %s", self.address_string(), format % args)

    @property
    def stack(self) -> ServiceStack:
        return self.server.stack

    def _cors_headers(self) -> list[tuple[str, str]]:
        origin = self.headers.get("Origin")
        if origin and origin in self.stack.config.cors_allowed_origins:
            return [
                ("Access-Control-Allow-Origin", origin),
                ("Vary", "Origin"),
            ]
        return []

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for name, value in self._cors_headers():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload: dict[str, Any]) -> None:
        self._send(status, json.dumps(payload).encode("utf-8"), "application/json")

    def _read_body(self, limit: int) -> Optional[bytes]:
        length = int(self.headers.get("Content-Length") or 0)
        if length > limit:
            self.close_connection = True  # body is left unread
            self._send_json(413, {"error": f"request body exceeds {limit} bytes"})
            return None
        return self.rfile.read(length)

    def _principal(self) -> Optional[Principal]:
        return self.stack.principal_from_header(
            self.headers.get("Authorization"), int(time.time())
        )

    # -- routes -------------------------------------------------------------------

    def do_OPTIONS(self) -> None:  # CORS preflight
        self.send_response(204)
        for name, value in self._cors_headers():
            self.send_header(name, value)
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Authorization")
        self.send_header("Access-Control-Max-Age", "600")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        url = urlparse(self.path)
        if url.path == "/healthz":
            self._send_json(200, {"status": "ok", "service": "idvault", "version": __version__})
            return
        if url.path == "/graphql":
            if url.query == "sdl" or "sdl" in url.query.split("&"):
                sdl = self.stack.engine.schema.sdl_text
                self._send(200, sdl.encode("utf-8"), "text/plain; charset=utf-8")
                return
            self._send_json(400, {"error": "POST a JSON body, or GET /graphql?sdl for the schema"})
            return
        if url.path.startswith("/media/"):
            self._serve_media(url.path[len("/media/") :])
            return
        self._send_json(404, {"error": "unknown path"})

    def do_POST(self) -> None:
        url = urlparse(self.path)
        if url.path == "/graphql":
            self._serve_graphql()
            return
        if url.path == "/upload":
            self._serve_upload()
            return
        self._send_json(404, {"error": "unknown path"})

    # -- endpoint bodies -------------------------------------------------------------

    def _serve_graphql(self) -> None:
        body = self._read_body(GRAPHQL_BODY_LIMIT)
        if body is None:
            return
        try:
            payload = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            self._send_json(400, {"error": "request body must be a JSON object"})
            return
        if not isinstance(payload, dict) or not isinstance(payload.get("query"), str):
            self._send_json(400, {"error": "request body needs a string 'query' member"})
            return
        variables = payload.get("variables") or {}
        if not isinstance(variables, dict):
            self._send_json(400, {"error": "'variables' must be an object"})
            return
        ctx = ExecutionContext(
            principal=self._principal(),
            request_id=uuid.uuid4().hex,
            now=lambda: datetime.now(timezone.utc),
        )
        try:
            doc = parse(payload["query"])
        except (LexError, ParseError) as exc:
            self._send_json(
                200,
                {
                    "errors": [
                        {
                            "message": str(exc),
                            "locations": [{"line": exc.line, "column": exc.column}],
                            "extensions": {"code": "GRAPHQL_PARSE_FAILED"},
                        }
                    ]
                },
            )
            return
        result = self.stack.engine.execute(doc, variables, ctx)
        self._send_json(200, result.as_json())

    def _serve_upload(self) -> None:
        principal = self._principal()
        if principal is None:
            self._send_json(401, {"error": "authentication required"})
            return
        decision = self.stack.auth.authorize(principal, "media", auth_mod.CREATE)
        if not decision.allowed:
            self._send_json(403, {"error": "not allowed to upload media"})
            return
        body = self._read_body(self.stack.config.max_upload_bytes)
        if body is None:
            return
        content_type = self.headers.get("Content-Type") or ""
        try:
            filename, mime_type, data = _extract_file_part(content_type, body)
        except ValueError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        try:
            asset = self.stack.media_store.store_media(data, filename, mime_type)
        except TooLarge as exc:
            self._send_json(413, {"error": str(exc)})
            return
        except UnsupportedMediaType as exc:
            self._send_json(415, {"error": str(exc)})
            return
        except CorruptImage as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(200, asset.as_json())

    def _serve_media(self, media_id: str) -> None:
        principal = self._principal()
        if principal is None:
            self._send_json(401, {"error": "authentication required"})
            return
        decision = self.stack.auth.authorize(principal, "media", auth_mod.FIND_ONE)
        if not decision.allowed:
            self._send_json(403, {"error": "not allowed to read media"})
            return
        asset = self.stack.media_store.get_asset(media_id)
        if asset is None:
            self._send_json(404, {"error": f"no media asset {media_id!r}"})
            return
        self._send(200, self.stack.media_store.load_media(media_id), asset.mime_type)


def _extract_file_part(content_type: str, body: bytes) -> tuple[str, str, bytes]:
    """Pull the first file part out of a multipart/form-data body."""
    if not content_type.startswith("multipart/form-data"):
        raise ValueError("upload must be multipart/form-data")
    boundary = None
    for piece in content_type.split(";"):
        piece = piece.strip()
        if piece.startswith("boundary="):
            boundary = piece[len("boundary=") :].strip('"')
    if not boundary:
        raise ValueError("multipart body is missing its boundary parameter")
    delimiter = b"--" + boundary.encode("utf-8")
    for chunk in body.split(delimiter):
        chunk = chunk.strip(b"\r\n")
        if not chunk or chunk == b"--":
            continue
        if b"\r\n\r\n" not in chunk:
            continue
        raw_headers, content = chunk.split(b"\r\n\r\n", 1)
        headers: dict[str, str] = {}
        for line in raw_headers.decode("utf-8", errors="replace").split("\r\n"):
            if ":" in line:
                key, _, value = line.partition(":")
                headers[key.strip().lower()] = value.strip()
        disposition = headers.get("content-disposition", "")
        if "filename=" not in disposition:
            continue
        filename = "upload"
        for piece in disposition.split(";"):
            piece = piece.strip()
            if piece.startswith("filename="):
                filename = piece[len("filename=") :].strip('"') or "upload"
        mime_type = headers.get("content-type", "application/octet-stream")
        return filename, mime_type, content
    raise ValueError("multipart body holds no file part")


class _AutoVerifier(threading.Thread):
    """Opt-in background pass that advances pending cards with the configured
    verification client."""

    def __init__(self, stack: ServiceStack, interval_seconds: int):
        super().__init__(name="idvault-auto-verify", daemon=True)
        self.stack = stack
        self.interval_seconds = interval_seconds
        self.stop_event = threading.Event()

    def run(self) -> None:
        client = self.stack.verification_client()
        while not self.stop_event.wait(self.interval_seconds):
            workflow = self.stack.workflow
            if workflow is None:
                continue
            for status in (STATUS_UPLOADED, STATUS_EXTRACTED):
                for doc in self.stack.store.scan(IDCARD_TYPE_NAME, filter={"statusCode": status}):
                    try:
                        workflow.advance_with_client(doc.id, client, datetime.now(timezone.utc))
                    except IdVaultError as exc:
                        logger.warning("auto-verify skipped %s: %s", doc.id, exc)


@dataclass
class ServiceHandle:
    server: _GatewayServer
    thread: threading.Thread
    stack: ServiceStack
    auto_verifier: Optional[_AutoVerifier]

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    def stop(self) -> None:
        if self.auto_verifier is not None:
            self.auto_verifier.stop_event.set()
            self.auto_verifier.join(timeout=5)
        self.server.shutdown()
        self.server.server_close()
        self.stack.close()


def serve(config: ServiceConfig) -> ServiceHandle:
    """Start the service; returns a handle whose stop() drains and closes."""
    config.check_for_serve()
    stack = ServiceStack(config)
    try:
        server = _GatewayServer(("127.0.0.1", config.port), _Handler, stack)
    except OSError as exc:
        stack.close()
        raise ConfigError(f"cannot bind port {config.port}: {exc}") from exc
    thread = threading.Thread(target=server.serve_forever, name="idvault-http", daemon=True)
    thread.start()
    auto_verifier = None
    if config.auto_verify_seconds > 0:
        auto_verifier = _AutoVerifier(stack, config.auto_verify_seconds)
        auto_verifier.start()
    return ServiceHandle(server=server, thread=thread, stack=stack, auto_verifier=auto_verifier)
