"""Accounts, password hashing, stateless tokens, and role-based authorization.

Passwords are stored as salted iterated SHA-256, encoded as
``$itersha256$<iterations>$<salt-b64>$<digest-b64>`` so the parameters travel
with the hash. Tokens are HS256 JWTs (three base64url segments) carrying
sub/iat/exp; they are stateless and non-revocable within their ttl.

Authorization is a pure table lookup: (role, content type, action) -> allow.
A deny remembers whether the caller was anonymous (401-class) or merely not
allowed (403-class); ownership of individual records is enforced by the
resolvers, which have the record in hand.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
import json
import os
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from .errors import IdVaultError
from .persistence import StoreBackend

USER_COLLECTION = "user"

DEFAULT_HASH_ITERATIONS = 100_000
MIN_PASSWORD_LENGTH = 8
MIN_SALT_BYTES = 16

_HASH_PREFIX = "itersha256"


class AuthError(IdVaultError):
    pass


class DuplicateUsername(AuthError):
    def __init__(self, username: str):
        super().__init__(f"username {username!r} is taken")


class DuplicateEmail(AuthError):
    def __init__(self, email: str):
        super().__init__(f"email {email!r} is taken")


class WeakPassword(AuthError):
    def __init__(self) -> None:
        super().__init__(f"password must be at least {MIN_PASSWORD_LENGTH} characters")


class InvalidCredentials(AuthError):
    """Single failure for unknown identifier and wrong password alike."""

    def __init__(self) -> None:
        super().__init__("invalid identifier or password")


class MalformedEncoding(AuthError):
    def __init__(self, detail: str):
        super().__init__(f"stored password hash is corrupt: {detail}")


class TokenError(AuthError):
    pass


class Expired(TokenError):
    def __init__(self) -> None:
        super().__init__("token has expired")


class BadSignature(TokenError):
    def __init__(self) -> None:
        super().__init__("token signature does not verify")


class Malformed(TokenError):
    def __init__(self, detail: str):
        super().__init__(f"malformed token: {detail}")


class Role(Enum):
    PUBLIC = "PUBLIC"
    AUTHENTICATED = "AUTHENTICATED"


@dataclass(frozen=True)
class UserView:
    id: str
    username: str
    email: str
    role: Role
    created_at: str


@dataclass(frozen=True)
class TokenClaims:
    sub: str
    iat: int
    exp: int


@dataclass(frozen=True)
class Principal:
    user_id: str
    role: Role


# -- password hashing ----------------------------------------------------------


def hash_password(password: str, salt: bytes, iterations: int = DEFAULT_HASH_ITERATIONS) -> str:
    if len(salt) < MIN_SALT_BYTES:
        raise ValueError(f"salt must be at least {MIN_SALT_BYTES} bytes")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    digest = hashlib.sha256(salt + password.encode("utf-8")).digest()
    for _ in range(iterations - 1):
        digest = hashlib.sha256(digest).digest()
    salt_b64 = base64.b64encode(salt).decode("ascii")
    digest_b64 = base64.b64encode(digest).decode("ascii")
    return f"${_HASH_PREFIX}${iterations}${salt_b64}${digest_b64}"


def verify_password(encoded: str, password: str) -> bool:
    parts = encoded.split("$")
    if len(parts) != 5 or parts[0] != "" or parts[1] != _HASH_PREFIX:
        raise MalformedEncoding("unexpected layout")
    try:
        iterations = int(parts[2])
        salt = base64.b64decode(parts[3], validate=True)
        expected = base64.b64decode(parts[4], validate=True)
    except (ValueError, binascii.Error) as exc:
        raise MalformedEncoding(str(exc)) from exc
    if iterations < 1 or len(salt) < MIN_SALT_BYTES or len(expected) != 32:
        raise MalformedEncoding("parameters out of range")
    digest = hashlib.sha256(salt + password.encode("utf-8")).digest()
    for _ in range(iterations - 1):
        digest = hashlib.sha256(digest).digest()
    return hmac.compare_digest(digest, expected)


# -- tokens ---------------------------------------------------------------------


def _b64url_encode(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _b64url_decode(text: str) -> bytes:
    padding = "=" * (-len(text) % 4)
    try:
        return base64.urlsafe_b64decode(text + padding)
    except (ValueError, binascii.Error) as exc:
        raise Malformed("base64url decode failed") from exc


def issue_token(user_id: str, now: int, ttl_seconds: int, secret: str) -> str:
    if ttl_seconds <= 0:
        raise ValueError("ttl must be positive")
    header = _b64url_encode(json.dumps({"alg": "HS256", "typ": "JWT"}, separators=(",", ":")).encode())
    payload = _b64url_encode(
        json.dumps({"sub": user_id, "iat": now, "exp": now + ttl_seconds}, separators=(",", ":")).encode()
    )
    signing_input = f"{header}.{payload}".encode("ascii")
    signature = _b64url_encode(hmac.new(secret.encode("utf-8"), signing_input, hashlib.sha256).digest())
    return f"{header}.{payload}.{signature}"


def verify_token(token: str, now: int, secret: str) -> TokenClaims:
    segments = token.split(".")
    if len(segments) != 3:
        raise Malformed(f"expected 3 segments, got {len(segments)}")
    header_b64, payload_b64, signature_b64 = segments
    signing_input = f"{header_b64}.{payload_b64}".encode("ascii", errors="replace")
    expected = hmac.new(secret.encode("utf-8"), signing_input, hashlib.sha256).digest()
    provided = _b64url_decode(signature_b64)
    if not hmac.compare_digest(expected, provided):
        raise BadSignature()
    try:
        header = json.loads(_b64url_decode(header_b64))
        payload = json.loads(_b64url_decode(payload_b64))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise Malformed("segment is not valid JSON") from exc
    if not isinstance(header, dict) or header.get("alg") != "HS256":
        raise Malformed("unsupported algorithm")
    if not isinstance(payload, dict):
        raise Malformed("claims must be an object")
    try:
        claims = TokenClaims(sub=str(payload["sub"]), iat=int(payload["iat"]), exp=int(payload["exp"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise Malformed("missing or mistyped claim") from exc
    if claims.exp <= claims.iat:
        raise Malformed("exp must come after iat")
    if now >= claims.exp:
        raise Expired()
    return claims


# -- authorization ---------------------------------------------------------------

FIND = "FIND"
FIND_ONE = "FIND_ONE"
CREATE = "CREATE"
UPDATE = "UPDATE"
DELETE = "DELETE"
LOGIN = "LOGIN"
ME = "ME"

CRUD_ACTIONS = (FIND, FIND_ONE, CREATE, UPDATE, DELETE)


@dataclass(frozen=True)
class AuthDecision:
    allowed: bool
    anonymous: bool = False

    @property
    def reason(self) -> Optional[str]:
        if self.allowed:
            return None
        return "anonymous" if self.anonymous else "forbidden"


ALLOW = AuthDecision(True)


class PermissionTable:
    def __init__(self) -> None:
        self._rules: dict[tuple[Role, str, str], bool] = {}

    def grant(self, role: Role, content_type: str, action: str) -> None:
        self._rules[(role, content_type, action)] = True

    def revoke(self, role: Role, content_type: str, action: str) -> None:
        self._rules[(role, content_type, action)] = False

    def allows(self, role: Role, content_type: str, action: str) -> bool:
        return self._rules.get((role, content_type, action), False)

    @classmethod
    def defaults(cls) -> "PermissionTable":
        table = cls()
        for role in Role:
            table.grant(role, USER_COLLECTION, CREATE)
            table.grant(role, USER_COLLECTION, LOGIN)
        table.grant(Role.AUTHENTICATED, USER_COLLECTION, ME)
        for action in CRUD_ACTIONS:
            table.grant(Role.AUTHENTICATED, "idcard", action)
        for action in (CREATE, FIND, FIND_ONE):
            table.grant(Role.AUTHENTICATED, "media", action)
        return table


def authorize(principal: Optional[Principal], content_type: str, action: str, table: PermissionTable) -> AuthDecision:
    role = principal.role if principal else Role.PUBLIC
    if table.allows(role, content_type, action):
        return ALLOW
    return AuthDecision(False, anonymous=principal is None)


# -- account service --------------------------------------------------------------


class AuthService:
    def __init__(
        self,
        store: StoreBackend,
        secret: str,
        ttl_seconds: int,
        hash_iterations: int = DEFAULT_HASH_ITERATIONS,
        permissions: Optional[PermissionTable] = None,
    ):
        if not secret:
            raise ValueError("jwt secret must be non-empty")
        self.store = store
        self.secret = secret
        self.ttl_seconds = ttl_seconds
        self.hash_iterations = hash_iterations
        self.permissions = permissions or PermissionTable.defaults()
        store.ensure_unique_index(USER_COLLECTION, "username", normalize=str.lower)
        store.ensure_unique_index(USER_COLLECTION, "email", normalize=str.lower)

    def _view(self, doc_id: str, values: dict[str, Any], created_at: str) -> UserView:
        return UserView(
            id=doc_id,
            username=values["username"],
            email=values["email"],
            role=Role(values.get("role", Role.AUTHENTICATED.value)),
            created_at=created_at,
        )

    def register(self, username: str, email: str, password: str) -> UserView:
        if len(password) < MIN_PASSWORD_LENGTH:
            raise WeakPassword()
        if not username or not email:
            raise InvalidCredentials()
        lowered_user = username.lower()
        lowered_email = email.lower()
        for doc in self.store.scan(USER_COLLECTION):
            if doc.values["username"].lower() == lowered_user:
                raise DuplicateUsername(username)
            if doc.values["email"].lower() == lowered_email:
                raise DuplicateEmail(email)
        encoded = hash_password(password, os.urandom(MIN_SALT_BYTES), self.hash_iterations)
        doc = self.store.insert(
            USER_COLLECTION,
            {
                "username": username,
                "email": email,
                "passwordHash": encoded,
                "role": Role.AUTHENTICATED.value,
            },
        )
        return self._view(doc.id, doc.values, doc.created_at)

    def login(self, identifier: str, password: str, now: int) -> tuple[str, UserView]:
        lowered = identifier.lower()
        match = None
        for doc in self.store.scan(USER_COLLECTION):
            if doc.values["username"].lower() == lowered or doc.values["email"].lower() == lowered:
                match = doc
                break
        if match is None:
            raise InvalidCredentials()
        try:
            ok = verify_password(match.values["passwordHash"], password)
        except MalformedEncoding:
            raise InvalidCredentials() from None
        if not ok:
            raise InvalidCredentials()
        token = issue_token(match.id, now, self.ttl_seconds, self.secret)
        return token, self._view(match.id, match.values, match.created_at)

    def get_user(self, user_id: str) -> Optional[UserView]:
        doc = self.store.get(USER_COLLECTION, user_id)
        if doc is None:
            return None
        return self._view(doc.id, doc.values, doc.created_at)

    def principal_from_token(self, token: str, now: int) -> Principal:
        claims = verify_token(token, now, self.secret)
        return Principal(user_id=claims.sub, role=Role.AUTHENTICATED)

    def authorize(self, principal: Optional[Principal], content_type: str, action: str) -> AuthDecision:
        return authorize(principal, content_type, action, self.permissions)
