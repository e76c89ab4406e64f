"""Organizations, users, tokens and de-identification.

Tokens are MAC-signed claim sets, not full OpenID Connect: the platform
only needs claim binding and expiry.  Correlation ids are a keyed hash of
the user id under a deployment secret, so the same user always maps to
the same opaque id and the mapping is irreversible without the secret.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .codec import canonical_join, mac, macs_equal, sha256_hex
from .errors import (BadSignature, DuplicateUser, ExpiredToken, Unauthorized,
                     UnknownOrg, UnknownSchema, UnknownUser)

ROLES = frozenset({
    "agent", "farmer", "fleet_manager", "operator",
    "supervisor", "financier", "admin",
})

DEFAULT_TOKEN_TTL_S = 3600


class OrgKind(str, Enum):
    COOP_AGENTS = "COOP_AGENTS"
    FLEET = "FLEET"
    PLATFORM = "PLATFORM"
    FINANCIER = "FINANCIER"


class FieldClass(str, Enum):
    PII = "pii"
    RETAIN = "retain"
    USER_REF = "user_ref"


@dataclass(frozen=True)
class Organization:
    org_id: str
    display_name: str
    org_kind: OrgKind


@dataclass(frozen=True)
class UserCredential:
    user_id: str
    org_id: str
    roles: frozenset[str]
    enrollment_secret: bytes


@dataclass(frozen=True)
class AuthToken:
    token_id: str
    user_id: str
    org_id: str
    roles: frozenset[str]
    issued_at: float
    expires_at: float
    signature: bytes

    def claim_bytes(self) -> bytes:
        return canonical_join([
            self.token_id, self.user_id, self.org_id,
            ",".join(sorted(self.roles)), self.issued_at, self.expires_at,
        ])


class IdentityService:
    """Registry of orgs and users; token issuer; PII scrubber."""

    def __init__(self, deployment_secret: bytes | None = None,
                 clock: Callable[[], float] = time.time,
                 audit: Callable[[str, dict], None] | None = None):
        self._secret = deployment_secret or secrets.token_bytes(32)
        self.clock = clock
        self._audit = audit
        self._orgs: dict[str, Organization] = {}
        self._org_keys: dict[str, bytes] = {}
        self._users: dict[str, UserCredential] = {}
        self._schemas: dict[str, dict[str, FieldClass]] = {}
        self._corr_to_user: dict[str, str] = {}
        self._lock = threading.Lock()

    # -- orgs -----------------------------------------------------------------

    def register_org(self, org_id: str, display_name: str, org_kind: OrgKind) -> Organization:
        with self._lock:
            if org_id in self._orgs:
                raise ValueError(f"org {org_id} already registered")
            org = Organization(org_id, display_name, org_kind)
            self._orgs[org_id] = org
            self._org_keys[org_id] = mac(self._secret, b"org:" + org_id.encode())
        return org

    def org(self, org_id: str) -> Organization:
        try:
            return self._orgs[org_id]
        except KeyError:
            raise UnknownOrg(org_id) from None

    def orgs(self) -> list[Organization]:
        return sorted(self._orgs.values(), key=lambda o: o.org_id)

    def org_mac_key(self, org_id: str) -> bytes:
        self.org(org_id)
        return self._org_keys[org_id]

    # -- users ----------------------------------------------------------------

    def enroll_user(self, org_id: str, user_id: str, roles) -> UserCredential:
        roles = frozenset(roles)
        if not roles:
            raise ValueError("roles must be non-empty")
        unknown = roles - ROLES
        if unknown:
            raise ValueError(f"unknown roles: {sorted(unknown)}")
        with self._lock:
            if org_id not in self._orgs:
                raise UnknownOrg(org_id)
            if user_id in self._users:
                raise DuplicateUser(user_id)
            credential = UserCredential(user_id, org_id, roles, secrets.token_bytes(16))
            self._users[user_id] = credential
            self._corr_to_user[self.correlation_id(user_id)] = user_id
        if self._audit is not None:
            self._audit("enroll", {"user_id": user_id, "org_id": org_id,
                                   "roles": sorted(roles)})
        return credential

    def credential(self, user_id: str) -> UserCredential:
        try:
            return self._users[user_id]
        except KeyError:
            raise UnknownUser(user_id) from None

    def users(self) -> list[UserCredential]:
        return sorted(self._users.values(), key=lambda u: u.user_id)

    def authenticate(self, user_id: str, enrollment_secret: bytes) -> UserCredential:
        credential = self.credential(user_id)
        if not macs_equal(credential.enrollment_secret, enrollment_secret):
            raise BadSignature("enrollment secret mismatch")
        return credential

    def restore_user(self, credential: UserCredential) -> None:
        """Re-install a persisted credential without re-running enrollment."""
        with self._lock:
            self._users[credential.user_id] = credential
            self._corr_to_user[self.correlation_id(credential.user_id)] = \
                credential.user_id

    # -- tokens ---------------------------------------------------------------

    def issue_token(self, credential: UserCredential,
                    ttl_seconds: float = DEFAULT_TOKEN_TTL_S) -> AuthToken:
        now = self.clock()
        token = AuthToken(
            token_id=secrets.token_hex(8),
            user_id=credential.user_id,
            org_id=credential.org_id,
            roles=credential.roles,
            issued_at=now,
            expires_at=now + ttl_seconds,
            signature=b"",
        )
        signature = mac(self._secret, token.claim_bytes())
        return AuthToken(token.token_id, token.user_id, token.org_id, token.roles,
                         token.issued_at, token.expires_at, signature)

    def verify_token(self, token: AuthToken, now: float | None = None) -> AuthToken:
        """Return the token's claims if the signature holds and it has not
        expired; raises BadSignature / ExpiredToken otherwise."""
        if not macs_equal(token.signature, mac(self._secret, token.claim_bytes())):
            raise BadSignature("token signature mismatch")
        now = self.clock() if now is None else now
        if now > token.expires_at:
            raise ExpiredToken(f"token expired at {token.expires_at}")
        return token

    # -- correlation and PII --------------------------------------------------

    def correlation_id(self, user_id: str) -> str:
        return sha256_hex(mac(self._secret, b"corr:" + user_id.encode()))[:32]

    def resolve_correlation(self, correlation_id: str, admin_token: AuthToken) -> str:
        token = self.verify_token(admin_token)
        if "admin" not in token.roles:
            raise Unauthorized("correlation lookup requires the admin role")
        try:
            return self._corr_to_user[correlation_id]
        except KeyError:
            raise UnknownUser(correlation_id) from None

    def register_schema(self, name: str, fields: dict[str, FieldClass]) -> None:
        self._schemas[name] = {k: FieldClass(v) for k, v in fields.items()}

    def strip_pii(self, record: dict, schema: str) -> tuple[dict, Optional[str]]:
        """Drop PII fields and swap user references for correlation ids.

        Fields absent from the schema are treated as PII (dropped).  Values
        that already are correlation ids pass through unchanged, which makes
        the operation idempotent.  Returns the de-identified record and the
        correlation id of the first user reference, if any.
        """
        try:
            spec = self._schemas[schema]
        except KeyError:
            raise UnknownSchema(schema) from None
        out: dict = {}
        primary_corr: Optional[str] = None
        for field_name, value in record.items():
            klass = spec.get(field_name, FieldClass.PII)
            if klass is FieldClass.PII:
                continue
            if klass is FieldClass.USER_REF:
                if value in self._corr_to_user:
                    corr = str(value)
                else:
                    corr = self.correlation_id(str(value))
                    with self._lock:
                        self._corr_to_user[corr] = str(value)
                out[field_name] = corr
                if primary_corr is None:
                    primary_corr = corr
            else:
                out[field_name] = value
        return out, primary_corr

    def pii_fields(self, schema: str) -> set[str]:
        try:
            spec = self._schemas[schema]
        except KeyError:
            raise UnknownSchema(schema) from None
        return {k for k, v in spec.items() if v is FieldClass.PII}


# -- token wire format --------------------------------------------------------


def token_to_string(token: AuthToken) -> str:
    """Compact bearer form: base64url claims, dot, hex signature."""
    import base64
    import json
    claims = json.dumps({
        "token_id": token.token_id, "user_id": token.user_id,
        "org_id": token.org_id, "roles": sorted(token.roles),
        "issued_at": token.issued_at, "expires_at": token.expires_at,
    }, sort_keys=True, separators=(",", ":"))
    body = base64.urlsafe_b64encode(claims.encode()).decode().rstrip("=")
    return f"{body}.{token.signature.hex()}"


def token_from_string(raw: str) -> AuthToken:
    import base64
    import json
    try:
        body, sig = raw.rsplit(".", 1)
        padded = body + "=" * (-len(body) % 4)
        claims = json.loads(base64.urlsafe_b64decode(padded))
        return AuthToken(claims["token_id"], claims["user_id"], claims["org_id"],
                         frozenset(claims["roles"]), float(claims["issued_at"]),
                         float(claims["expires_at"]), bytes.fromhex(sig))
    except (ValueError, KeyError, TypeError):
        raise BadSignature("malformed bearer token") from None
