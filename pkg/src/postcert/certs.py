"""Certificate, precertificate and postcertificate model with chain validation.

A precertificate is an ordinary certificate carrying the critical poison
extension; browsers must reject it, logs accept it. A postcertificate is a
copy of a target certificate carrying a critical revocation extension, and its
submission to a log constitutes a revocation request. Two signing schemes
exist: CA-issued (signed by the issuer, accepted by unmodified logs) and
self-signed (signed with the target certificate's own key, accepted only by
logs that validate the extended chain leading with the target certificate).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .crypto import KeyRegistry, Signature
from .encoding import (
    ByteReader,
    ByteWriter,
    decode_artifact,
    encode_artifact,
    register_artifact,
    text_block,
)

# Poison and embedded-SCT tags reuse the well-known CT arc; the revocation
# extension gets its own tag so an entry's kind is recoverable from bytes.
POISON_OID = "1.3.6.1.4.1.11129.2.4.3"
SCT_LIST_OID = "1.3.6.1.4.1.11129.2.4.2"
REVOCATION_OID = "1.3.6.1.4.1.53087.1.1"

_STRIPPED_OIDS = frozenset({POISON_OID, SCT_LIST_OID, REVOCATION_OID})

REASON_CODES = (
    "unspecified",
    "keyCompromise",
    "caCompromise",
    "affiliationChanged",
    "superseded",
    "cessationOfOperation",
)

REQUESTED_STATUS_REVOKED = "REVOKED"


class CertError(Exception):
    pass


class PostcertScheme(enum.Enum):
    CA_ISSUED = "CA_ISSUED"
    SELF_SIGNED = "SELF_SIGNED"


class ValidationContext(enum.Enum):
    BROWSER = "BROWSER"
    LOG_CA_ISSUED = "LOG_CA_ISSUED"
    LOG_SELF_SIGNED = "LOG_SELF_SIGNED"


# Reject reasons reported by validate_chain.
REJECT_CRITICAL_EXTENSION = "critical-extension"
REJECT_BAD_SIGNATURE = "bad-signature"
REJECT_UNTRUSTED_ROOT = "untrusted-root"
REJECT_MISSING_TARGET = "missing-target-in-chain"
REJECT_EMPTY_CHAIN = "empty-chain"


@dataclass(frozen=True)
class Extension:
    oid: str
    critical: bool
    value: bytes

    def __post_init__(self) -> None:
        if not self.oid:
            raise CertError("extension oid must be non-empty")


@dataclass(frozen=True)
class TbsCertificate:
    serial: int
    subject: str
    issuer: str
    not_before: int
    not_after: int
    public_key_id: str
    extensions: tuple[Extension, ...] = ()

    def __post_init__(self) -> None:
        if self.not_before >= self.not_after:
            raise CertError("not_before must precede not_after")
        if self.serial < 0:
            raise CertError("serial must be non-negative")


@dataclass(frozen=True)
class CertRef:
    """(issuer, serial) pair identifying one certificate."""

    issuer: str
    serial: int


@dataclass(frozen=True)
class RevocationExtension:
    reason_code: str = "unspecified"
    invalidation_date: int | None = None

    def __post_init__(self) -> None:
        if self.reason_code not in REASON_CODES:
            raise CertError(f"unknown reason code: {self.reason_code}")


@dataclass(frozen=True)
class Certificate:
    tbs: TbsCertificate
    signature: Signature

    @property
    def ref(self) -> CertRef:
        return CertRef(self.tbs.issuer, self.tbs.serial)


@dataclass(frozen=True)
class Postcertificate:
    tbs: TbsCertificate
    revocation_ext: RevocationExtension
    scheme: PostcertScheme
    signature: Signature
    status: str = REQUESTED_STATUS_REVOKED

    @property
    def target_ref(self) -> CertRef:
        return CertRef(self.tbs.issuer, self.tbs.serial)


# Canonical encodings ---------------------------------------------------------

def _enc_signature(w: ByteWriter, sig: Signature) -> None:
    w.text(sig.signer_id)
    w.blob(sig.value)


def _dec_signature(r: ByteReader) -> Signature:
    return Signature(signer_id=r.text(), value=r.blob())


def _enc_extension(w: ByteWriter, ext: Extension) -> None:
    w.text(ext.oid)
    w.boolean(ext.critical)
    w.blob(ext.value)


def _dec_extension(r: ByteReader) -> Extension:
    return Extension(oid=r.text(), critical=r.boolean(), value=r.blob())


def encode_tbs(tbs: TbsCertificate) -> bytes:
    w = ByteWriter()
    w.u64(tbs.serial)
    w.text(tbs.subject)
    w.text(tbs.issuer)
    w.i64(tbs.not_before)
    w.i64(tbs.not_after)
    w.text(tbs.public_key_id)
    w.u32(len(tbs.extensions))
    for ext in tbs.extensions:
        _enc_extension(w, ext)
    return w.getvalue()


def _dec_tbs(r: ByteReader) -> TbsCertificate:
    serial = r.u64()
    subject = r.text()
    issuer = r.text()
    not_before = r.i64()
    not_after = r.i64()
    public_key_id = r.text()
    extensions = tuple(_dec_extension(r) for _ in range(r.u32()))
    return TbsCertificate(
        serial=serial,
        subject=subject,
        issuer=issuer,
        not_before=not_before,
        not_after=not_after,
        public_key_id=public_key_id,
        extensions=extensions,
    )


def _enc_revocation_ext(w: ByteWriter, ext: RevocationExtension) -> None:
    w.text(ext.reason_code)
    w.optional_i64(ext.invalidation_date)


def _dec_revocation_ext(r: ByteReader) -> RevocationExtension:
    return RevocationExtension(reason_code=r.text(), invalidation_date=r.optional_i64())


def encode_revocation_ext(ext: RevocationExtension) -> bytes:
    w = ByteWriter()
    _enc_revocation_ext(w, ext)
    return w.getvalue()


def _enc_certificate(w: ByteWriter, cert: Certificate) -> None:
    w.blob(encode_tbs(cert.tbs))
    _enc_signature(w, cert.signature)


def _dec_certificate(r: ByteReader) -> Certificate:
    tbs_reader = ByteReader(r.blob())
    tbs = _dec_tbs(tbs_reader)
    tbs_reader.expect_eof()
    return Certificate(tbs=tbs, signature=_dec_signature(r))


def postcert_signing_payload(
    tbs: TbsCertificate,
    revocation_ext: RevocationExtension,
    scheme: PostcertScheme,
    status: str,
) -> bytes:
    w = ByteWriter()
    w.blob(encode_tbs(tbs))
    _enc_revocation_ext(w, revocation_ext)
    w.text(scheme.value)
    w.text(status)
    return w.getvalue()


def _enc_postcertificate(w: ByteWriter, post: Postcertificate) -> None:
    w.blob(encode_tbs(post.tbs))
    _enc_revocation_ext(w, post.revocation_ext)
    w.text(post.scheme.value)
    w.text(post.status)
    _enc_signature(w, post.signature)


def _dec_postcertificate(r: ByteReader) -> Postcertificate:
    tbs_reader = ByteReader(r.blob())
    tbs = _dec_tbs(tbs_reader)
    tbs_reader.expect_eof()
    revocation_ext = _dec_revocation_ext(r)
    scheme = PostcertScheme(r.text())
    status = r.text()
    return Postcertificate(
        tbs=tbs,
        revocation_ext=revocation_ext,
        scheme=scheme,
        signature=_dec_signature(r),
        status=status,
    )


register_artifact(1, Certificate, _enc_certificate, _dec_certificate)
register_artifact(2, Postcertificate, _enc_postcertificate, _dec_postcertificate)


def encode_payload(obj: Certificate | Postcertificate) -> bytes:
    """Log-entry payload bytes; the artifact tag keeps the kind recoverable."""
    return encode_artifact(obj)


def decode_payload(data: bytes) -> Certificate | Postcertificate:
    obj = decode_artifact(data)
    if not isinstance(obj, (Certificate, Postcertificate)):
        raise CertError("payload is neither certificate nor postcertificate")
    return obj


def certificate_to_text(cert: Certificate) -> str:
    fields = [
        ("serial", cert.tbs.serial),
        ("subject", cert.tbs.subject),
        ("issuer", cert.tbs.issuer),
        ("not_before", cert.tbs.not_before),
        ("not_after", cert.tbs.not_after),
        ("public_key_id", cert.tbs.public_key_id),
        ("extensions", ",".join(e.oid for e in cert.tbs.extensions) or "-"),
        ("signer", cert.signature.signer_id),
    ]
    return text_block("certificate", fields, encode_artifact(cert))


def postcertificate_to_text(post: Postcertificate) -> str:
    fields = [
        ("serial", post.tbs.serial),
        ("subject", post.tbs.subject),
        ("issuer", post.tbs.issuer),
        ("scheme", post.scheme.value),
        ("status", post.status),
        ("reason", post.revocation_ext.reason_code),
        ("invalidation_date", post.revocation_ext.invalidation_date),
        ("signer", post.signature.signer_id),
    ]
    return text_block("postcertificate", fields, encode_artifact(post))


# Construction ----------------------------------------------------------------

def sign_certificate(registry: KeyRegistry, issuer_key_id: str, tbs: TbsCertificate) -> Certificate:
    return Certificate(tbs=tbs, signature=registry.sign(issuer_key_id, encode_tbs(tbs)))


def make_precertificate(
    cert: Certificate,
    registry: KeyRegistry,
    issuer_key_id: str | None = None,
) -> Certificate:
    """Copy of ``cert`` with the critical poison extension added and re-signed.

    The result shares its TBS data with the original except for the poison
    extension, which renders it invalid in browser context.
    """
    key_id = issuer_key_id or cert.signature.signer_id
    poison = Extension(oid=POISON_OID, critical=True, value=b"")
    tbs = replace(cert.tbs, extensions=cert.tbs.extensions + (poison,))
    return sign_certificate(registry, key_id, tbs)


def make_postcertificate(
    cert: Certificate,
    scheme: PostcertScheme,
    registry: KeyRegistry,
    *,
    reason: str = "unspecified",
    invalidation_date: int | None = None,
    signing_key_id: str | None = None,
) -> Postcertificate:
    """Build a postcertificate for ``cert`` under the given scheme.

    CA_ISSUED must be signed with the issuer's key; SELF_SIGNED with the key
    named by the target certificate itself. The issuer field stays unchanged
    in both schemes.
    """
    if invalidation_date is not None and invalidation_date < cert.tbs.not_before:
        raise CertError("invalidation_date precedes certificate not_before")
    revocation_ext = RevocationExtension(reason_code=reason, invalidation_date=invalidation_date)
    if scheme is PostcertScheme.CA_ISSUED:
        key_id = signing_key_id or cert.signature.signer_id
        if key_id != cert.signature.signer_id:
            raise CertError("CA-issued postcertificate requires the issuer's key")
    else:
        key_id = signing_key_id or cert.tbs.public_key_id
        if key_id != cert.tbs.public_key_id:
            raise CertError("self-signed postcertificate requires the certificate's own key")
    ext_bytes = encode_revocation_ext(revocation_ext)
    tbs = replace(
        cert.tbs,
        extensions=_strip_extensions(cert.tbs.extensions)
        + (Extension(oid=REVOCATION_OID, critical=True, value=ext_bytes),),
    )
    payload = postcert_signing_payload(tbs, revocation_ext, scheme, REQUESTED_STATUS_REVOKED)
    return Postcertificate(
        tbs=tbs,
        revocation_ext=revocation_ext,
        scheme=scheme,
        signature=registry.sign(key_id, payload),
    )


def _strip_extensions(extensions: tuple[Extension, ...]) -> tuple[Extension, ...]:
    return tuple(e for e in extensions if e.oid not in _STRIPPED_OIDS)


def corresponds(a: Certificate | Postcertificate, b: Certificate | Postcertificate) -> bool:
    """True when both describe the same certificate body.

    Poison, revocation and embedded-SCT extensions are ignored, so a
    postcertificate (or precertificate) corresponds to its target.
    """
    ta = replace(a.tbs, extensions=_strip_extensions(a.tbs.extensions))
    tb = replace(b.tbs, extensions=_strip_extensions(b.tbs.extensions))
    return ta == tb


# Chain validation -------------------------------------------------------------

@dataclass(frozen=True)
class ChainVerdict:
    accepted: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.accepted


_ACCEPT = ChainVerdict(True)


def _reject(reason: str) -> ChainVerdict:
    return ChainVerdict(False, reason)


class TrustStore:
    """Set of trusted self-signed root certificates."""

    def __init__(self, roots: list[Certificate] | None = None) -> None:
        self._roots: set[bytes] = set()
        for root in roots or []:
            self.add(root)

    def add(self, root: Certificate) -> None:
        self._roots.add(encode_artifact(root))

    def contains(self, cert: Certificate) -> bool:
        return encode_artifact(cert) in self._roots


def _has_critical_unknown_extension(tbs: TbsCertificate) -> bool:
    return any(e.critical and e.oid in (POISON_OID, REVOCATION_OID) for e in tbs.extensions)


def _verify_cert_signature(cert: Certificate, issuer: Certificate, registry: KeyRegistry) -> bool:
    if cert.tbs.issuer != issuer.tbs.subject:
        return False
    if cert.signature.signer_id != issuer.tbs.public_key_id:
        return False
    return registry.verify(cert.signature, encode_tbs(cert.tbs))


def _validate_issuer_chain(
    chain: list[Certificate], registry: KeyRegistry, trust: TrustStore
) -> ChainVerdict:
    for child, parent in zip(chain, chain[1:]):
        if not _verify_cert_signature(child, parent, registry):
            return _reject(REJECT_BAD_SIGNATURE)
    root = chain[-1]
    if not _verify_cert_signature(root, root, registry):
        return _reject(REJECT_BAD_SIGNATURE)
    if not trust.contains(root):
        return _reject(REJECT_UNTRUSTED_ROOT)
    return _ACCEPT


def validate_chain(
    leaf: Certificate | Postcertificate,
    chain: list[Certificate],
    context: ValidationContext,
    registry: KeyRegistry,
    trust: TrustStore,
) -> ChainVerdict:
    """Validate a submission in one of the three contexts.

    BROWSER rejects anything carrying a critical poison or revocation
    extension. LOG_CA_ISSUED accepts exactly what a standard log accepts:
    the leaf signed by chain[0], chaining to a trusted root. LOG_SELF_SIGNED
    additionally requires chain[0] to be the target certificate and the leaf
    to be signed with that certificate's key.
    """
    if not chain:
        return _reject(REJECT_EMPTY_CHAIN)

    if context is ValidationContext.BROWSER:
        if isinstance(leaf, Postcertificate) or _has_critical_unknown_extension(leaf.tbs):
            return _reject(REJECT_CRITICAL_EXTENSION)
        if not _verify_cert_signature(leaf, chain[0], registry):
            return _reject(REJECT_BAD_SIGNATURE)
        return _validate_issuer_chain(chain, registry, trust)

    if context is ValidationContext.LOG_CA_ISSUED:
        if isinstance(leaf, Postcertificate):
            payload = postcert_signing_payload(
                leaf.tbs, leaf.revocation_ext, leaf.scheme, leaf.status
            )
            if leaf.signature.signer_id != chain[0].tbs.public_key_id:
                return _reject(REJECT_BAD_SIGNATURE)
            if leaf.tbs.issuer != chain[0].tbs.subject:
                return _reject(REJECT_BAD_SIGNATURE)
            if not registry.verify(leaf.signature, payload):
                return _reject(REJECT_BAD_SIGNATURE)
        else:
            if not _verify_cert_signature(leaf, chain[0], registry):
                return _reject(REJECT_BAD_SIGNATURE)
        return _validate_issuer_chain(chain, registry, trust)

    if context is ValidationContext.LOG_SELF_SIGNED:
        if not isinstance(leaf, Postcertificate):
            return _reject(REJECT_MISSING_TARGET)
        target = chain[0]
        if not corresponds(leaf, target):
            return _reject(REJECT_MISSING_TARGET)
        if leaf.signature.signer_id != target.tbs.public_key_id:
            return _reject(REJECT_BAD_SIGNATURE)
        payload = postcert_signing_payload(leaf.tbs, leaf.revocation_ext, leaf.scheme, leaf.status)
        if not registry.verify(leaf.signature, payload):
            return _reject(REJECT_BAD_SIGNATURE)
        if len(chain) < 2:
            return _reject(REJECT_UNTRUSTED_ROOT)
        if not _verify_cert_signature(target, chain[1], registry):
            return _reject(REJECT_BAD_SIGNATURE)
        return _validate_issuer_chain(chain[1:], registry, trust)

    raise ValueError(f"unknown context: {context}")
