"""Plain and verifiably encrypted ("adaptor") signatures.

ECDSA lives on the secp group and signs the Bitcoin-style transactions;
Schnorr lives on the ed group and stands in for the Monero-side
pre-signatures. Both adaptor families share one API shape:

    enc_sign(x, Y, m)        pre-signature encrypted under point Y = y*G
    enc_verify(X, Y, m, e)   anyone can check the pre-signature commits to
                             a valid signature without learning it
    dec_sig(y, e)            holder of y completes the signature
    rec_key(sig, e[, Y])     signature + pre-signature leak y again

The ECDSA construction publishes R = k*G and R_hat = k*Y together with a
discrete-log-equality proof on the nonce, and uses R_hat's x-coordinate as
the r value; decryption divides the s value by y. The Schnorr construction
is additive: the challenge is computed over R + Y and decryption simply
adds y to the response, so recovery is exact (y = s - s_tilde) while ECDSA
recovery must try both signs of s because of low-s normalization.

Nonces are derived deterministically from (secret, message, domain tag) so
repeated runs produce identical transcripts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .groups import (
    BASE_P,
    BASE_Q,
    CROSS_SCALAR_BOUND,
    CrossScalar,
    DecodingError,
    ED_ORDER,
    PointP,
    PointQ,
    SECP_ORDER,
    ScalarP,
    ScalarQ,
    mul_base_p,
    mul_base_q,
)

_HALF_Q = SECP_ORDER // 2


class DecryptionError(ValueError):
    """The supplied decryption key does not match the pre-signature."""


class RecoveryError(ValueError):
    """The signature/pre-signature pair does not reveal the expected key."""


def _hash_to_int(tag: bytes, *chunks: bytes) -> int:
    h = hashlib.sha512(tag)
    for c in chunks:
        h.update(len(c).to_bytes(4, "little"))
        h.update(c)
    return int.from_bytes(h.digest(), "little")


def _message_digest_q(m: bytes) -> int:
    return int.from_bytes(hashlib.sha256(m).digest(), "big") % SECP_ORDER


def _nonce(tag: bytes, order: int, *chunks: bytes) -> int:
    counter = 0
    while True:
        k = _hash_to_int(tag + b"/" + counter.to_bytes(4, "little"), *chunks) % order
        if k != 0:
            return k
        counter += 1


# ---------------------------------------------------------------------------
# ECDSA (secp group)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EcdsaSignature:
    r: ScalarQ
    s: ScalarQ

    def encode(self) -> bytes:
        return self.r.encode() + self.s.encode()

    @classmethod
    def decode(cls, data: bytes) -> "EcdsaSignature":
        if len(data) != 64:
            raise DecodingError("ECDSA signature encoding must be 64 bytes")
        return cls(ScalarQ.decode(data[:32]), ScalarQ.decode(data[32:]))


@dataclass(frozen=True)
class NonceEqProof:
    """Chaum-Pedersen proof that R and R_hat share the nonce k over (G, Y)."""

    c: ScalarQ
    z: ScalarQ

    def encode(self) -> bytes:
        return self.c.encode() + self.z.encode()

    @classmethod
    def decode(cls, data: bytes) -> "NonceEqProof":
        if len(data) != 64:
            raise DecodingError("nonce-equality proof encoding must be 64 bytes")
        return cls(ScalarQ.decode(data[:32]), ScalarQ.decode(data[32:]))


@dataclass(frozen=True)
class EcdsaEncSig:
    R: PointQ  # k * G
    R_hat: PointQ  # k * Y; its x-coordinate is the signature's r value
    s_tilde: ScalarQ
    nonce_dleq: NonceEqProof

    def encode(self) -> bytes:
        return (
            self.R.encode()
            + self.R_hat.encode()
            + self.s_tilde.encode()
            + self.nonce_dleq.encode()
        )

    @classmethod
    def decode(cls, data: bytes) -> "EcdsaEncSig":
        if len(data) != 33 + 33 + 32 + 64:
            raise DecodingError("ECDSA pre-signature encoding must be 162 bytes")
        return cls(
            PointQ.decode(data[:33]),
            PointQ.decode(data[33:66]),
            ScalarQ.decode(data[66:98]),
            NonceEqProof.decode(data[98:]),
        )


def _nonce_eq_challenge(Y, X, R, R_hat, U1, U2, m: bytes) -> int:
    return _hash_to_int(
        b"xswap/ecdsa-nonce-dleq/v1",
        Y.encode(),
        X.encode(),
        R.encode(),
        R_hat.encode(),
        U1.encode(),
        U2.encode(),
        m,
    ) % SECP_ORDER


def _prove_nonce_eq(k: int, Y: PointQ, X: PointQ, R: PointQ, R_hat: PointQ, m: bytes) -> NonceEqProof:
    u = _nonce(b"xswap/ecdsa-nonce-dleq/nonce", SECP_ORDER, k.to_bytes(32, "little"), Y.encode(), m)
    U1 = mul_base_q(u)
    U2 = Y * u
    c = _nonce_eq_challenge(Y, X, R, R_hat, U1, U2, m)
    z = (u + c * k) % SECP_ORDER
    return NonceEqProof(ScalarQ(c), ScalarQ(z))


def _verify_nonce_eq(proof: NonceEqProof, Y: PointQ, X: PointQ, R: PointQ, R_hat: PointQ, m: bytes) -> bool:
    c = proof.c.v
    z = proof.z.v
    U1 = mul_base_q(z) - R * c
    U2 = Y * z - R_hat * c
    return _nonce_eq_challenge(Y, X, R, R_hat, U1, U2, m) == c


def ecdsa_sign(x: ScalarQ, m: bytes) -> EcdsaSignature:
    """Standard ECDSA with deterministic nonce and low-s output."""
    if not isinstance(x, ScalarQ) or x.v == 0:
        raise ValueError("signing key must be a nonzero ScalarQ")
    e = _message_digest_q(m)
    counter = 0
    while True:
        k = _nonce(
            b"xswap/ecdsa/nonce" + counter.to_bytes(4, "little"),
            SECP_ORDER,
            x.encode(),
            m,
        )
        R = mul_base_q(k)
        r = int(R.x) % SECP_ORDER
        if r == 0:
            counter += 1
            continue
        s = (pow(k, -1, SECP_ORDER) * (e + r * x.v)) % SECP_ORDER
        if s == 0:
            counter += 1
            continue
        if s > _HALF_Q:
            s = SECP_ORDER - s
        return EcdsaSignature(ScalarQ(r), ScalarQ(s))


def ecdsa_verify(X: PointQ, m: bytes, sig: EcdsaSignature) -> bool:
    if not isinstance(sig, EcdsaSignature) or not isinstance(X, PointQ):
        return False
    if X.is_identity():
        return False
    r, s = sig.r.v, sig.s.v
    if r == 0 or s == 0:
        return False
    e = _message_digest_q(m)
    w = pow(s, -1, SECP_ORDER)
    R = mul_base_q((e * w) % SECP_ORDER) + X * ((r * w) % SECP_ORDER)
    if R.is_identity():
        return False
    return int(R.x) % SECP_ORDER == r


def ecdsa_enc_sign(x: ScalarQ, Y: PointQ, m: bytes) -> EcdsaEncSig:
    """Pre-signature on m under signing key x, encrypted to the point Y."""
    if not isinstance(x, ScalarQ) or x.v == 0:
        raise ValueError("signing key must be a nonzero ScalarQ")
    if not isinstance(Y, PointQ) or Y.is_identity():
        raise ValueError("encryption key must not be the identity")
    e = _message_digest_q(m)
    X = mul_base_q(x)
    counter = 0
    while True:
        k = _nonce(
            b"xswap/ecdsa/enc-nonce" + counter.to_bytes(4, "little"),
            SECP_ORDER,
            x.encode(),
            Y.encode(),
            m,
        )
        R = mul_base_q(k)
        R_hat = Y * k
        if R_hat.is_identity():
            counter += 1
            continue
        r = int(R_hat.x) % SECP_ORDER
        if r == 0:
            counter += 1
            continue
        s_tilde = (pow(k, -1, SECP_ORDER) * (e + r * x.v)) % SECP_ORDER
        if s_tilde == 0:
            counter += 1
            continue
        proof = _prove_nonce_eq(k, Y, X, R, R_hat, m)
        return EcdsaEncSig(R, R_hat, ScalarQ(s_tilde), proof)


def ecdsa_enc_verify(X: PointQ, Y: PointQ, m: bytes, encsig: EcdsaEncSig) -> bool:
    """Check the pre-signature commits to a valid signature of m under X."""
    if not isinstance(encsig, EcdsaEncSig) or not isinstance(X, PointQ) or not isinstance(Y, PointQ):
        return False
    if X.is_identity() or Y.is_identity():
        return False
    if encsig.R.is_identity() or encsig.R_hat.is_identity():
        return False
    r = int(encsig.R_hat.x) % SECP_ORDER
    s_tilde = encsig.s_tilde.v
    if r == 0 or s_tilde == 0:
        return False
    if not _verify_nonce_eq(encsig.nonce_dleq, Y, X, encsig.R, encsig.R_hat, m):
        return False
    # s_tilde * k = e + r*x  <=>  s_tilde * R = e*G + r*X
    e = _message_digest_q(m)
    return encsig.R * s_tilde == mul_base_q(e) + X * r


def ecdsa_dec_sig(y: CrossScalar, encsig: EcdsaEncSig) -> EcdsaSignature:
    """Decrypt the pre-signature with y; fails if y*R != R_hat."""
    if not isinstance(y, CrossScalar):
        raise TypeError("decryption key must be a CrossScalar")
    if encsig.R * y.v != encsig.R_hat:
        raise DecryptionError("decryption key does not open this pre-signature")
    if y.v == 0:
        raise DecryptionError("decryption key must be nonzero")
    r = int(encsig.R_hat.x) % SECP_ORDER
    s = (encsig.s_tilde.v * pow(y.v, -1, SECP_ORDER)) % SECP_ORDER
    if s > _HALF_Q:
        s = SECP_ORDER - s
    return EcdsaSignature(ScalarQ(r), ScalarQ(s))


def ecdsa_rec_key(sig: EcdsaSignature, encsig: EcdsaEncSig, Y: PointQ) -> CrossScalar:
    """Recover the encryption secret from a completed signature.

    Low-s normalization may have flipped the sign of s, so both candidates
    y = s_tilde/s and -s_tilde/s are tested against Y.
    """
    if sig.s.v == 0:
        raise RecoveryError("degenerate signature")
    y = (encsig.s_tilde.v * pow(sig.s.v, -1, SECP_ORDER)) % SECP_ORDER
    for candidate in (y, SECP_ORDER - y):
        if mul_base_q(candidate) == Y:
            if candidate >= CROSS_SCALAR_BOUND:
                raise RecoveryError("recovered secret is not a cross-group scalar")
            return CrossScalar(candidate)
    raise RecoveryError("signature does not match this pre-signature")


# ---------------------------------------------------------------------------
# Schnorr (ed group)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchnorrSignature:
    R: PointP
    s: ScalarP

    def encode(self) -> bytes:
        return self.R.encode() + self.s.encode()

    @classmethod
    def decode(cls, data: bytes) -> "SchnorrSignature":
        if len(data) != 64:
            raise DecodingError("Schnorr signature encoding must be 64 bytes")
        return cls(PointP.decode(data[:32]), ScalarP.decode(data[32:]))


@dataclass(frozen=True)
class SchnorrEncSig:
    R: PointP  # prover's nonce commitment k*H (encryption point not yet added)
    s_tilde: ScalarP
    encryption_key: PointP

    def encode(self) -> bytes:
        return self.R.encode() + self.s_tilde.encode() + self.encryption_key.encode()

    @classmethod
    def decode(cls, data: bytes) -> "SchnorrEncSig":
        if len(data) != 96:
            raise DecodingError("Schnorr pre-signature encoding must be 96 bytes")
        return cls(
            PointP.decode(data[:32]),
            ScalarP.decode(data[32:64]),
            PointP.decode(data[64:]),
        )


def _schnorr_challenge(R: PointP, X: PointP, m: bytes) -> int:
    return _hash_to_int(b"xswap/schnorr/challenge", R.encode(), X.encode(), m) % ED_ORDER


def schnorr_sign(x: ScalarP, m: bytes) -> SchnorrSignature:
    if not isinstance(x, ScalarP) or x.v == 0:
        raise ValueError("signing key must be a nonzero ScalarP")
    X = mul_base_p(x)
    k = _nonce(b"xswap/schnorr/nonce", ED_ORDER, x.encode(), m)
    R = mul_base_p(k)
    c = _schnorr_challenge(R, X, m)
    s = (k + c * x.v) % ED_ORDER
    return SchnorrSignature(R, ScalarP(s))


def schnorr_verify(X: PointP, m: bytes, sig: SchnorrSignature) -> bool:
    if not isinstance(sig, SchnorrSignature) or not isinstance(X, PointP):
        return False
    if X.is_identity():
        return False
    c = _schnorr_challenge(sig.R, X, m)
    return mul_base_p(sig.s) == sig.R + X * c


def schnorr_enc_sign(x: ScalarP, Y: PointP, m: bytes) -> SchnorrEncSig:
    """Pre-signature whose challenge already commits to the full nonce R + Y."""
    if not isinstance(x, ScalarP) or x.v == 0:
        raise ValueError("signing key must be a nonzero ScalarP")
    if not isinstance(Y, PointP) or Y.is_identity():
        raise ValueError("encryption key must not be the identity")
    X = mul_base_p(x)
    counter = 0
    while True:
        k = _nonce(
            b"xswap/schnorr/enc-nonce" + counter.to_bytes(4, "little"),
            ED_ORDER,
            x.encode(),
            Y.encode(),
            m,
        )
        R = mul_base_p(k)
        if (R + Y).is_identity():
            counter += 1
            continue
        c = _schnorr_challenge(R + Y, X, m)
        s_tilde = (k + c * x.v) % ED_ORDER
        return SchnorrEncSig(R, ScalarP(s_tilde), Y)


def schnorr_enc_verify(X: PointP, Y: PointP, m: bytes, encsig: SchnorrEncSig) -> bool:
    if not isinstance(encsig, SchnorrEncSig) or not isinstance(X, PointP) or not isinstance(Y, PointP):
        return False
    if X.is_identity() or Y.is_identity():
        return False
    if encsig.encryption_key != Y:
        return False
    c = _schnorr_challenge(encsig.R + Y, X, m)
    return mul_base_p(encsig.s_tilde) == encsig.R + X * c


def schnorr_dec_sig(y: CrossScalar, encsig: SchnorrEncSig) -> SchnorrSignature:
    """Complete the signature: the decrypted response is s_tilde + y."""
    if not isinstance(y, CrossScalar):
        raise TypeError("decryption key must be a CrossScalar")
    if mul_base_p(y.v) != encsig.encryption_key:
        raise DecryptionError("decryption key does not open this pre-signature")
    s = (encsig.s_tilde.v + y.v) % ED_ORDER
    return SchnorrSignature(encsig.R + encsig.encryption_key, ScalarP(s))


def schnorr_rec_key(sig: SchnorrSignature, encsig: SchnorrEncSig) -> CrossScalar:
    """Exact recovery: y = s - s_tilde (no sign ambiguity)."""
    y = (sig.s.v - encsig.s_tilde.v) % ED_ORDER
    if y >= CROSS_SCALAR_BOUND or mul_base_p(y) != encsig.encryption_key:
        raise RecoveryError("signature does not match this pre-signature")
    return CrossScalar(y)
