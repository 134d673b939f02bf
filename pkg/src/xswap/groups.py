"""Arithmetic for the two elliptic-curve groups the swap protocols live on.

Two independent prime-order groups are exposed:

* the "secp" group: secp256k1, order ``SECP_ORDER`` (written ``q`` below),
  used for the Bitcoin-style chain and ECDSA;
* the "ed" group: the prime-order subgroup of ed25519, order ``ED_ORDER``
  (written ``p``), used for the Monero-style chain and Schnorr.

A ``CrossScalar`` is an integer below 2**252 and therefore a valid secret
exponent in *both* groups without reduction; this is what makes a
discrete-log relation between a secp point and an ed point well defined.

WARNING: this is simulation-grade code. It is not constant time, takes no
side-channel precautions whatsoever, and must never be used with real funds.
"""

from __future__ import annotations

import hashlib
import random

try:  # gmpy2 roughly halves field multiplication cost; plain ints work fine.
    from gmpy2 import mpz as _mpz
except ImportError:  # pragma: no cover - depends on environment
    _mpz = int

CROSS_SCALAR_BITS = 252
CROSS_SCALAR_BOUND = 1 << CROSS_SCALAR_BITS

# secp256k1 parameters
_QP = _mpz(2**256 - 2**32 - 977)  # field prime
SECP_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
_GX = _mpz(0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798)
_GY = _mpz(0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8)

# ed25519 parameters
_PP = _mpz(2**255 - 19)  # field prime
ED_ORDER = 2**252 + 27742317777372353535851937790883648493
_ED_D = _mpz((-121665 * pow(121666, -1, 2**255 - 19)) % (2**255 - 19))
_ED_BY = _mpz((4 * pow(5, -1, 2**255 - 19)) % (2**255 - 19))

AUX_TAG_SECP = b"xswap/aux-generator/secp/v1"
AUX_TAG_ED = b"xswap/aux-generator/ed25519/v1"


class DecodingError(ValueError):
    """Raised when a byte string is not a valid scalar or point encoding."""


# ---------------------------------------------------------------------------
# Scalars
# ---------------------------------------------------------------------------


class _Scalar:
    """Residue modulo the (prime) group order; subclasses fix the modulus."""

    ORDER = 0
    __slots__ = ("v",)

    def __init__(self, value):
        self.v = int(value) % self.ORDER

    @classmethod
    def random(cls, rng: random.Random) -> "_Scalar":
        return cls(rng.getrandbits(256))

    def __add__(self, other):
        return type(self)(self.v + _int_of(other))

    __radd__ = __add__

    def __sub__(self, other):
        return type(self)(self.v - _int_of(other))

    def __rsub__(self, other):
        return type(self)(_int_of(other) - self.v)

    def __mul__(self, other):
        if isinstance(other, (PointQ, PointP)):
            return other * self.v
        return type(self)(self.v * _int_of(other))

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(-self.v)

    def inverse(self) -> "_Scalar":
        if self.v == 0:
            raise ZeroDivisionError("scalar has no inverse")
        return type(self)(pow(self.v, -1, self.ORDER))

    def __eq__(self, other):
        return type(other) is type(self) and other.v == self.v

    def __hash__(self):
        return hash((type(self).__name__, self.v))

    def __int__(self):
        return self.v

    def __bool__(self):
        return self.v != 0

    def encode(self) -> bytes:
        return self.v.to_bytes(32, "little")

    @classmethod
    def decode(cls, data: bytes) -> "_Scalar":
        if len(data) != 32:
            raise DecodingError(f"scalar encoding must be 32 bytes, got {len(data)}")
        v = int.from_bytes(data, "little")
        if v >= cls.ORDER:
            raise DecodingError("scalar encoding not canonical (>= group order)")
        return cls(v)

    def __repr__(self):
        return f"{type(self).__name__}(0x{self.v:x})"


class ScalarQ(_Scalar):
    """Integer modulo the secp group order."""

    ORDER = SECP_ORDER
    __slots__ = ()


class ScalarP(_Scalar):
    """Integer modulo the ed group order."""

    ORDER = ED_ORDER
    __slots__ = ()


def _int_of(x) -> int:
    if isinstance(x, (_Scalar, CrossScalar)):
        return x.v
    if isinstance(x, int):
        return x
    raise TypeError(f"cannot use {type(x).__name__} as a scalar")


class CrossScalar:
    """Secret integer in [0, 2**252), usable as an exponent in both groups.

    252 bits is below both group orders, so the value embeds into either
    scalar field without wrapping; the same integer can therefore back a
    secp public key and an ed public key simultaneously.
    """

    __slots__ = ("v",)

    def __init__(self, value: int):
        value = int(value)
        if not 0 <= value < CROSS_SCALAR_BOUND:
            raise ValueError("cross scalar out of range [0, 2**252)")
        self.v = value

    def bits(self) -> list:
        return [(self.v >> i) & 1 for i in range(CROSS_SCALAR_BITS)]

    def to_scalar_q(self) -> ScalarQ:
        return ScalarQ(self.v)

    def to_scalar_p(self) -> ScalarP:
        return ScalarP(self.v)

    def encode(self) -> bytes:
        return self.v.to_bytes(32, "little")

    @classmethod
    def decode(cls, data: bytes) -> "CrossScalar":
        if len(data) != 32:
            raise DecodingError(f"cross scalar encoding must be 32 bytes, got {len(data)}")
        v = int.from_bytes(data, "little")
        if v >= CROSS_SCALAR_BOUND:
            raise DecodingError("cross scalar encoding not canonical (>= 2**252)")
        return cls(v)

    def __eq__(self, other):
        return isinstance(other, CrossScalar) and other.v == self.v

    def __hash__(self):
        return hash(("CrossScalar", self.v))

    def __int__(self):
        return self.v

    def __repr__(self):
        return f"CrossScalar(0x{self.v:x})"


def sample_cross_scalar(rng: random.Random) -> CrossScalar:
    """Draw a uniform cross-group scalar from a seeded RNG (deterministic)."""
    return CrossScalar(rng.getrandbits(CROSS_SCALAR_BITS))


# ---------------------------------------------------------------------------
# secp256k1 group: internal Jacobian arithmetic on (X, Y, Z) mpz tuples
# ---------------------------------------------------------------------------

_JQ_ID = (_mpz(0), _mpz(1), _mpz(0))


def _jq_dbl(pt):
    X1, Y1, Z1 = pt
    if not Z1 or not Y1:
        return _JQ_ID
    A = (X1 * X1) % _QP
    B = (Y1 * Y1) % _QP
    C = (B * B) % _QP
    t = X1 + B
    D = (2 * (t * t - A - C)) % _QP
    E = (3 * A) % _QP
    F = (E * E) % _QP
    X3 = (F - 2 * D) % _QP
    Y3 = (E * (D - X3) - 8 * C) % _QP
    Z3 = (2 * Y1 * Z1) % _QP
    return (X3, Y3, Z3)


def _jq_add(p1, p2):
    X1, Y1, Z1 = p1
    if not Z1:
        return p2
    X2, Y2, Z2 = p2
    if not Z2:
        return p1
    Z1Z1 = (Z1 * Z1) % _QP
    Z2Z2 = (Z2 * Z2) % _QP
    U1 = (X1 * Z2Z2) % _QP
    U2 = (X2 * Z1Z1) % _QP
    S1 = (Y1 * Z2 * Z2Z2) % _QP
    S2 = (Y2 * Z1 * Z1Z1) % _QP
    H = (U2 - U1) % _QP
    R = (S2 - S1) % _QP
    if not H:
        if R:
            return _JQ_ID
        return _jq_dbl(p1)
    HH = (H * H) % _QP
    HHH = (H * HH) % _QP
    V = (U1 * HH) % _QP
    X3 = (R * R - HHH - 2 * V) % _QP
    Y3 = (R * (V - X3) - S1 * HHH) % _QP
    Z3 = (Z1 * Z2 * H) % _QP
    return (X3, Y3, Z3)


def _jq_add_affine(p1, p2):
    # p2 is affine (Z == 1); saves the Z2 work of the general formula.
    X1, Y1, Z1 = p1
    if not Z1:
        return (p2[0], p2[1], _mpz(1))
    X2, Y2 = p2
    Z1Z1 = (Z1 * Z1) % _QP
    U2 = (X2 * Z1Z1) % _QP
    S2 = (Y2 * Z1 * Z1Z1) % _QP
    H = (U2 - X1) % _QP
    R = (S2 - Y1) % _QP
    if not H:
        if R:
            return _JQ_ID
        return _jq_dbl(p1)
    HH = (H * H) % _QP
    HHH = (H * HH) % _QP
    V = (X1 * HH) % _QP
    X3 = (R * R - HHH - 2 * V) % _QP
    Y3 = (R * (V - X3) - Y1 * HHH) % _QP
    Z3 = (Z1 * H) % _QP
    return (X3, Y3, Z3)


def _jq_neg(pt):
    return (pt[0], (-pt[1]) % _QP, pt[2])


def _jq_to_affine(pt):
    X, Y, Z = pt
    if not Z:
        return None
    zi = pow(Z, -1, _QP)
    zi2 = (zi * zi) % _QP
    return ((X * zi2) % _QP, (Y * zi2 * zi) % _QP)


def _wnaf(k: int, w: int = 5) -> list:
    digits = []
    while k:
        if k & 1:
            d = k & ((1 << w) - 1)
            if d >= (1 << (w - 1)):
                d -= 1 << w
            digits.append(d)
            k -= d
        else:
            digits.append(0)
        k >>= 1
    return digits


def _jq_mul(pt, k: int):
    # width-5 wNAF double-and-add; k must be non-negative
    if k == 0 or not pt[2]:
        return _JQ_ID
    digits = _wnaf(k)
    tab = [pt]
    dbl = _jq_dbl(pt)
    for _ in range(7):
        tab.append(_jq_add(tab[-1], dbl))
    acc = _JQ_ID
    for d in reversed(digits):
        acc = _jq_dbl(acc)
        if d > 0:
            acc = _jq_add(acc, tab[(d - 1) >> 1])
        elif d < 0:
            acc = _jq_add(acc, _jq_neg(tab[(-d - 1) >> 1]))
    return acc


# ---------------------------------------------------------------------------
# ed25519 group: internal extended coordinates (X, Y, Z, T)
# ---------------------------------------------------------------------------

_EP_ID = (_mpz(0), _mpz(1), _mpz(1), _mpz(0))


def _ep_add(p1, p2):
    X1, Y1, Z1, T1 = p1
    X2, Y2, Z2, T2 = p2
    A = ((Y1 - X1) * (Y2 - X2)) % _PP
    B = ((Y1 + X1) * (Y2 + X2)) % _PP
    C = (2 * T1 * T2 * _ED_D) % _PP
    Dv = (2 * Z1 * Z2) % _PP
    E = B - A
    F = Dv - C
    G = Dv + C
    H = B + A
    return ((E * F) % _PP, (G * H) % _PP, (F * G) % _PP, (E * H) % _PP)


def _ep_neg(pt):
    X, Y, Z, T = pt
    return ((-X) % _PP, Y, Z, (-T) % _PP)


def _ep_to_affine(pt):
    X, Y, Z, _ = pt
    zi = pow(Z, -1, _PP)
    return ((X * zi) % _PP, (Y * zi) % _PP)


def _ep_from_affine(x, y):
    x = _mpz(x)
    y = _mpz(y)
    return (x, y, _mpz(1), (x * y) % _PP)


def _ep_mul(pt, k: int):
    if k == 0:
        return _EP_ID
    digits = _wnaf(k)
    tab = [pt]
    dbl = _ep_add(pt, pt)
    for _ in range(7):
        tab.append(_ep_add(tab[-1], dbl))
    acc = _EP_ID
    for d in reversed(digits):
        acc = _ep_add(acc, acc)
        if d > 0:
            acc = _ep_add(acc, tab[(d - 1) >> 1])
        elif d < 0:
            acc = _ep_add(acc, _ep_neg(tab[(-d - 1) >> 1]))
    return acc


# ---------------------------------------------------------------------------
# Public point types
# ---------------------------------------------------------------------------


class PointQ:
    """Point on secp256k1 (affine, or the identity)."""

    __slots__ = ("x", "y")

    def __init__(self, x, y):
        # x is None for the identity element
        self.x = x
        self.y = y

    @classmethod
    def identity(cls) -> "PointQ":
        return cls(None, None)

    @classmethod
    def _from_jacobian(cls, pt) -> "PointQ":
        aff = _jq_to_affine(pt)
        if aff is None:
            return cls.identity()
        return cls(aff[0], aff[1])

    def _jacobian(self):
        if self.x is None:
            return _JQ_ID
        return (self.x, self.y, _mpz(1))

    def is_identity(self) -> bool:
        return self.x is None

    def is_on_curve(self) -> bool:
        if self.x is None:
            return True
        return (self.y * self.y - self.x * self.x * self.x - 7) % _QP == 0

    def __add__(self, other: "PointQ") -> "PointQ":
        if not isinstance(other, PointQ):
            return NotImplemented
        return PointQ._from_jacobian(_jq_add(self._jacobian(), other._jacobian()))

    def __neg__(self) -> "PointQ":
        if self.x is None:
            return self
        return PointQ(self.x, (-self.y) % _QP)

    def __sub__(self, other: "PointQ") -> "PointQ":
        return self + (-other)

    def __mul__(self, k) -> "PointQ":
        k = _int_of(k) % SECP_ORDER
        return PointQ._from_jacobian(_jq_mul(self._jacobian(), k))

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, PointQ) and other.x == self.x and other.y == self.y
        )

    def __hash__(self):
        return hash(("PointQ", None if self.x is None else int(self.x), None if self.y is None else int(self.y)))

    def encode(self) -> bytes:
        """SEC1 compressed encoding; the identity is 33 zero bytes."""
        if self.x is None:
            return b"\x00" * 33
        prefix = b"\x03" if int(self.y) & 1 else b"\x02"
        return prefix + int(self.x).to_bytes(32, "big")

    @classmethod
    def decode(cls, data: bytes) -> "PointQ":
        if len(data) != 33:
            raise DecodingError(f"secp point encoding must be 33 bytes, got {len(data)}")
        if data == b"\x00" * 33:
            return cls.identity()
        if data[0] not in (2, 3):
            raise DecodingError("bad secp point prefix")
        x = int.from_bytes(data[1:], "big")
        if x >= _QP:
            raise DecodingError("secp x coordinate out of field range")
        x = _mpz(x)
        yy = (x * x * x + 7) % _QP
        y = pow(yy, (_QP + 1) // 4, _QP)
        if (y * y) % _QP != yy:
            raise DecodingError("secp x coordinate is not on the curve")
        if (int(y) & 1) != (data[0] & 1):
            y = (-y) % _QP
        return cls(x, y)

    def __repr__(self):
        if self.x is None:
            return "PointQ(identity)"
        return f"PointQ(0x{int(self.x):x}, 0x{int(self.y):x})"


class PointP:
    """Point in the prime-order subgroup of ed25519 (affine)."""

    __slots__ = ("x", "y")

    def __init__(self, x, y):
        self.x = x
        self.y = y

    @classmethod
    def identity(cls) -> "PointP":
        return cls(_mpz(0), _mpz(1))

    @classmethod
    def _from_extended(cls, pt) -> "PointP":
        aff = _ep_to_affine(pt)
        return cls(aff[0], aff[1])

    def _extended(self):
        return _ep_from_affine(self.x, self.y)

    def is_identity(self) -> bool:
        return self.x == 0 and self.y == 1

    def is_on_curve(self) -> bool:
        x2 = (self.x * self.x) % _PP
        y2 = (self.y * self.y) % _PP
        return (y2 - x2 - 1 - _ED_D * x2 * y2) % _PP == 0

    def __add__(self, other: "PointP") -> "PointP":
        if not isinstance(other, PointP):
            return NotImplemented
        return PointP._from_extended(_ep_add(self._extended(), other._extended()))

    def __neg__(self) -> "PointP":
        return PointP((-self.x) % _PP, self.y)

    def __sub__(self, other: "PointP") -> "PointP":
        return self + (-other)

    def __mul__(self, k) -> "PointP":
        k = _int_of(k) % ED_ORDER
        return PointP._from_extended(_ep_mul(self._extended(), k))

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, PointP) and other.x == self.x and other.y == self.y
        )

    def __hash__(self):
        return hash(("PointP", int(self.x), int(self.y)))

    def encode(self) -> bytes:
        """Standard 32-byte encoding: little-endian y with the sign of x on top."""
        data = bytearray(int(self.y).to_bytes(32, "little"))
        if int(self.x) & 1:
            data[31] |= 0x80
        return bytes(data)

    @classmethod
    def decode(cls, data: bytes) -> "PointP":
        pt = cls._decode_any_subgroup(data)
        # reject points outside the prime-order subgroup (cofactor is 8, so
        # the scalar must not be reduced before multiplying)
        if not cls._from_extended(_ep_mul(pt._extended(), ED_ORDER)).is_identity():
            raise DecodingError("ed point not in the prime-order subgroup")
        return pt

    @classmethod
    def _decode_any_subgroup(cls, data: bytes) -> "PointP":
        if len(data) != 32:
            raise DecodingError(f"ed point encoding must be 32 bytes, got {len(data)}")
        sign = data[31] >> 7
        y = int.from_bytes(data[:31] + bytes([data[31] & 0x7F]), "little")
        if y >= _PP:
            raise DecodingError("ed y coordinate out of field range")
        y = _mpz(y)
        y2 = (y * y) % _PP
        u = (y2 - 1) % _PP
        v = (_ED_D * y2 + 1) % _PP
        xx = (u * pow(v, -1, _PP)) % _PP
        x = pow(xx, (_PP + 3) // 8, _PP)
        if (x * x - xx) % _PP != 0:
            x = (x * pow(_mpz(2), (_PP - 1) // 4, _PP)) % _PP
        if (x * x - xx) % _PP != 0:
            raise DecodingError("ed y coordinate is not on the curve")
        if x == 0 and sign:
            raise DecodingError("non-canonical ed point encoding")
        if (int(x) & 1) != sign:
            x = (-x) % _PP
        return cls(x, y)

    def __repr__(self):
        return f"PointP(0x{int(self.x):x}, 0x{int(self.y):x})"


BASE_Q = PointQ(_GX, _GY)


def _ed_base() -> PointP:
    y = _ED_BY
    y2 = (y * y) % _PP
    xx = ((y2 - 1) * pow(_ED_D * y2 + 1, -1, _PP)) % _PP
    x = pow(xx, (_PP + 3) // 8, _PP)
    if (x * x - xx) % _PP != 0:
        x = (x * pow(_mpz(2), (_PP - 1) // 4, _PP)) % _PP
    if int(x) & 1:
        x = (-x) % _PP
    return PointP(x, y)


BASE_P = _ed_base()


# ---------------------------------------------------------------------------
# Fixed-base multiplication (4-bit comb, cached per base point)
# ---------------------------------------------------------------------------

_COMB_ROWS = (CROSS_SCALAR_BITS + 3) // 4 + 1  # enough for full-width scalars


class _CombQ:
    def __init__(self, base: PointQ):
        rows = []
        row = []
        acc = _JQ_ID
        base_j = base._jacobian()
        for _ in range(15):
            acc = _jq_add(acc, base_j)
            row.append(acc)
        rows.append(row)
        for _ in range(64):
            row = [_jq_dbl(_jq_dbl(_jq_dbl(_jq_dbl(pt)))) for pt in row]
            rows.append(row)
        # normalize to affine for cheaper additions
        self.rows = [[_jq_to_affine(pt) for pt in row] for row in rows]

    def mul(self, k: int):
        acc = _JQ_ID
        i = 0
        while k:
            d = k & 15
            if d:
                aff = self.rows[i][d - 1]
                if aff is not None:
                    acc = _jq_add_affine(acc, aff)
            k >>= 4
            i += 1
        return acc


class _CombP:
    def __init__(self, base: PointP):
        rows = []
        row = []
        acc = _EP_ID
        base_e = base._extended()
        for _ in range(15):
            acc = _ep_add(acc, base_e)
            row.append(acc)
        rows.append(row)
        for _ in range(64):
            new = []
            for pt in row:
                for _ in range(4):
                    pt = _ep_add(pt, pt)
                new.append(pt)
            rows.append(new)
            row = new
        self.rows = rows

    def mul(self, k: int):
        acc = _EP_ID
        i = 0
        while k:
            d = k & 15
            if d:
                acc = _ep_add(acc, self.rows[i][d - 1])
            k >>= 4
            i += 1
        return acc


_COMBS_Q: dict = {}
_COMBS_P: dict = {}


def fixed_mul_q(base: PointQ, k) -> PointQ:
    """base * k via a cached precomputed table; worthwhile for reused bases."""
    key = (int(base.x), int(base.y))
    comb = _COMBS_Q.get(key)
    if comb is None:
        comb = _COMBS_Q[key] = _CombQ(base)
    return PointQ._from_jacobian(comb.mul(_int_of(k) % SECP_ORDER))


def fixed_mul_p(base: PointP, k) -> PointP:
    key = (int(base.x), int(base.y))
    comb = _COMBS_P.get(key)
    if comb is None:
        comb = _COMBS_P[key] = _CombP(base)
    return PointP._from_extended(comb.mul(_int_of(k) % ED_ORDER))


def mul_base_q(s) -> PointQ:
    """s * G on the secp group (s may be ScalarQ, CrossScalar or int)."""
    return fixed_mul_q(BASE_Q, s)


def mul_base_p(s) -> PointP:
    """s * H on the ed group (s may be ScalarP, CrossScalar or int)."""
    return fixed_mul_p(BASE_P, s)


# ---------------------------------------------------------------------------
# Hash-to-group and the auxiliary (Pedersen) generators
# ---------------------------------------------------------------------------


def hash_to_point_q(tag: bytes) -> PointQ:
    """Derive a secp point with unknown discrete log from an ASCII tag."""
    counter = 0
    while True:
        digest = hashlib.sha256(tag + b"/" + counter.to_bytes(4, "little")).digest()
        try:
            pt = PointQ.decode(b"\x02" + digest)
        except DecodingError:
            counter += 1
            continue
        if not pt.is_identity():
            return pt
        counter += 1


def hash_to_point_p(tag: bytes) -> PointP:
    """Derive an ed subgroup point with unknown discrete log from a tag."""
    counter = 0
    while True:
        digest = hashlib.sha512(tag + b"/" + counter.to_bytes(4, "little")).digest()[:32]
        try:
            pt = PointP._decode_any_subgroup(digest)
        except DecodingError:
            counter += 1
            continue
        pt = pt * 8  # clear the cofactor so the result lands in the subgroup
        if not pt.is_identity():
            return pt
        counter += 1


def sum_weighted_pow2_q(points) -> PointQ:
    """Sum of 2**i * points[i], evaluated Horner-style in Jacobian form."""
    acc = _JQ_ID
    for pt in reversed(points):
        acc = _jq_add(_jq_dbl(acc), pt._jacobian())
    return PointQ._from_jacobian(acc)


def sum_weighted_pow2_p(points) -> PointP:
    """Sum of 2**i * points[i] on the ed group."""
    acc = _EP_ID
    for pt in reversed(points):
        acc = _ep_add(_ep_add(acc, acc), pt._extended())
    return PointP._from_extended(acc)


_AUX: tuple | None = None


def aux_generators() -> tuple:
    """The fixed Pedersen blinding generators (G' on secp, H' on ed).

    Derived by hashing fixed domain tags to each group, so nobody knows
    their discrete logs relative to the standard base points.
    """
    global _AUX
    if _AUX is None:
        _AUX = (hash_to_point_q(AUX_TAG_SECP), hash_to_point_p(AUX_TAG_ED))
    return _AUX
