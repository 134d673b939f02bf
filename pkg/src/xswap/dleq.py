"""Cross-group proof that a secp key and an ed key share one discrete log.

Statement: given S_btc on secp and S_xmr on ed25519, the prover knows a
single s < 2**252 with S_btc = s*G and S_xmr = s*H.

Construction: commit to each of the 252 bits of s in both groups at once
(Pedersen commitments C_i = b_i*G + r_i*G' and D_i = b_i*H + t_i*H' sharing
the bit value), prove for every i that "the committed bit is 0 in both
groups, or 1 in both groups" with a two-branch sigma OR-proof, and tie the
weighted commitment sums to the public keys by proving knowledge of the
aggregate blinders rho_q, rho_p with

    sum(2**i * C_i) - S_btc = rho_q * G'
    sum(2**i * D_i) - S_xmr = rho_p * H'.

All sub-proofs share one 252-bit Fiat-Shamir challenge ``e``: each OR-proof
stores its branch-0 challenge share and the verifier derives the branch-1
share as ``e XOR share``. The proof stores challenge and responses only;
announcements are recomputed during verification and folded back into the
transcript, so any mutation shows up as a challenge mismatch.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .groups import (
    CROSS_SCALAR_BITS,
    CROSS_SCALAR_BOUND,
    BASE_P,
    BASE_Q,
    CrossScalar,
    DecodingError,
    ED_ORDER,
    PointP,
    PointQ,
    SECP_ORDER,
    ScalarP,
    ScalarQ,
    aux_generators,
    fixed_mul_p,
    fixed_mul_q,
    sum_weighted_pow2_p,
    sum_weighted_pow2_q,
)
from .transcript import Transcript

PROTOCOL_LABEL = b"xswap/cross-group-dleq/v1"

_N = CROSS_SCALAR_BITS
_SHARE_MASK = CROSS_SCALAR_BOUND - 1

#: Serialized proof size in bytes: per bit one secp point (33), one ed point
#: (32), one challenge share (32) and four response scalars (32 each), plus
#: two aggregate responses and the global challenge.
PROOF_SIZE = _N * (33 + 32 + 32 + 4 * 32) + 3 * 32


class MalformedProofError(ValueError):
    """Proof object or encoding is structurally invalid (not merely false)."""


@dataclass(frozen=True)
class CrossGroupDleqProof:
    bit_commits_q: tuple  # 252 PointQ
    bit_commits_p: tuple  # 252 PointP
    challenge_shares: tuple  # 252 ints < 2**252 (branch-0 share per bit)
    resp_q0: tuple  # 252 ScalarQ
    resp_q1: tuple  # 252 ScalarQ
    resp_p0: tuple  # 252 ScalarP
    resp_p1: tuple  # 252 ScalarP
    agg_resp_q: ScalarQ
    agg_resp_p: ScalarP
    challenge: int  # 252-bit Fiat-Shamir challenge


def _challenge_transcript(s_btc, s_xmr, cq, cp, announcements, agg_q, agg_p) -> int:
    tr = Transcript(PROTOCOL_LABEL)
    tr.append(b"key/secp", s_btc.encode())
    tr.append(b"key/ed", s_xmr.encode())
    for i in range(_N):
        tr.append(b"bit-commit/secp", cq[i].encode())
        tr.append(b"bit-commit/ed", cp[i].encode())
    for ann in announcements:
        tq0, tq1, tp0, tp1 = ann
        tr.append(b"announce/secp0", tq0.encode())
        tr.append(b"announce/secp1", tq1.encode())
        tr.append(b"announce/ed0", tp0.encode())
        tr.append(b"announce/ed1", tp1.encode())
    tr.append(b"agg-announce/secp", agg_q.encode())
    tr.append(b"agg-announce/ed", agg_p.encode())
    return tr.challenge_int(b"e", CROSS_SCALAR_BITS)


def dleq_prove(s: CrossScalar, rng: random.Random):
    """Prove knowledge of the shared discrete log of (s*G, s*H).

    Returns (S_btc, S_xmr, proof).
    """
    if not isinstance(s, CrossScalar):
        raise TypeError("dleq_prove needs a CrossScalar secret")
    gq, hp = aux_generators()
    bits = s.bits()

    blind_q = [rng.getrandbits(256) % SECP_ORDER for _ in range(_N)]
    blind_p = [rng.getrandbits(256) % ED_ORDER for _ in range(_N)]

    commits_q = []
    commits_p = []
    for i, b in enumerate(bits):
        cq = fixed_mul_q(gq, blind_q[i])
        dp = fixed_mul_p(hp, blind_p[i])
        if b:
            cq = cq + BASE_Q
            dp = dp + BASE_P
        commits_q.append(cq)
        commits_p.append(dp)

    s_btc = fixed_mul_q(BASE_Q, s.v)
    s_xmr = fixed_mul_p(BASE_P, s.v)

    # Per-bit OR proofs: run the real branch honestly, simulate the other.
    nonces_q = []
    nonces_p = []
    sim_shares = []
    sim_resp_q = []
    sim_resp_p = []
    announcements = []
    for i, b in enumerate(bits):
        j = rng.getrandbits(256) % SECP_ORDER
        k = rng.getrandbits(256) % ED_ORDER
        t_real_q = fixed_mul_q(gq, j)
        t_real_p = fixed_mul_p(hp, k)
        e_sim = rng.getrandbits(CROSS_SCALAR_BITS)
        a_sim = rng.getrandbits(256) % SECP_ORDER
        c_sim = rng.getrandbits(256) % ED_ORDER
        beta = 1 - b  # the branch being simulated
        stmt_q = commits_q[i] - BASE_Q if beta else commits_q[i]
        stmt_p = commits_p[i] - BASE_P if beta else commits_p[i]
        t_sim_q = fixed_mul_q(gq, a_sim) - stmt_q * e_sim
        t_sim_p = fixed_mul_p(hp, c_sim) - stmt_p * e_sim
        if b == 0:
            announcements.append((t_real_q, t_sim_q, t_real_p, t_sim_p))
        else:
            announcements.append((t_sim_q, t_real_q, t_sim_p, t_real_p))
        nonces_q.append(j)
        nonces_p.append(k)
        sim_shares.append(e_sim)
        sim_resp_q.append(a_sim)
        sim_resp_p.append(c_sim)

    # Aggregate blinder openings
    rho_q = sum(blind_q[i] << i for i in range(_N)) % SECP_ORDER
    rho_p = sum(blind_p[i] << i for i in range(_N)) % ED_ORDER
    u_q = rng.getrandbits(256) % SECP_ORDER
    u_p = rng.getrandbits(256) % ED_ORDER
    agg_ann_q = fixed_mul_q(gq, u_q)
    agg_ann_p = fixed_mul_p(hp, u_p)

    e = _challenge_transcript(
        s_btc, s_xmr, commits_q, commits_p, announcements, agg_ann_q, agg_ann_p
    )

    shares = []
    rq0 = []
    rq1 = []
    rp0 = []
    rp1 = []
    for i, b in enumerate(bits):
        e_real = e ^ sim_shares[i]
        a_real = (nonces_q[i] + e_real * blind_q[i]) % SECP_ORDER
        c_real = (nonces_p[i] + e_real * blind_p[i]) % ED_ORDER
        if b == 0:
            shares.append(e_real)
            rq0.append(ScalarQ(a_real))
            rq1.append(ScalarQ(sim_resp_q[i]))
            rp0.append(ScalarP(c_real))
            rp1.append(ScalarP(sim_resp_p[i]))
        else:
            shares.append(sim_shares[i])
            rq0.append(ScalarQ(sim_resp_q[i]))
            rq1.append(ScalarQ(a_real))
            rp0.append(ScalarP(sim_resp_p[i]))
            rp1.append(ScalarP(c_real))

    proof = CrossGroupDleqProof(
        bit_commits_q=tuple(commits_q),
        bit_commits_p=tuple(commits_p),
        challenge_shares=tuple(shares),
        resp_q0=tuple(rq0),
        resp_q1=tuple(rq1),
        resp_p0=tuple(rp0),
        resp_p1=tuple(rp1),
        agg_resp_q=ScalarQ((u_q + e * rho_q) % SECP_ORDER),
        agg_resp_p=ScalarP((u_p + e * rho_p) % ED_ORDER),
        challenge=e,
    )
    return s_btc, s_xmr, proof


def _check_structure(proof: CrossGroupDleqProof) -> None:
    fields = (
        (proof.bit_commits_q, PointQ),
        (proof.bit_commits_p, PointP),
        (proof.resp_q0, ScalarQ),
        (proof.resp_q1, ScalarQ),
        (proof.resp_p0, ScalarP),
        (proof.resp_p1, ScalarP),
    )
    for seq, typ in fields:
        if len(seq) != _N or not all(isinstance(x, typ) for x in seq):
            raise MalformedProofError(f"proof needs {_N} entries of {typ.__name__}")
    if len(proof.challenge_shares) != _N or not all(
        isinstance(x, int) and 0 <= x < CROSS_SCALAR_BOUND
        for x in proof.challenge_shares
    ):
        raise MalformedProofError("challenge shares must be 252-bit integers")
    if not isinstance(proof.challenge, int) or not 0 <= proof.challenge < CROSS_SCALAR_BOUND:
        raise MalformedProofError("challenge must be a 252-bit integer")
    if not isinstance(proof.agg_resp_q, ScalarQ) or not isinstance(proof.agg_resp_p, ScalarP):
        raise MalformedProofError("aggregate responses have the wrong type")


def dleq_verify(s_btc: PointQ, s_xmr: PointP, proof: CrossGroupDleqProof) -> bool:
    """True iff the proof demonstrates a shared discrete log for the keys.

    Structurally broken proofs raise MalformedProofError; proofs that are
    well formed but wrong simply return False.
    """
    if not isinstance(s_btc, PointQ) or not isinstance(s_xmr, PointP):
        raise MalformedProofError("public keys have the wrong type")
    _check_structure(proof)
    gq, hp = aux_generators()
    e = proof.challenge

    announcements = []
    for i in range(_N):
        cq = proof.bit_commits_q[i]
        dp = proof.bit_commits_p[i]
        e0 = proof.challenge_shares[i]
        e1 = e ^ e0
        tq0 = fixed_mul_q(gq, proof.resp_q0[i]) - cq * e0
        tq1 = fixed_mul_q(gq, proof.resp_q1[i]) - (cq - BASE_Q) * e1
        tp0 = fixed_mul_p(hp, proof.resp_p0[i]) - dp * e0
        tp1 = fixed_mul_p(hp, proof.resp_p1[i]) - (dp - BASE_P) * e1
        announcements.append((tq0, tq1, tp0, tp1))

    agg_q = sum_weighted_pow2_q(proof.bit_commits_q) - s_btc
    agg_p = sum_weighted_pow2_p(proof.bit_commits_p) - s_xmr
    agg_ann_q = fixed_mul_q(gq, proof.agg_resp_q) - agg_q * e
    agg_ann_p = fixed_mul_p(hp, proof.agg_resp_p) - agg_p * e

    expected = _challenge_transcript(
        s_btc,
        s_xmr,
        proof.bit_commits_q,
        proof.bit_commits_p,
        announcements,
        agg_ann_q,
        agg_ann_p,
    )
    return expected == e


# ---------------------------------------------------------------------------
# Serialization (fixed layout, see README for the byte map)
# ---------------------------------------------------------------------------


def _encode_share(v: int) -> bytes:
    return v.to_bytes(32, "little")


def _decode_share(data: bytes) -> int:
    v = int.from_bytes(data, "little")
    if v >= CROSS_SCALAR_BOUND:
        raise DecodingError("challenge share not canonical (>= 2**252)")
    return v


def proof_encode(proof: CrossGroupDleqProof) -> bytes:
    _check_structure(proof)
    parts = []
    parts += [pt.encode() for pt in proof.bit_commits_q]
    parts += [pt.encode() for pt in proof.bit_commits_p]
    parts += [_encode_share(x) for x in proof.challenge_shares]
    parts += [x.encode() for x in proof.resp_q0]
    parts += [x.encode() for x in proof.resp_q1]
    parts += [x.encode() for x in proof.resp_p0]
    parts += [x.encode() for x in proof.resp_p1]
    parts.append(proof.agg_resp_q.encode())
    parts.append(proof.agg_resp_p.encode())
    parts.append(_encode_share(proof.challenge))
    out = b"".join(parts)
    assert len(out) == PROOF_SIZE
    return out


def proof_decode(data: bytes) -> CrossGroupDleqProof:
    if not isinstance(data, (bytes, bytearray)):
        raise DecodingError("proof encoding must be bytes")
    data = bytes(data)
    if len(data) != PROOF_SIZE:
        raise DecodingError(
            f"proof encoding must be exactly {PROOF_SIZE} bytes, got {len(data)}"
        )
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        chunk = data[off : off + n]
        off += n
        return chunk

    commits_q = tuple(PointQ.decode(take(33)) for _ in range(_N))
    commits_p = tuple(PointP.decode(take(32)) for _ in range(_N))
    shares = tuple(_decode_share(take(32)) for _ in range(_N))
    rq0 = tuple(ScalarQ.decode(take(32)) for _ in range(_N))
    rq1 = tuple(ScalarQ.decode(take(32)) for _ in range(_N))
    rp0 = tuple(ScalarP.decode(take(32)) for _ in range(_N))
    rp1 = tuple(ScalarP.decode(take(32)) for _ in range(_N))
    agg_q = ScalarQ.decode(take(32))
    agg_p = ScalarP.decode(take(32))
    challenge = _decode_share(take(32))
    return CrossGroupDleqProof(
        bit_commits_q=commits_q,
        bit_commits_p=commits_p,
        challenge_shares=shares,
        resp_q0=rq0,
        resp_q1=rq1,
        resp_p0=rp0,
        resp_p1=rp1,
        agg_resp_q=agg_q,
        agg_resp_p=agg_p,
        challenge=challenge,
    )
