"""XMR-to-BTC swap: the party holding monero moves first.

Designed for the maker who sells bitcoin: in the original direction the
bitcoin holder must lock first and can be bled for fees by takers who walk
away (a draining attack). Here Alice (holding monero) locks first.

Monero leg: XMR_l locks Alice's funds under two spend keys S_A, S_B (one
signature each). The refund XMR_c returns them to Alice, but Bob's
signature on it exists only as a Schnorr pre-signature encrypted under
Alice's refund point R_A: publishing XMR_c leaks r_A to Bob.

Bitcoin leg: BTC_l is a plain 2-of-2. BTC_c cancels it back to Bob after
t1. BTC_r stages Alice's redemption and can be spent two ways: by both
parties after t2 (BTC_t, to Alice), or at any time with r_A and Bob's key
(BTC_e, the emergency refund). Bob's signature on BTC_r is an ECDSA
pre-signature under S_A^btc, so publishing BTC_r leaks s_A to Bob, which
is exactly what lets him take the monero via XMR_r. If Alice tries to take
both (publishing BTC_r *and* XMR_c) the combined leaks of s_A and r_A let
Bob emergency-refund through BTC_e until t2.

Transactions are signed in reverse publication order: BTC_t first, then
BTC_c and the BTC_r pre-signature, then (and only then) the locks.

Fee schedule in this simulation: every transaction pays the fixed fee
except BTC_r, which rides free; this keeps the emergency-refund outcome
value-identical to the cooperative refund and the happy-path payout
symmetric with the BTC-first protocol (see README).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from . import adaptors
from .actions import BroadcastTx, Chains, Note, ProtocolAbort, SendMessage
from .adaptors import (
    EcdsaEncSig,
    EcdsaSignature,
    SchnorrEncSig,
    ecdsa_dec_sig,
    ecdsa_enc_sign,
    ecdsa_enc_verify,
    ecdsa_rec_key,
    ecdsa_sign,
    ecdsa_verify,
    schnorr_dec_sig,
    schnorr_enc_sign,
    schnorr_enc_verify,
    schnorr_rec_key,
    schnorr_sign,
)
from .chains import (
    SimOutput,
    SimTransaction,
    SpendClause,
    TxInput,
    confirmations,
    extract_witness,
    find_by_id,
)
from .dleq import CrossGroupDleqProof, dleq_prove, dleq_verify
from .groups import (
    CrossScalar,
    PointP,
    PointQ,
    ScalarP,
    ScalarQ,
    mul_base_p,
    mul_base_q,
    sample_cross_scalar,
)
from .swap_btc_xmr import SwapParams

TERMINAL_STATES_V2 = {
    "btc_taken",
    "xmr_redeemed",
    "xmr_refunded",
    "btc_cancelled",
    "emergency_refunded",
    "aborted",
}


# ---------------------------------------------------------------------------
# Key material and shared setup artifacts
# ---------------------------------------------------------------------------


@dataclass
class V2Keys:
    """One party's secrets plus the peer's public halves."""

    role: str  # "alice" or "bob"
    spend_secret: CrossScalar  # s_A or s_B: monero spend half, both-curve
    spend_xmr: PointP
    spend_btc: PointQ
    view_secret: ScalarP
    cosign_secret: ScalarQ  # sk_A / sk_B for the bitcoin 2-of-2
    cosign_public: PointQ
    refund_secret: Optional[CrossScalar] = None  # r_A; Alice only
    refund_pub_xmr: Optional[PointP] = None
    refund_pub_btc: Optional[PointQ] = None
    refund_proof: Optional[CrossGroupDleqProof] = None
    peer_spend_xmr: Optional[PointP] = None
    peer_spend_btc: Optional[PointQ] = None
    peer_view_secret: Optional[ScalarP] = None
    peer_cosign_public: Optional[PointQ] = None

    @property
    def shared_view_secret(self) -> ScalarP:
        return self.view_secret + self.peer_view_secret


def v2_keys(role: str, rng: random.Random) -> V2Keys:
    s = sample_cross_scalar(rng)
    v = ScalarP.random(rng)
    c = ScalarQ.random(rng)
    keys = V2Keys(
        role=role,
        spend_secret=s,
        spend_xmr=mul_base_p(s),
        spend_btc=mul_base_q(s),
        view_secret=v,
        cosign_secret=c,
        cosign_public=mul_base_q(c),
    )
    if role == "alice":
        r = sample_cross_scalar(rng)
        r_btc, r_xmr, proof = dleq_prove(r, rng)
        keys.refund_secret = r
        keys.refund_pub_btc = r_btc
        keys.refund_pub_xmr = r_xmr
        keys.refund_proof = proof
    return keys


@dataclass(frozen=True)
class XmrKeysMessage:
    kind: str  # "XmrKeys" (sent by both parties, role in `sender`)
    sender: str
    spend_xmr: PointP
    spend_btc: PointQ
    view_secret: ScalarP
    funding_txid: Optional[bytes] = None  # tid_A; Alice only
    refund_pub_xmr: Optional[PointP] = None  # R_A; Alice only
    refund_pub_btc: Optional[PointQ] = None
    refund_proof: Optional[CrossGroupDleqProof] = None

    def to_json(self) -> dict:
        from .dleq import proof_encode

        return {
            "kind": self.kind,
            "sender": self.sender,
            "spend_xmr": self.spend_xmr.encode().hex(),
            "spend_btc": self.spend_btc.encode().hex(),
            "view_secret": self.view_secret.encode().hex(),
            "funding_txid": self.funding_txid.hex() if self.funding_txid else None,
            "refund_pub_xmr": self.refund_pub_xmr.encode().hex() if self.refund_pub_xmr else None,
            "refund_pub_btc": self.refund_pub_btc.encode().hex() if self.refund_pub_btc else None,
            "refund_proof": proof_encode(self.refund_proof).hex() if self.refund_proof else None,
        }


@dataclass(frozen=True)
class XmrRefundEncSigMessage:
    encsig: SchnorrEncSig
    kind: str = "XmrRefundEncSig"

    def to_json(self) -> dict:
        return {"kind": self.kind, "encsig": self.encsig.encode().hex()}


@dataclass(frozen=True)
class BtcKeysMessage:
    kind: str  # "BtcKeys"
    sender: str
    cosign_public: PointQ
    funding_txid: Optional[bytes] = None  # tid_B; Bob only

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "sender": self.sender,
            "cosign_public": self.cosign_public.encode().hex(),
            "funding_txid": self.funding_txid.hex() if self.funding_txid else None,
        }


@dataclass(frozen=True)
class BtcTakeSigMessage:
    sig_take_b: EcdsaSignature
    kind: str = "BtcTakeSig"

    def to_json(self) -> dict:
        return {"kind": self.kind, "sig_take_b": self.sig_take_b.encode().hex()}


@dataclass(frozen=True)
class BtcCancelSigMessage:
    sig_cancel_a: EcdsaSignature
    kind: str = "BtcCancelSig"

    def to_json(self) -> dict:
        return {"kind": self.kind, "sig_cancel_a": self.sig_cancel_a.encode().hex()}


@dataclass(frozen=True)
class RedeemEncSigMessage:
    encsig_redeem: EcdsaEncSig
    kind: str = "RedeemEncSig"

    def to_json(self) -> dict:
        return {"kind": self.kind, "encsig_redeem": self.encsig_redeem.encode().hex()}


@dataclass
class XmrSide:
    """Monero-leg artifacts shared by both parties after Fig-5 steps 1-3."""

    spend_a_xmr: PointP
    spend_b_xmr: PointP
    refund_pub_xmr: PointP
    refund_pub_btc: PointQ
    funding_txid: bytes
    lock: SimTransaction  # XMR_l, unsigned until Alice publishes
    refund: SimTransaction  # XMR_c
    refund_encsig: SchnorrEncSig  # Bob's pre-signature on XMR_c under R_A


@dataclass
class BtcSide:
    """Bitcoin-leg artifacts after Fig-6 steps 1-5."""

    cosign_a: PointQ
    cosign_b: PointQ
    funding_txid: bytes
    lock: SimTransaction  # BTC_l
    cancel: SimTransaction  # BTC_c
    redeem: SimTransaction  # BTC_r (two spend clauses)
    take: SimTransaction  # BTC_t
    sig_cancel_a: Optional[EcdsaSignature] = None  # held by Bob
    sig_take_b: Optional[EcdsaSignature] = None  # held by Alice
    redeem_encsig: Optional[EcdsaEncSig] = None  # held by Alice


def build_xmr_transactions(
    params: SwapParams,
    spend_a: PointP,
    spend_b: PointP,
    shared_view_pub: PointP,
    refund_dest: PointP,
    funding_txid: bytes,
    funding_amount: int,
):
    """XMR_l and XMR_c, derivable identically by both parties."""
    if funding_amount < params.amt_xmr + params.fee:
        raise ValueError("monero funding does not cover amount plus fee")
    lock = SimTransaction(
        "xmr",
        TxInput(funding_txid, 0, 0),
        (
            SimOutput(
                params.amt_xmr,
                (SpendClause((spend_a, spend_b)),),
                view_key_pub=shared_view_pub,
            ),
        ),
        fee=funding_amount - params.amt_xmr,
    )
    refund = SimTransaction(
        "xmr",
        TxInput(lock.txid, 0, 0),
        (SimOutput(params.amt_xmr - params.fee, (SpendClause((refund_dest,)),)),),
        fee=params.fee,
    )
    return lock, refund


def build_btc_transactions(
    params: SwapParams,
    cosign_a: PointQ,
    cosign_b: PointQ,
    refund_pub_btc: PointQ,
    cancel_dest: PointQ,
    take_dest: PointQ,
    funding_txid: bytes,
    funding_amount: int,
):
    """BTC_l, BTC_c, BTC_r and BTC_t (BTC_e is built by Bob on demand)."""
    amt, fee = params.amt_btc, params.fee
    if amt - fee <= 0:
        raise ValueError("fee too large for the bitcoin amount")
    if funding_amount < amt + fee:
        raise ValueError("bitcoin funding does not cover amount plus fee")
    both = SpendClause((cosign_a, cosign_b))
    lock = SimTransaction(
        "btc",
        TxInput(funding_txid, 0, 0),
        (SimOutput(amt, (both,)),),
        fee=funding_amount - amt,
    )
    cancel = SimTransaction(
        "btc",
        TxInput(lock.txid, 0, 0),
        (SimOutput(amt - fee, (SpendClause((cancel_dest,)),)),),
        fee=fee,
        rel_timelock=params.t1,
    )
    # BTC_r rides free so the emergency path costs what the normal refund
    # costs; its output keeps two exits: both keys after t2, or R_A + pk_B.
    redeem = SimTransaction(
        "btc",
        TxInput(lock.txid, 0, 0),
        (
            SimOutput(
                amt,
                (
                    SpendClause((cosign_a, cosign_b), rel_timelock=params.t2),
                    SpendClause((refund_pub_btc, cosign_b)),
                ),
            ),
        ),
        fee=0,
    )
    take = SimTransaction(
        "btc",
        TxInput(redeem.txid, 0, 0),
        (SimOutput(amt - fee, (SpendClause((take_dest,)),)),),
        fee=fee,
    )
    return lock, cancel, redeem, take


# ---------------------------------------------------------------------------
# Setup protocols (Fig 5 steps 1-3, Fig 6 steps 1-5)
# ---------------------------------------------------------------------------


def xmr_setup(
    params: SwapParams,
    alice: V2Keys,
    bob: V2Keys,
    alice_funding_txid: bytes,
    alice_funding_amount: int,
    alice_refund_dest: PointP,
):
    """Monero-leg setup. Returns (XmrSide, messages) or aborts.

    Alice's lock signature is deliberately *not* produced here: she only
    signs and publishes XMR_l once the bitcoin leg is fully signed too.
    """
    msg_a = XmrKeysMessage(
        kind="XmrKeys",
        sender="alice",
        spend_xmr=alice.spend_xmr,
        spend_btc=alice.spend_btc,
        view_secret=alice.view_secret,
        funding_txid=alice_funding_txid,
        refund_pub_xmr=alice.refund_pub_xmr,
        refund_pub_btc=alice.refund_pub_btc,
        refund_proof=alice.refund_proof,
    )
    msg_b = XmrKeysMessage(
        kind="XmrKeys",
        sender="bob",
        spend_xmr=bob.spend_xmr,
        spend_btc=bob.spend_btc,
        view_secret=bob.view_secret,
    )
    # Bob's gate: the refund point must provably share its discrete log
    # across both curves, otherwise the emergency path is worthless.
    if not dleq_verify(msg_a.refund_pub_btc, msg_a.refund_pub_xmr, msg_a.refund_proof):
        raise ProtocolAbort("bad-dleq", "refund key cross-group proof")
    alice.peer_spend_xmr = bob.spend_xmr
    alice.peer_spend_btc = bob.spend_btc
    alice.peer_view_secret = bob.view_secret
    bob.peer_spend_xmr = alice.spend_xmr
    bob.peer_spend_btc = alice.spend_btc
    bob.peer_view_secret = alice.view_secret

    shared_view_pub = mul_base_p(alice.view_secret + bob.view_secret)
    lock, refund = build_xmr_transactions(
        params,
        alice.spend_xmr,
        bob.spend_xmr,
        shared_view_pub,
        alice_refund_dest,
        alice_funding_txid,
        alice_funding_amount,
    )
    encsig = schnorr_enc_sign(
        bob.spend_secret.to_scalar_p(), alice.refund_pub_xmr, refund.sighash
    )
    msg_enc = XmrRefundEncSigMessage(encsig=encsig)
    # Alice's gate: without a valid pre-signature she could never refund.
    if not schnorr_enc_verify(bob.spend_xmr, alice.refund_pub_xmr, refund.sighash, encsig):
        raise ProtocolAbort("bad-encsig", "refund pre-signature on the monero leg")
    side = XmrSide(
        spend_a_xmr=alice.spend_xmr,
        spend_b_xmr=bob.spend_xmr,
        refund_pub_xmr=alice.refund_pub_xmr,
        refund_pub_btc=alice.refund_pub_btc,
        funding_txid=alice_funding_txid,
        lock=lock,
        refund=refund,
        refund_encsig=encsig,
    )
    return side, [msg_a, msg_b, msg_enc]


def btc_setup(
    params: SwapParams,
    alice: V2Keys,
    bob: V2Keys,
    xmr_side: XmrSide,
    bob_funding_txid: bytes,
    bob_funding_amount: int,
    bob_cancel_dest: PointQ,
    alice_take_dest: PointQ,
):
    """Bitcoin-leg setup; signatures flow in reverse publication order."""
    msg_a = BtcKeysMessage(kind="BtcKeys", sender="alice", cosign_public=alice.cosign_public)
    msg_b = BtcKeysMessage(
        kind="BtcKeys", sender="bob", cosign_public=bob.cosign_public, funding_txid=bob_funding_txid
    )
    alice.peer_cosign_public = bob.cosign_public
    bob.peer_cosign_public = alice.cosign_public

    lock, cancel, redeem, take = build_btc_transactions(
        params,
        alice.cosign_public,
        bob.cosign_public,
        xmr_side.refund_pub_btc,
        bob_cancel_dest,
        alice_take_dest,
        bob_funding_txid,
        bob_funding_amount,
    )

    # Step 4: BTC_t is signed first; only Bob's signature travels.
    sig_take_b = ecdsa_sign(bob.cosign_secret, take.sighash)
    msg_take = BtcTakeSigMessage(sig_take_b=sig_take_b)
    if not ecdsa_verify(bob.cosign_public, take.sighash, sig_take_b):
        raise ProtocolAbort("bad-signature", "take signature from Bob")

    # Step 5: Alice signs BTC_c for Bob; Bob pre-signs BTC_r for Alice.
    sig_cancel_a = ecdsa_sign(alice.cosign_secret, cancel.sighash)
    msg_cancel = BtcCancelSigMessage(sig_cancel_a=sig_cancel_a)
    if not ecdsa_verify(alice.cosign_public, cancel.sighash, sig_cancel_a):
        raise ProtocolAbort("bad-signature", "cancel signature from Alice")
    encsig_redeem = ecdsa_enc_sign(bob.cosign_secret, alice.spend_btc, redeem.sighash)
    msg_enc = RedeemEncSigMessage(encsig_redeem=encsig_redeem)
    if not ecdsa_enc_verify(bob.cosign_public, alice.spend_btc, redeem.sighash, encsig_redeem):
        raise ProtocolAbort("bad-encsig", "redeem pre-signature on the bitcoin leg")

    side = BtcSide(
        cosign_a=alice.cosign_public,
        cosign_b=bob.cosign_public,
        funding_txid=bob_funding_txid,
        lock=lock,
        cancel=cancel,
        redeem=redeem,
        take=take,
        sig_cancel_a=sig_cancel_a,
        sig_take_b=sig_take_b,
        redeem_encsig=encsig_redeem,
    )
    return side, [msg_a, msg_b, msg_take, msg_cancel, msg_enc]


# ---------------------------------------------------------------------------
# Execution state machines
# ---------------------------------------------------------------------------


@dataclass
class AliceStateV2:
    params: SwapParams
    keys: V2Keys
    xmr_side: XmrSide
    btc_side: BtcSide
    xmr_wallet_secret: ScalarP
    xmr_refund_dest_secret: ScalarP
    btc_take_dest_secret: ScalarQ
    state: str = "setup"
    abort_reason: Optional[str] = None
    cheats: bool = False  # publish BTC_r *and* XMR_c
    btc_lock_patience: int = 12  # xmr blocks to wait for BTC_l before refunding
    lock_broadcast: bool = False
    lock_seen_height: Optional[int] = None
    redeem_broadcast: bool = False
    refund_broadcast: bool = False
    take_broadcast: bool = False


@dataclass
class BobStateV2:
    params: SwapParams
    keys: V2Keys
    xmr_side: XmrSide
    btc_side: BtcSide
    btc_wallet_secret: ScalarQ
    btc_cancel_dest_secret: ScalarQ
    btc_emergency_dest_secret: ScalarQ
    xmr_redeem_dest_secret: ScalarP
    state: str = "setup"
    abort_reason: Optional[str] = None
    lock_broadcast: bool = False
    cancel_broadcast: bool = False
    xmr_redeem_broadcast: bool = False
    xmr_redeem_txid: Optional[bytes] = None
    emergency_broadcast: bool = False
    emergency_txid: Optional[bytes] = None
    recovered_s_a: Optional[CrossScalar] = None
    recovered_r_a: Optional[CrossScalar] = None


def _alice_refund_xmr(st: AliceStateV2):
    """Sign XMR_c: her own spend-key signature plus the decrypted adaptor."""
    refund = st.xmr_side.refund
    sig_a = schnorr_sign(st.keys.spend_secret.to_scalar_p(), refund.sighash)
    sig_b = schnorr_dec_sig(st.keys.refund_secret, st.xmr_side.refund_encsig)
    return refund.with_signatures(
        {st.keys.spend_xmr: sig_a, st.keys.peer_spend_xmr: sig_b}
    )


def alice_step_v2(st: AliceStateV2, chains: Chains, inbox: list):
    actions = []
    if st.state in TERMINAL_STATES_V2:
        return st, actions
    p = st.params
    xmr_side, btc_side = st.xmr_side, st.btc_side
    lock_confs = confirmations(chains.btc, btc_side.lock.txid)
    xmr_lock_confs = confirmations(chains.xmr, xmr_side.lock.txid)

    def refund_monero():
        if not st.refund_broadcast:
            st.refund_broadcast = True
            actions.append(BroadcastTx("xmr", _alice_refund_xmr(st), "refund_xmr"))

    if st.state == "setup":
        if not st.lock_broadcast:
            sig = schnorr_sign(st.xmr_wallet_secret, xmr_side.lock.sighash)
            signed = xmr_side.lock.with_signatures({mul_base_p(st.xmr_wallet_secret): sig})
            st.lock_broadcast = True
            actions.append(BroadcastTx("xmr", signed, "lock_xmr"))
        elif xmr_lock_confs:
            st.state = "xmr_locked"
            st.lock_seen_height = chains.xmr.tip_height
            actions.append(Note("state-change", {"party": "alice", "state": st.state}))

    elif st.state == "xmr_locked":
        if confirmations(chains.btc, btc_side.cancel.txid):
            # Bob reclaimed his bitcoin; reclaim the monero symmetrically.
            refund_monero()
        elif lock_confs and lock_confs >= p.btc_conf_target:
            safe = lock_confs + p.redeem_safety_margin <= p.t1
            if safe and not st.redeem_broadcast:
                sig_a = ecdsa_sign(st.keys.cosign_secret, btc_side.redeem.sighash)
                sig_b = ecdsa_dec_sig(st.keys.spend_secret, btc_side.redeem_encsig)
                redeem = btc_side.redeem.with_signatures(
                    {st.keys.cosign_public: sig_a, st.keys.peer_cosign_public: sig_b}
                )
                st.redeem_broadcast = True
                actions.append(BroadcastTx("btc", redeem, "redeem_btc"))
                actions.append(
                    Note("leak", {"party": "alice", "name": "s_A", "via": "redeem_btc"})
                )
                if st.cheats:
                    refund_monero()
                    actions.append(
                        Note("leak", {"party": "alice", "name": "r_A", "via": "refund_xmr"})
                    )
                st.state = "btc_redeem_published"
                actions.append(Note("state-change", {"party": "alice", "state": st.state}))
        elif st.lock_seen_height is not None and lock_confs is None:
            waited = chains.xmr.tip_height - st.lock_seen_height
            if waited >= st.btc_lock_patience:
                # Bob never locked; unilateral monero refund.
                refund_monero()

    elif st.state == "btc_redeem_published":
        if confirmations(chains.btc, btc_side.cancel.txid):
            refund_monero()  # her redeem lost the race against BTC_c
        if confirmations(chains.btc, btc_side.redeem.txid) and not st.take_broadcast:
            sig_a = ecdsa_sign(st.keys.cosign_secret, btc_side.take.sighash)
            take = btc_side.take.with_signatures(
                {st.keys.cosign_public: sig_a, st.keys.peer_cosign_public: btc_side.sig_take_b}
            )
            st.take_broadcast = True
            actions.append(BroadcastTx("btc", take, "take_btc"))
        if confirmations(chains.btc, btc_side.take.txid):
            st.state = "btc_taken"
            actions.append(Note("state-change", {"party": "alice", "state": st.state}))

    # Refund resolution is watched from any live state.
    if st.state not in TERMINAL_STATES_V2 and st.refund_broadcast:
        if confirmations(chains.xmr, xmr_side.refund.txid):
            if not (st.cheats and st.state == "btc_redeem_published"):
                st.state = "xmr_refunded"
                actions.append(Note("state-change", {"party": "alice", "state": st.state}))
    if st.state == "btc_redeem_published" and st.cheats:
        # If Bob's emergency refund beat BTC_t, the bitcoin is gone for good;
        # she is left exactly where an honest refund would have put her.
        spender = chains.btc.spent.get((btc_side.redeem.txid, 0))
        if spender is not None and spender != btc_side.take.txid:
            st.state = "xmr_refunded"
            actions.append(Note("state-change", {"party": "alice", "state": st.state}))

    return st, actions


def _bob_xmr_redeem_tx(st: BobStateV2) -> SimTransaction:
    """XMR_r, built and signed by Bob alone once s_A has leaked."""
    p = st.params
    tx = SimTransaction(
        "xmr",
        TxInput(st.xmr_side.lock.txid, 0, 0),
        (
            SimOutput(
                p.amt_xmr - p.fee,
                (SpendClause((mul_base_p(st.xmr_redeem_dest_secret),)),),
            ),
        ),
        fee=p.fee,
    )
    sig_a = schnorr_sign(st.recovered_s_a.to_scalar_p(), tx.sighash)
    sig_b = schnorr_sign(st.keys.spend_secret.to_scalar_p(), tx.sighash)
    return tx.with_signatures(
        {st.xmr_side.spend_a_xmr: sig_a, st.xmr_side.spend_b_xmr: sig_b}
    )


def _bob_emergency_tx(st: BobStateV2) -> SimTransaction:
    """BTC_e: spend BTC_r's second clause with (r_A, sk_B)."""
    p = st.params
    tx = SimTransaction(
        "btc",
        TxInput(st.btc_side.redeem.txid, 0, 1),
        (
            SimOutput(
                p.amt_btc - p.fee,
                (SpendClause((mul_base_q(st.btc_emergency_dest_secret),)),),
            ),
        ),
        fee=p.fee,
    )
    sig_r = ecdsa_sign(ScalarQ(st.recovered_r_a.v), tx.sighash)
    sig_b = ecdsa_sign(st.keys.cosign_secret, tx.sighash)
    return tx.with_signatures(
        {st.xmr_side.refund_pub_btc: sig_r, st.keys.cosign_public: sig_b}
    )


def emergency_refund(st: BobStateV2, chains: Chains) -> list:
    """Bob's reaction to Alice taking both assets (BTC_r and XMR_c published).

    Recovers r_A from the XMR_c witness and spends BTC_r's emergency clause.
    Raises ProtocolAbort("emergency-window-closed") once BTC_t confirmed,
    which is the documented cost of Bob going offline past t2.
    """
    actions = []
    refund_tx = find_by_id(chains.xmr, st.xmr_side.refund.txid)
    if refund_tx is None or not confirmations(chains.xmr, st.xmr_side.refund.txid):
        raise ProtocolAbort("emergency-not-applicable", "XMR_c is not on the chain")
    if not confirmations(chains.btc, st.btc_side.redeem.txid):
        raise ProtocolAbort("emergency-not-applicable", "BTC_r is not on the chain")
    if st.recovered_r_a is None:
        sig_b = extract_witness(refund_tx, st.keys.spend_xmr)
        st.recovered_r_a = schnorr_rec_key(sig_b, st.xmr_side.refund_encsig)
        actions.append(
            Note(
                "recovered-secret",
                {"party": "bob", "name": "r_A", "value": st.recovered_r_a.encode().hex()},
            )
        )
    if confirmations(chains.btc, st.btc_side.take.txid):
        raise ProtocolAbort("emergency-window-closed", "BTC_t already confirmed")
    if not st.emergency_broadcast:
        tx = _bob_emergency_tx(st)
        st.emergency_broadcast = True
        st.emergency_txid = tx.txid
        actions.append(BroadcastTx("btc", tx, "emergency_btc"))
    return actions


def bob_step_v2(st: BobStateV2, chains: Chains, inbox: list):
    actions = []
    if st.state in TERMINAL_STATES_V2:
        return st, actions
    p = st.params
    xmr_side, btc_side = st.xmr_side, st.btc_side
    lock_confs = confirmations(chains.btc, btc_side.lock.txid)

    # Learn s_A the moment BTC_r shows up anywhere (mempool included).
    if st.recovered_s_a is None:
        redeem_tx = find_by_id(chains.btc, btc_side.redeem.txid)
        if redeem_tx is not None:
            sig_b = extract_witness(redeem_tx, st.keys.cosign_public)
            st.recovered_s_a = ecdsa_rec_key(sig_b, btc_side.redeem_encsig, st.keys.peer_spend_btc)
            actions.append(
                Note(
                    "recovered-secret",
                    {"party": "bob", "name": "s_A", "value": st.recovered_s_a.encode().hex()},
                )
            )

    if st.state == "setup":
        if confirmations(chains.xmr, xmr_side.refund.txid):
            # Alice refunded before he ever locked; nothing at stake.
            st.state = "aborted"
            st.abort_reason = "peer-refunded-before-lock"
            actions.append(Note("state-change", {"party": "bob", "state": st.state}))
        elif (confirmations(chains.xmr, xmr_side.lock.txid) or 0) >= p.xmr_conf_target:
            if not st.lock_broadcast:
                sig = ecdsa_sign(st.btc_wallet_secret, btc_side.lock.sighash)
                signed = btc_side.lock.with_signatures({mul_base_q(st.btc_wallet_secret): sig})
                st.lock_broadcast = True
                actions.append(BroadcastTx("btc", signed, "lock_btc"))
            elif lock_confs:
                st.state = "btc_locked"
                actions.append(Note("state-change", {"party": "bob", "state": st.state}))

    elif st.state == "btc_locked":
        redeem_confirmed = bool(confirmations(chains.btc, btc_side.redeem.txid))
        refund_confirmed = bool(confirmations(chains.xmr, xmr_side.refund.txid))
        lock_unspent = (xmr_side.lock.txid, 0) not in chains.xmr.spent
        if redeem_confirmed and st.recovered_s_a is not None:
            if refund_confirmed:
                # Alice is cheating: she took the bitcoin staging output and
                # pulled the monero back. Emergency-refund through BTC_r.
                try:
                    actions.extend(emergency_refund(st, chains))
                    st.state = "btc_redeem_published"
                    actions.append(Note("state-change", {"party": "bob", "state": st.state}))
                except ProtocolAbort as abort:
                    st.state = "aborted"
                    st.abort_reason = abort.reason
                    actions.append(Note("state-change", {"party": "bob", "state": st.state}))
            elif lock_unspent and not st.xmr_redeem_broadcast:
                tx = _bob_xmr_redeem_tx(st)
                st.xmr_redeem_broadcast = True
                st.xmr_redeem_txid = tx.txid
                actions.append(BroadcastTx("xmr", tx, "redeem_xmr"))
                st.state = "btc_redeem_published"
                actions.append(Note("state-change", {"party": "bob", "state": st.state}))
        elif not redeem_confirmed and lock_confs and lock_confs >= p.t1:
            if not st.cancel_broadcast:
                sig_b = ecdsa_sign(st.keys.cosign_secret, btc_side.cancel.sighash)
                cancel = btc_side.cancel.with_signatures(
                    {st.keys.peer_cosign_public: btc_side.sig_cancel_a, st.keys.cosign_public: sig_b}
                )
                st.cancel_broadcast = True
                actions.append(BroadcastTx("btc", cancel, "cancel_btc"))
            elif confirmations(chains.btc, btc_side.cancel.txid):
                st.state = "btc_cancelled"
                actions.append(Note("state-change", {"party": "bob", "state": st.state}))

    elif st.state == "btc_redeem_published":
        if st.xmr_redeem_broadcast:
            if st.xmr_redeem_txid and confirmations(chains.xmr, st.xmr_redeem_txid):
                st.state = "xmr_redeemed"
                actions.append(Note("state-change", {"party": "bob", "state": st.state}))
            elif confirmations(chains.xmr, xmr_side.refund.txid):
                # XMR_c won the race after all; fall back to the emergency.
                try:
                    actions.extend(emergency_refund(st, chains))
                except ProtocolAbort as abort:
                    st.state = "aborted"
                    st.abort_reason = abort.reason
                    actions.append(Note("state-change", {"party": "bob", "state": st.state}))
        if st.emergency_broadcast and st.emergency_txid:
            if confirmations(chains.btc, st.emergency_txid):
                st.state = "emergency_refunded"
                actions.append(Note("state-change", {"party": "bob", "state": st.state}))

    return st, actions
