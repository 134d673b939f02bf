"""BTC-to-XMR swap: the party holding bitcoin locks first.

Flow: after key generation (with cross-group DLEQ proofs), address
exchange and the pre-signing phase, Bob locks the bitcoin in a 2-of-2
output. Alice then locks the monero in an output spendable only with
knowledge of both cross-group secrets s_a and s_b. Bob hands Alice an
ECDSA pre-signature for the redeem transaction encrypted under her
S_a^btc; redeeming publishes the decrypted signature and thereby leaks
s_a to Bob, who then owns both halves of the monero spend key. The cancel
path (after t1) leads either to Bob's refund, which symmetrically leaks
s_b to Alice so she can reclaim her monero, or, if Bob stalls past t2, to
Alice's punish transaction.

Everything here is expressed over the simulated chains: the monero lock
is an output under the aggregate key S_a^xmr + S_b^xmr (one signature by
whoever knows s_a + s_b) tagged with the shared view key, and bitcoin
outputs carry explicit multi-key spend clauses instead of script.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from . import adaptors
from .actions import BroadcastTx, Chains, Note, ProtocolAbort, SendMessage
from .adaptors import (
    EcdsaEncSig,
    EcdsaSignature,
    ecdsa_dec_sig,
    ecdsa_enc_sign,
    ecdsa_enc_verify,
    ecdsa_rec_key,
    ecdsa_sign,
    ecdsa_verify,
)
from .chains import (
    SimOutput,
    SimTransaction,
    SpendClause,
    TxInput,
    confirmations,
    extract_witness,
    find_by_id,
    scan_with_view_key,
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

TERMINAL_STATES = {"redeemed", "refunded", "punished", "monero_swept", "aborted"}


@dataclass(frozen=True)
class SwapParams:
    amt_btc: int
    amt_xmr: int
    fee: int
    t1: int  # cancel spendable once the btc lock has t1 confirmations
    t2: int  # punish spendable once the cancel has t2 confirmations
    btc_conf_target: int = 1
    xmr_conf_target: int = 1
    redeem_safety_margin: int = 2

    def __post_init__(self):
        if min(self.amt_btc, self.amt_xmr, self.fee, self.t1, self.t2) <= 0:
            raise ValueError("amounts, fee and timelocks must be positive")
        if self.btc_conf_target < 1 or self.xmr_conf_target < 1:
            raise ValueError("confirmation targets must be at least 1")
        if self.redeem_safety_margin < 0:
            raise ValueError("safety margin must be non-negative")

    def to_json(self) -> dict:
        return {
            "amt_btc": self.amt_btc,
            "amt_xmr": self.amt_xmr,
            "fee": self.fee,
            "t1": self.t1,
            "t2": self.t2,
            "btc_conf_target": self.btc_conf_target,
            "xmr_conf_target": self.xmr_conf_target,
            "redeem_safety_margin": self.redeem_safety_margin,
        }


@dataclass
class PartyKeys:
    """One party's key material plus the verified halves of the peer's."""

    dlsig_secret: ScalarQ  # a or b: co-signing key for the 2-of-2 output
    dlsig_public: PointQ
    cross_secret: CrossScalar  # s_a or s_b
    spend_btc: PointQ  # cross_secret * G
    spend_xmr: PointP  # cross_secret * H
    view_secret: ScalarP  # v_a or v_b
    view_public: PointP
    proof: CrossGroupDleqProof
    peer_dlsig_public: Optional[PointQ] = None
    peer_spend_btc: Optional[PointQ] = None
    peer_spend_xmr: Optional[PointP] = None
    peer_view_secret: Optional[ScalarP] = None
    peer_view_public: Optional[PointP] = None

    @property
    def shared_view_secret(self) -> ScalarP:
        return self.view_secret + self.peer_view_secret

    @property
    def aggregate_spend_xmr(self) -> PointP:
        return self.spend_xmr + self.peer_spend_xmr


@dataclass(frozen=True)
class SwapAddresses:
    redeem_a: PointQ  # Alice's payout on the happy path
    punish_a: PointQ  # Alice's payout when Bob stalls after cancel
    refund_b: PointQ  # Bob's payout on the refund path

    def __post_init__(self):
        if len({self.redeem_a.encode(), self.punish_a.encode(), self.refund_b.encode()}) != 3:
            raise ValueError("swap addresses must be distinct")


# ---------------------------------------------------------------------------
# Protocol messages (tagged JSON for transcript logging)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KeyGenMessage:
    kind: str  # "KeyGenA" or "KeyGenB"
    dlsig_public: PointQ
    view_secret: ScalarP
    spend_btc: PointQ
    spend_xmr: PointP
    proof: CrossGroupDleqProof

    def to_json(self) -> dict:
        from .dleq import proof_encode

        return {
            "kind": self.kind,
            "dlsig_public": self.dlsig_public.encode().hex(),
            "view_secret": self.view_secret.encode().hex(),
            "spend_btc": self.spend_btc.encode().hex(),
            "spend_xmr": self.spend_xmr.encode().hex(),
            "proof": proof_encode(self.proof).hex(),
        }


@dataclass(frozen=True)
class AddressesMessage:
    kind: str = "Addresses"
    redeem_a: PointQ = None
    punish_a: PointQ = None
    refund_b: PointQ = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "redeem_a": self.redeem_a.encode().hex(),
            "punish_a": self.punish_a.encode().hex(),
            "refund_b": self.refund_b.encode().hex(),
        }


@dataclass(frozen=True)
class SigningBMessage:
    """Bob -> Alice: the lock template plus his cancel/punish signatures."""

    lock_template: SimTransaction
    sig_cancel_b: EcdsaSignature
    sig_punish_b: EcdsaSignature
    kind: str = "SigningB"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "lock_template": self.lock_template.canonical_bytes().hex(),
            "sig_cancel_b": self.sig_cancel_b.encode().hex(),
            "sig_punish_b": self.sig_punish_b.encode().hex(),
        }


@dataclass(frozen=True)
class SigningAMessage:
    """Alice -> Bob: her cancel signature and the refund pre-signature."""

    sig_cancel_a: EcdsaSignature
    encsig_refund: EcdsaEncSig
    kind: str = "SigningA"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "sig_cancel_a": self.sig_cancel_a.encode().hex(),
            "encsig_refund": self.encsig_refund.encode().hex(),
        }


@dataclass(frozen=True)
class EncSigRedeemMessage:
    """Bob -> Alice once the monero lock looks final."""

    encsig_redeem: EcdsaEncSig
    kind: str = "EncSigRedeem"

    def to_json(self) -> dict:
        return {"kind": self.kind, "encsig_redeem": self.encsig_redeem.encode().hex()}


# ---------------------------------------------------------------------------
# Key generation (both directions, with DLEQ verification gates)
# ---------------------------------------------------------------------------


def kgen_local(rng: random.Random) -> PartyKeys:
    """Generate one party's keys and the cross-group proof for them."""
    a = ScalarQ.random(rng)
    while a.v == 0:  # pragma: no cover - astronomically unlikely
        a = ScalarQ.random(rng)
    v = ScalarP.random(rng)
    s = sample_cross_scalar(rng)
    s_btc, s_xmr, proof = dleq_prove(s, rng)
    return PartyKeys(
        dlsig_secret=a,
        dlsig_public=mul_base_q(a),
        cross_secret=s,
        spend_btc=s_btc,
        spend_xmr=s_xmr,
        view_secret=v,
        view_public=mul_base_p(v),
        proof=proof,
    )


def kgen_message(keys: PartyKeys, kind: str) -> KeyGenMessage:
    return KeyGenMessage(
        kind=kind,
        dlsig_public=keys.dlsig_public,
        view_secret=keys.view_secret,
        spend_btc=keys.spend_btc,
        spend_xmr=keys.spend_xmr,
        proof=keys.proof,
    )


def kgen_absorb(keys: PartyKeys, msg: KeyGenMessage) -> None:
    """Verify the peer's DLEQ proof and store their public halves."""
    if not dleq_verify(msg.spend_btc, msg.spend_xmr, msg.proof):
        raise ProtocolAbort("bad-dleq", "peer's cross-group proof does not verify")
    keys.peer_dlsig_public = msg.dlsig_public
    keys.peer_spend_btc = msg.spend_btc
    keys.peer_spend_xmr = msg.spend_xmr
    keys.peer_view_secret = msg.view_secret
    keys.peer_view_public = mul_base_p(msg.view_secret)


def kgen_exchange(alice_rng: random.Random, bob_rng: random.Random):
    """Run the honest two-message key generation protocol end to end."""
    alice = kgen_local(alice_rng)
    bob = kgen_local(bob_rng)
    kgen_absorb(bob, kgen_message(alice, "KeyGenA"))
    kgen_absorb(alice, kgen_message(bob, "KeyGenB"))
    return alice, bob


# ---------------------------------------------------------------------------
# Transaction construction and the signing protocol
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnsignedTxSet:
    lock: SimTransaction
    cancel: SimTransaction
    refund: SimTransaction
    punish: SimTransaction
    redeem: SimTransaction


def build_transactions(
    params: SwapParams,
    pk_a: PointQ,
    pk_b: PointQ,
    addresses: SwapAddresses,
    funding_txid: bytes,
    funding_amount: int,
) -> UnsignedTxSet:
    """Deterministically derive the unsigned bitcoin transaction graph.

    Both parties run this independently from shared data; the resulting
    txids must agree bit-for-bit or signing falls apart.
    """
    amt, fee = params.amt_btc, params.fee
    if amt - 2 * fee <= 0:
        raise ValueError("fee too large: refund/punish outputs would be worthless")
    if funding_amount < amt + fee:
        raise ValueError("funding output does not cover amount plus fee")
    both = SpendClause((pk_a, pk_b))
    lock = SimTransaction(
        "btc",
        TxInput(funding_txid, 0, 0),
        (SimOutput(amt, (both,)),),
        fee=funding_amount - amt,
    )
    cancel = SimTransaction(
        "btc",
        TxInput(lock.txid, 0, 0),
        (SimOutput(amt - fee, (both,)),),
        fee=fee,
        rel_timelock=params.t1,
    )
    refund = SimTransaction(
        "btc",
        TxInput(cancel.txid, 0, 0),
        (SimOutput(amt - 2 * fee, (SpendClause((addresses.refund_b,)),)),),
        fee=fee,
    )
    punish = SimTransaction(
        "btc",
        TxInput(cancel.txid, 0, 0),
        (SimOutput(amt - 2 * fee, (SpendClause((addresses.punish_a,)),)),),
        fee=fee,
        rel_timelock=params.t2,
    )
    redeem = SimTransaction(
        "btc",
        TxInput(lock.txid, 0, 0),
        (SimOutput(amt - fee, (SpendClause((addresses.redeem_a,)),)),),
        fee=fee,
    )
    return UnsignedTxSet(lock, cancel, refund, punish, redeem)


@dataclass
class PresignedSet:
    """Transactions plus every signature a party holds before going on-chain."""

    txs: UnsignedTxSet
    sig_cancel_a: Optional[EcdsaSignature] = None
    sig_cancel_b: Optional[EcdsaSignature] = None
    sig_punish_a: Optional[EcdsaSignature] = None
    sig_punish_b: Optional[EcdsaSignature] = None
    sig_refund_b: Optional[EcdsaSignature] = None
    encsig_refund: Optional[EcdsaEncSig] = None  # Alice's, under S_b^btc
    encsig_redeem: Optional[EcdsaEncSig] = None  # Bob's, under S_a^btc; arrives later


def bob_signing_message(
    params: SwapParams,
    keys: PartyKeys,
    addresses: SwapAddresses,
    funding_txid: bytes,
    funding_amount: int,
):
    """Bob's first signing move; safe because the lock is still unsigned."""
    txs = build_transactions(
        params, keys.peer_dlsig_public, keys.dlsig_public, addresses, funding_txid, funding_amount
    )
    pre = PresignedSet(
        txs=txs,
        sig_cancel_b=ecdsa_sign(keys.dlsig_secret, txs.cancel.sighash),
        sig_punish_b=ecdsa_sign(keys.dlsig_secret, txs.punish.sighash),
    )
    msg = SigningBMessage(
        lock_template=txs.lock,
        sig_cancel_b=pre.sig_cancel_b,
        sig_punish_b=pre.sig_punish_b,
    )
    return pre, msg


def alice_process_signing(
    params: SwapParams,
    keys: PartyKeys,
    addresses: SwapAddresses,
    msg: SigningBMessage,
):
    """Alice rebuilds the graph from the lock template, verifies, signs."""
    template = msg.lock_template
    if template.input is None:
        raise ProtocolAbort("bad-lock-template", "lock transaction has no funding input")
    funding_amount = params.amt_btc + template.fee
    txs = build_transactions(
        params,
        keys.dlsig_public,
        keys.peer_dlsig_public,
        addresses,
        template.input.parent_txid,
        funding_amount,
    )
    if txs.lock.txid != template.txid:
        raise ProtocolAbort("bad-lock-template", "lock template does not match the agreed swap")
    if not ecdsa_verify(keys.peer_dlsig_public, txs.cancel.sighash, msg.sig_cancel_b):
        raise ProtocolAbort("bad-signature", "cancel signature from Bob")
    if not ecdsa_verify(keys.peer_dlsig_public, txs.punish.sighash, msg.sig_punish_b):
        raise ProtocolAbort("bad-signature", "punish signature from Bob")
    pre = PresignedSet(
        txs=txs,
        sig_cancel_a=ecdsa_sign(keys.dlsig_secret, txs.cancel.sighash),
        sig_cancel_b=msg.sig_cancel_b,
        sig_punish_a=ecdsa_sign(keys.dlsig_secret, txs.punish.sighash),
        sig_punish_b=msg.sig_punish_b,
        encsig_refund=ecdsa_enc_sign(keys.dlsig_secret, keys.peer_spend_btc, txs.refund.sighash),
    )
    reply = SigningAMessage(sig_cancel_a=pre.sig_cancel_a, encsig_refund=pre.encsig_refund)
    return pre, reply


def bob_process_signing(keys: PartyKeys, pre: PresignedSet, msg: SigningAMessage) -> None:
    """Bob's verification gate; after this his refund path works offline."""
    if not ecdsa_verify(keys.peer_dlsig_public, pre.txs.cancel.sighash, msg.sig_cancel_a):
        raise ProtocolAbort("bad-signature", "cancel signature from Alice")
    if not ecdsa_enc_verify(
        keys.peer_dlsig_public, keys.spend_btc, pre.txs.refund.sighash, msg.encsig_refund
    ):
        raise ProtocolAbort("bad-signature", "refund pre-signature from Alice")
    pre.sig_cancel_a = msg.sig_cancel_a
    pre.encsig_refund = msg.encsig_refund
    pre.sig_refund_b = ecdsa_sign(keys.dlsig_secret, pre.txs.refund.sighash)


def signing_protocol(
    params: SwapParams,
    alice_keys: PartyKeys,
    bob_keys: PartyKeys,
    addresses: SwapAddresses,
    funding_txid: bytes,
    funding_amount: int,
):
    """Run the honest pre-signing phase; returns both parties' sets."""
    bob_pre, msg_b = bob_signing_message(params, bob_keys, addresses, funding_txid, funding_amount)
    alice_pre, msg_a = alice_process_signing(params, alice_keys, addresses, msg_b)
    bob_process_signing(bob_keys, bob_pre, msg_a)
    return alice_pre, bob_pre, [msg_b, msg_a]


# ---------------------------------------------------------------------------
# Execution state machines
# ---------------------------------------------------------------------------


@dataclass
class AliceState:
    params: SwapParams
    keys: PartyKeys
    addresses: SwapAddresses
    presigned: PresignedSet
    xmr_wallet_secret: ScalarP
    xmr_funding_txid: bytes
    sweep_key_secret: ScalarP  # destination for reclaimed monero
    state: str = "signed"
    abort_reason: Optional[str] = None
    ignore_safety_margin: bool = False
    xmr_lock_txid: Optional[bytes] = None
    sig_redeem_b: Optional[EcdsaSignature] = None
    recovered_s_b: Optional[CrossScalar] = None
    cancel_requested: bool = False
    redeem_broadcast: bool = False
    punish_broadcast: bool = False
    sweep_broadcast: bool = False
    sweep_txid: Optional[bytes] = None


@dataclass
class BobState:
    params: SwapParams
    keys: PartyKeys
    addresses: SwapAddresses
    presigned: PresignedSet
    btc_wallet_secret: ScalarQ
    btc_funding_txid: bytes
    sweep_key_secret: ScalarP  # destination for the claimed monero
    state: str = "signed"
    abort_reason: Optional[str] = None
    front_runs: bool = False  # adversarial: cancel at t1 even after encsig
    encsig_send_at_conf: int = 0  # adversarial: delay the encsig until this depth
    xmr_lock_txid: Optional[bytes] = None
    recovered_s_a: Optional[CrossScalar] = None
    lock_broadcast: bool = False
    encsig_sent: bool = False
    cancel_requested: bool = False
    refund_broadcast: bool = False
    sweep_broadcast: bool = False


def _xmr_lock_tx(st: AliceState) -> SimTransaction:
    aggregate = st.keys.aggregate_spend_xmr
    shared_view = mul_base_p(st.keys.shared_view_secret)
    return SimTransaction(
        "xmr",
        TxInput(st.xmr_funding_txid, 0, 0),
        (SimOutput(st.params.amt_xmr, (SpendClause((aggregate,)),), view_key_pub=shared_view),),
        fee=st.params.fee,
    )


def _xmr_sweep_tx(params, lock_txid, lock_amount, aggregate_secret, dest: PointP) -> SimTransaction:
    tx = SimTransaction(
        "xmr",
        TxInput(lock_txid, 0, 0),
        (SimOutput(lock_amount - params.fee, (SpendClause((dest,)),)),),
        fee=params.fee,
    )
    sig = adaptors.schnorr_sign(aggregate_secret, tx.sighash)
    return tx.with_signatures({mul_base_p(aggregate_secret): sig})


def _redeem_safe(params: SwapParams, lock_confs: int) -> bool:
    # Front-run guard: never race the cancel transaction for the last blocks
    # of the t1 window.
    return lock_confs + params.redeem_safety_margin <= params.t1


def _signed_cancel(pre: PresignedSet, keys: PartyKeys, is_alice: bool) -> SimTransaction:
    own, peer = (keys.dlsig_public, keys.peer_dlsig_public)
    a_key, b_key = (own, peer) if is_alice else (peer, own)
    return pre.txs.cancel.with_signatures(
        {a_key: pre.sig_cancel_a, b_key: pre.sig_cancel_b}
    )


def alice_step(st: AliceState, chains: Chains, inbox: list):
    """One deterministic tick of Alice's protocol logic."""
    actions = []
    if st.state in TERMINAL_STATES:
        return st, actions
    p = st.params
    pre = st.presigned
    lock_confs = confirmations(chains.btc, pre.txs.lock.txid)

    for msg in inbox:
        if (
            getattr(msg, "kind", None) == "EncSigRedeem"
            and pre.encsig_redeem is None
            and st.state == "xmr_locked"
        ):
            if ecdsa_enc_verify(
                st.keys.peer_dlsig_public, st.keys.spend_btc, pre.txs.redeem.sighash, msg.encsig_redeem
            ):
                pre.encsig_redeem = msg.encsig_redeem
                st.sig_redeem_b = ecdsa_dec_sig(st.keys.cross_secret, msg.encsig_redeem)
                st.state = "encsig_received"
                actions.append(Note("state-change", {"party": "alice", "state": st.state}))
            else:
                actions.append(Note("invalid-encsig", {"party": "alice"}))

    # Cancel confirmation trumps everything below terminal.
    if confirmations(chains.btc, pre.txs.cancel.txid):
        if st.state != "cancel_seen":
            st.state = "cancel_seen"
            actions.append(Note("state-change", {"party": "alice", "state": st.state}))

    if st.state == "signed":
        if lock_confs and lock_confs >= p.btc_conf_target:
            if _redeem_safe(p, lock_confs):
                lock_xmr = _xmr_lock_tx(st)
                st.xmr_lock_txid = lock_xmr.txid
                sig = adaptors.schnorr_sign(st.xmr_wallet_secret, lock_xmr.sighash)
                signed = lock_xmr.with_signatures({mul_base_p(st.xmr_wallet_secret): sig})
                actions.append(BroadcastTx("xmr", signed, "lock_xmr"))
                st.state = "btc_lock_seen"
                actions.append(Note("state-change", {"party": "alice", "state": st.state}))
            else:
                st.cancel_requested = True

    elif st.state == "btc_lock_seen":
        if confirmations(chains.xmr, st.xmr_lock_txid):
            if confirmations(chains.xmr, st.xmr_lock_txid) >= p.xmr_conf_target:
                st.state = "xmr_locked"
                actions.append(Note("state-change", {"party": "alice", "state": st.state}))

    elif st.state == "xmr_locked":
        # Waiting for the redeem pre-signature; bail to the cancel path once
        # redeeming could no longer confirm safely before t1.
        if lock_confs and not _redeem_safe(p, lock_confs):
            st.cancel_requested = True

    elif st.state == "encsig_received":
        if not st.redeem_broadcast:
            if st.ignore_safety_margin or (lock_confs and _redeem_safe(p, lock_confs)):
                redeem = pre.txs.redeem.with_signatures(
                    {
                        st.keys.dlsig_public: ecdsa_sign(st.keys.dlsig_secret, pre.txs.redeem.sighash),
                        st.keys.peer_dlsig_public: st.sig_redeem_b,
                    }
                )
                st.redeem_broadcast = True
                actions.append(BroadcastTx("btc", redeem, "redeem_btc"))
            else:
                st.cancel_requested = True
        elif confirmations(chains.btc, pre.txs.redeem.txid):
            st.state = "redeemed"
            actions.append(Note("state-change", {"party": "alice", "state": st.state}))

    elif st.state == "cancel_seen":
        if not st.punish_broadcast:
            punish = pre.txs.punish.with_signatures(
                {
                    st.keys.dlsig_public: st.presigned.sig_punish_a,
                    st.keys.peer_dlsig_public: st.presigned.sig_punish_b,
                }
            )
            st.punish_broadcast = True
            actions.append(BroadcastTx("btc", punish, "punish_btc"))
        refund_tx = find_by_id(chains.btc, pre.txs.refund.txid)
        if refund_tx is not None and confirmations(chains.btc, pre.txs.refund.txid):
            if st.recovered_s_b is None:
                sig_a = extract_witness(refund_tx, st.keys.dlsig_public)
                st.recovered_s_b = ecdsa_rec_key(sig_a, pre.encsig_refund, st.keys.peer_spend_btc)
                actions.append(
                    Note(
                        "recovered-secret",
                        {"party": "alice", "name": "s_b", "value": st.recovered_s_b.encode().hex()},
                    )
                )
            if st.xmr_lock_txid and not st.sweep_broadcast:
                if confirmations(chains.xmr, st.xmr_lock_txid):
                    aggregate = ScalarP(st.keys.cross_secret.v + st.recovered_s_b.v)
                    sweep = _xmr_sweep_tx(
                        p, st.xmr_lock_txid, p.amt_xmr, aggregate, mul_base_p(st.sweep_key_secret)
                    )
                    st.sweep_broadcast = True
                    st.sweep_txid = sweep.txid
                    actions.append(BroadcastTx("xmr", sweep, "sweep_xmr_alice"))
            elif not st.xmr_lock_txid:
                st.state = "refunded"
                actions.append(Note("state-change", {"party": "alice", "state": st.state}))
        if st.sweep_broadcast and st.xmr_lock_txid:
            spender = chains.xmr.spent.get((st.xmr_lock_txid, 0))
            if spender == st.sweep_txid:
                st.state = "refunded"
                actions.append(Note("state-change", {"party": "alice", "state": st.state}))
            elif spender is not None:
                # somebody else took the monero (she lost a redeem race)
                st.state = "aborted"
                st.abort_reason = "monero-lost"
                actions.append(Note("state-change", {"party": "alice", "state": st.state}))
        if confirmations(chains.btc, pre.txs.punish.txid):
            st.state = "punished"
            actions.append(Note("state-change", {"party": "alice", "state": st.state}))

    if st.cancel_requested and st.state not in TERMINAL_STATES and st.state != "cancel_seen":
        actions.append(BroadcastTx("btc", _signed_cancel(pre, st.keys, True), "cancel_btc"))
        st.cancel_requested = False

    return st, actions


def bob_step(st: BobState, chains: Chains, inbox: list):
    """One deterministic tick of Bob's protocol logic."""
    actions = []
    if st.state in TERMINAL_STATES:
        return st, actions
    p = st.params
    pre = st.presigned
    lock_confs = confirmations(chains.btc, pre.txs.lock.txid)

    # Watch for the redeem transaction (mempool included: seeing it even
    # briefly is enough to learn s_a).
    if st.recovered_s_a is None:
        redeem_tx = find_by_id(chains.btc, pre.txs.redeem.txid)
        if redeem_tx is not None and pre.encsig_redeem is not None:
            sig_b = extract_witness(redeem_tx, st.keys.dlsig_public)
            st.recovered_s_a = ecdsa_rec_key(sig_b, pre.encsig_redeem, st.keys.peer_spend_btc)
            actions.append(
                Note(
                    "recovered-secret",
                    {"party": "bob", "name": "s_a", "value": st.recovered_s_a.encode().hex()},
                )
            )

    # A front-running Bob grabs the monero the moment s_a leaks, without
    # waiting for his bitcoin position to settle.
    if (
        st.front_runs
        and st.recovered_s_a is not None
        and st.xmr_lock_txid
        and not st.sweep_broadcast
        and (st.xmr_lock_txid, 0) not in chains.xmr.spent
    ):
        aggregate = ScalarP(st.recovered_s_a.v + st.keys.cross_secret.v)
        sweep = _xmr_sweep_tx(
            p, st.xmr_lock_txid, p.amt_xmr, aggregate, mul_base_p(st.sweep_key_secret)
        )
        st.sweep_broadcast = True
        actions.append(BroadcastTx("xmr", sweep, "sweep_xmr_bob"))

    cancel_confirmed = bool(confirmations(chains.btc, pre.txs.cancel.txid))
    if cancel_confirmed and st.state not in ("cancel_seen",):
        st.state = "cancel_seen"
        actions.append(Note("state-change", {"party": "bob", "state": st.state}))

    if st.state == "signed":
        if not st.lock_broadcast:
            sig = ecdsa_sign(st.btc_wallet_secret, pre.txs.lock.sighash)
            signed = pre.txs.lock.with_signatures({mul_base_q(st.btc_wallet_secret): sig})
            st.lock_broadcast = True
            actions.append(BroadcastTx("btc", signed, "lock_btc"))
        elif lock_confs:
            st.state = "btc_locked"
            actions.append(Note("state-change", {"party": "bob", "state": st.state}))

    elif st.state == "btc_locked":
        # Find the monero lock through the shared private view key and make
        # sure it pays the aggregate spend key the agreed amount.
        for txid, _vout, out in scan_with_view_key(chains.xmr, st.keys.shared_view_secret):
            clause_ok = (
                len(out.clauses) == 1
                and out.clauses[0].required_keys == (st.keys.aggregate_spend_xmr,)
                and out.clauses[0].rel_timelock == 0
            )
            if out.amount == p.amt_xmr and clause_ok:
                if confirmations(chains.xmr, txid) >= p.xmr_conf_target:
                    st.xmr_lock_txid = txid
                    st.state = "xmr_lock_seen"
                    actions.append(Note("state-change", {"party": "bob", "state": st.state}))
                break

    elif st.state == "xmr_lock_seen":
        if not st.encsig_sent and (lock_confs or 0) >= st.encsig_send_at_conf:
            encsig = ecdsa_enc_sign(st.keys.dlsig_secret, st.keys.peer_spend_btc, pre.txs.redeem.sighash)
            pre.encsig_redeem = encsig
            st.encsig_sent = True
            actions.append(SendMessage(EncSigRedeemMessage(encsig_redeem=encsig)))
            st.state = "encsig_sent"
            actions.append(Note("state-change", {"party": "bob", "state": st.state}))

    elif st.state == "encsig_sent":
        if confirmations(chains.btc, pre.txs.redeem.txid) and st.recovered_s_a is not None:
            if not st.sweep_broadcast:
                aggregate = ScalarP(st.recovered_s_a.v + st.keys.cross_secret.v)
                sweep = _xmr_sweep_tx(
                    p, st.xmr_lock_txid, p.amt_xmr, aggregate, mul_base_p(st.sweep_key_secret)
                )
                st.sweep_broadcast = True
                actions.append(BroadcastTx("xmr", sweep, "sweep_xmr_bob"))
            elif (st.xmr_lock_txid, 0) in chains.xmr.spent:
                st.state = "monero_swept"
                actions.append(Note("state-change", {"party": "bob", "state": st.state}))

    elif st.state == "cancel_seen":
        if not st.refund_broadcast:
            sig_a = ecdsa_dec_sig(st.keys.cross_secret, pre.encsig_refund)
            refund = pre.txs.refund.with_signatures(
                {st.keys.peer_dlsig_public: sig_a, st.keys.dlsig_public: pre.sig_refund_b}
            )
            st.refund_broadcast = True
            actions.append(BroadcastTx("btc", refund, "refund_btc"))
        elif confirmations(chains.btc, pre.txs.refund.txid):
            # Bitcoin position resolved; grab the monero too if s_a leaked
            # (only possible when Alice raced a redeem and lost).
            if st.recovered_s_a is not None and st.xmr_lock_txid:
                if not st.sweep_broadcast:
                    aggregate = ScalarP(st.recovered_s_a.v + st.keys.cross_secret.v)
                    sweep = _xmr_sweep_tx(
                        p, st.xmr_lock_txid, p.amt_xmr, aggregate, mul_base_p(st.sweep_key_secret)
                    )
                    st.sweep_broadcast = True
                    actions.append(BroadcastTx("xmr", sweep, "sweep_xmr_bob"))
                elif (st.xmr_lock_txid, 0) in chains.xmr.spent:
                    st.state = "refunded"
                    actions.append(Note("state-change", {"party": "bob", "state": st.state}))
            else:
                st.state = "refunded"
                actions.append(Note("state-change", {"party": "bob", "state": st.state}))
        if confirmations(chains.btc, pre.txs.punish.txid):
            st.state = "punished"
            actions.append(Note("state-change", {"party": "bob", "state": st.state}))

    # Self-protection: cancel once the happy path ran out of time (or, for a
    # front-running Bob, as soon as the cancel becomes minable).
    if st.state in ("btc_locked", "xmr_lock_seen", "encsig_sent") and lock_confs:
        no_redeem = not confirmations(chains.btc, pre.txs.redeem.txid)
        if no_redeem and not st.cancel_requested:
            threshold = p.t1 - 1 if st.front_runs else p.t1
            if lock_confs >= threshold:
                st.cancel_requested = True
                actions.append(BroadcastTx("btc", _signed_cancel(pre, st.keys, False), "cancel_btc"))

    return st, actions
