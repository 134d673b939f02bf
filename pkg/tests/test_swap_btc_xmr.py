import copy
import random

import pytest

from xswap import adaptors as ad
from xswap import chains as ch
from xswap import swap_btc_xmr as sw
from xswap.actions import BroadcastTx, Chains, ProtocolAbort
from xswap.chains import ChainState, broadcast, confirmations, mine_block
from xswap.groups import ScalarP, ScalarQ, mul_base_p, mul_base_q, sample_cross_scalar

PARAMS = sw.SwapParams(amt_btc=100_000, amt_xmr=2_000_000, fee=1_000, t1=10, t2=5)


def _addresses(arng, brng):
    return sw.SwapAddresses(
        redeem_a=mul_base_q(ScalarQ.random(arng)),
        punish_a=mul_base_q(ScalarQ.random(arng)),
        refund_b=mul_base_q(ScalarQ.random(brng)),
    )


class TestKeyGeneration:
    def test_honest_exchange(self):
        alice, bob = sw.kgen_exchange(random.Random(1), random.Random(2))
        assert alice.peer_spend_btc == bob.spend_btc
        assert bob.peer_spend_btc == alice.spend_btc
        assert alice.peer_view_secret == bob.view_secret
        # the shared view key is the sum of both halves on either side
        assert alice.shared_view_secret == bob.shared_view_secret

    def test_deterministic_per_seed(self):
        a1, b1 = sw.kgen_exchange(random.Random(5), random.Random(6))
        a2, b2 = sw.kgen_exchange(random.Random(5), random.Random(6))
        assert a1.cross_secret == a2.cross_secret
        assert b1.dlsig_secret == b2.dlsig_secret
        assert a1.spend_xmr == a2.spend_xmr

    def test_substituted_spend_key_aborts(self):
        alice = sw.kgen_local(random.Random(1))
        bob = sw.kgen_local(random.Random(2))
        msg = sw.kgen_message(bob, "KeyGenB")
        from dataclasses import replace

        forged = replace(msg, spend_xmr=mul_base_p(sample_cross_scalar(random.Random(3))))
        with pytest.raises(ProtocolAbort) as exc:
            sw.kgen_absorb(alice, forged)
        assert exc.value.reason == "bad-dleq"


class TestBuildTransactions:
    def _keys(self):
        arng, brng = random.Random(1), random.Random(2)
        alice, bob = sw.kgen_exchange(arng, brng)
        return alice, bob, _addresses(arng, brng)

    def test_fee_arithmetic(self):
        alice, _bob, addrs = self._keys()
        txs = sw.build_transactions(
            PARAMS, alice.dlsig_public, alice.peer_dlsig_public, addrs, b"\x01" * 32, 101_000
        )
        assert txs.lock.outputs[0].amount == 100_000
        assert txs.cancel.outputs[0].amount == 99_000
        assert txs.punish.outputs[0].amount == 98_000
        assert txs.refund.outputs[0].amount == 98_000
        assert txs.redeem.outputs[0].amount == 99_000
        assert txs.cancel.rel_timelock == PARAMS.t1
        assert txs.punish.rel_timelock == PARAMS.t2

    def test_dataflow_children_reference_parents(self):
        alice, _bob, addrs = self._keys()
        txs = sw.build_transactions(
            PARAMS, alice.dlsig_public, alice.peer_dlsig_public, addrs, b"\x01" * 32, 101_000
        )
        assert txs.cancel.input.parent_txid == txs.lock.txid
        assert txs.redeem.input.parent_txid == txs.lock.txid
        assert txs.refund.input.parent_txid == txs.cancel.txid
        assert txs.punish.input.parent_txid == txs.cancel.txid

    def test_both_parties_build_identical_txids(self):
        alice, bob, addrs = self._keys()
        by_alice = sw.build_transactions(
            PARAMS, alice.dlsig_public, alice.peer_dlsig_public, addrs, b"\x01" * 32, 101_000
        )
        by_bob = sw.build_transactions(
            PARAMS, bob.peer_dlsig_public, bob.dlsig_public, addrs, b"\x01" * 32, 101_000
        )
        for name in ("lock", "cancel", "refund", "punish", "redeem"):
            assert getattr(by_alice, name).txid == getattr(by_bob, name).txid

    def test_excessive_fee_rejected(self):
        alice, _bob, addrs = self._keys()
        fat_fee = sw.SwapParams(amt_btc=100_000, amt_xmr=1, fee=50_000, t1=10, t2=5)
        with pytest.raises(ValueError):
            sw.build_transactions(
                fat_fee, alice.dlsig_public, alice.peer_dlsig_public, addrs, b"\x01" * 32, 200_000
            )

    def test_insufficient_funding_rejected(self):
        alice, _bob, addrs = self._keys()
        with pytest.raises(ValueError):
            sw.build_transactions(
                PARAMS, alice.dlsig_public, alice.peer_dlsig_public, addrs, b"\x01" * 32, 100_500
            )


class TestSigningProtocol:
    def _setup(self):
        arng, brng = random.Random(11), random.Random(22)
        alice, bob = sw.kgen_exchange(arng, brng)
        addrs = _addresses(arng, brng)
        btc = ChainState("btc")
        wallet = ScalarQ.random(brng)
        funding = btc.add_faucet(101_000, mul_base_q(wallet))
        return alice, bob, addrs, btc, wallet, funding

    def test_honest_run_cross_verifies(self):
        alice, bob, addrs, _btc, _wallet, funding = self._setup()
        alice_pre, bob_pre, _msgs = sw.signing_protocol(PARAMS, alice, bob, addrs, funding, 101_000)
        assert alice_pre.txs.lock.txid == bob_pre.txs.lock.txid
        assert ad.ecdsa_verify(bob.dlsig_public, bob_pre.txs.cancel.sighash, bob_pre.sig_cancel_b)
        assert ad.ecdsa_enc_verify(
            alice.dlsig_public, bob.spend_btc, bob_pre.txs.refund.sighash, bob_pre.encsig_refund
        )
        assert bob_pre.sig_refund_b is not None

    def test_bob_refund_path_executable_offline(self):
        # after signing, Bob can cancel and refund with no further input
        alice, bob, addrs, btc, wallet, funding = self._setup()
        _alice_pre, bob_pre, _ = sw.signing_protocol(PARAMS, alice, bob, addrs, funding, 101_000)
        lock = bob_pre.txs.lock.with_signatures(
            {mul_base_q(wallet): ad.ecdsa_sign(wallet, bob_pre.txs.lock.sighash)}
        )
        assert broadcast(btc, lock).accepted
        mine_block(btc)
        cancel = bob_pre.txs.cancel.with_signatures(
            {alice.dlsig_public: bob_pre.sig_cancel_a, bob.dlsig_public: bob_pre.sig_cancel_b}
        )
        assert broadcast(btc, cancel).accepted
        while not confirmations(btc, cancel.txid):
            mine_block(btc)
        sig_a = ad.ecdsa_dec_sig(bob.cross_secret, bob_pre.encsig_refund)
        refund = bob_pre.txs.refund.with_signatures(
            {alice.dlsig_public: sig_a, bob.dlsig_public: bob_pre.sig_refund_b}
        )
        assert broadcast(btc, refund).accepted
        mine_block(btc)
        assert confirmations(btc, refund.txid) == 1
        assert ch.balance(btc, {addrs.refund_b}) == 98_000
        ch.check_conservation(btc)

    def test_garbage_refund_encsig_aborts_before_lock(self):
        alice, bob, addrs, _btc, _wallet, funding = self._setup()
        bob_pre, msg_b = sw.bob_signing_message(PARAMS, bob, addrs, funding, 101_000)
        _alice_pre, msg_a = sw.alice_process_signing(PARAMS, alice, addrs, msg_b)
        # swap in a pre-signature for the wrong message
        bogus = ad.ecdsa_enc_sign(alice.dlsig_secret, bob.spend_btc, b"not the refund")
        from dataclasses import replace

        with pytest.raises(ProtocolAbort) as exc:
            sw.bob_process_signing(bob, bob_pre, replace(msg_a, encsig_refund=bogus))
        assert exc.value.reason == "bad-signature"

    def test_tampered_lock_template_aborts(self):
        alice, bob, addrs, _btc, _wallet, funding = self._setup()
        _bob_pre, msg_b = sw.bob_signing_message(PARAMS, bob, addrs, funding, 101_000)
        from dataclasses import replace
        from xswap.chains import SimOutput, SpendClause

        bad_tmpl = replace(
            msg_b.lock_template,
            outputs=(SimOutput(99_999, msg_b.lock_template.outputs[0].clauses),),
            fee=1_001,
        )
        with pytest.raises(ProtocolAbort) as exc:
            sw.alice_process_signing(PARAMS, alice, addrs, replace(msg_b, lock_template=bad_tmpl))
        assert exc.value.reason == "bad-lock-template"


class TestScenarioOutcomes:
    def test_happy_path_balances_and_leak(self, run_cached):
        r = run_cached("btc_xmr", "happy")
        assert r.oracle_ok, r.oracle_detail
        assert r.balances["alice"]["btc"] == PARAMS.amt_btc - PARAMS.fee
        assert r.balances["bob"]["xmr"] == PARAMS.amt_xmr - PARAMS.fee
        alice_keys = r.world.setup_artifacts["alice_keys"]
        assert r.recovered[("bob", "s_a")] == alice_keys.cross_secret.encode().hex()

    def test_refund_path_balances_and_leak(self, run_cached):
        r = run_cached("btc_xmr", "no_encsig")
        assert r.oracle_ok, r.oracle_detail
        assert r.balances["bob"]["btc"] == PARAMS.amt_btc - 2 * PARAMS.fee
        assert r.balances["alice"]["xmr"] == PARAMS.amt_xmr - PARAMS.fee
        bob_keys = r.world.setup_artifacts["bob_keys"]
        assert r.recovered[("alice", "s_b")] == bob_keys.cross_secret.encode().hex()

    def test_punish_path_and_locked_monero(self, run_cached):
        r = run_cached("btc_xmr", "bob_silent_after_cancel")
        assert r.oracle_ok, r.oracle_detail
        w = r.world
        lock_txid = w.label_to_txid["lock_xmr"]
        assert (lock_txid, 0) not in w.xmr.spent

        # attempt-spend oracle: neither party's own key material can move
        # the monero lock alone; the aggregate of both secrets can.
        alice_keys = w.setup_artifacts["alice_keys"]
        bob_keys = w.setup_artifacts["bob_keys"]
        aggregate_pub = alice_keys.spend_xmr + bob_keys.spend_xmr
        for lone_secret in (alice_keys.cross_secret, bob_keys.cross_secret):
            fork = copy.deepcopy(w.xmr)
            from xswap.chains import SimOutput, SimTransaction, SpendClause, TxInput

            grab = SimTransaction(
                "xmr",
                TxInput(lock_txid, 0, 0),
                (SimOutput(PARAMS.amt_xmr - PARAMS.fee, (SpendClause((mul_base_p(lone_secret.v),)),)),),
                fee=PARAMS.fee,
            )
            grab = grab.with_signatures(
                {aggregate_pub: ad.schnorr_sign(lone_secret.to_scalar_p(), grab.sighash)}
            )
            result = broadcast(fork, grab)
            assert not result.accepted and result.reason == "bad-signature"
        # sanity: with both secrets the same spend is accepted
        fork = copy.deepcopy(w.xmr)
        from xswap.chains import SimOutput, SimTransaction, SpendClause, TxInput

        combined = ScalarP(alice_keys.cross_secret.v + bob_keys.cross_secret.v)
        spend = SimTransaction(
            "xmr",
            TxInput(lock_txid, 0, 0),
            (SimOutput(PARAMS.amt_xmr - PARAMS.fee, (SpendClause((mul_base_p(combined),)),)),),
            fee=PARAMS.fee,
        )
        spend = spend.with_signatures({aggregate_pub: ad.schnorr_sign(combined, spend.sighash)})
        assert broadcast(fork, spend).accepted

    def test_front_run_unsafe_bob_takes_both(self, run_cached):
        r = run_cached("btc_xmr", "front_run")
        assert r.oracle_ok, r.oracle_detail
        # Bob saw the redeem in the mempool, recovered s_a, won the race
        assert ("bob", "s_a") in r.recovered
        assert r.balances["bob"]["btc"] == PARAMS.amt_btc - 2 * PARAMS.fee
        assert r.balances["bob"]["xmr"] == PARAMS.amt_xmr - PARAMS.fee
        # cancel confirmed, redeem evicted
        assert confirmations(r.world.btc, r.world.label_to_txid["cancel_btc"])
        assert confirmations(r.world.btc, r.world.label_to_txid["redeem_btc"]) is None

    def test_front_run_guard_keeps_alice_out_of_the_race(self, run_cached):
        r = run_cached(
            "btc_xmr",
            "front_run",
            fault_overrides={"alice_ignores_safety_margin": False},
        )
        assert r.oracle_ok, r.oracle_detail
        redeem_broadcasts = [
            ev for ev in r.transcript if ev.kind == "broadcast" and ev.label.startswith("redeem_btc")
        ]
        assert redeem_broadcasts == []
        assert r.terminal == {"alice": "refunded", "bob": "refunded"}


class TestSafetyMarginRule:
    def test_unsafe_depth_triggers_cancel_not_redeem(self):
        # drive Alice directly: encsig in hand but the t1 window nearly gone
        arng, brng = random.Random(31), random.Random(32)
        alice, bob = sw.kgen_exchange(arng, brng)
        addrs = _addresses(arng, brng)
        btc, xmr = ChainState("btc"), ChainState("xmr")
        wallet = ScalarQ.random(brng)
        funding = btc.add_faucet(101_000, mul_base_q(wallet))
        alice_pre, bob_pre, _ = sw.signing_protocol(PARAMS, alice, bob, addrs, funding, 101_000)
        lock = bob_pre.txs.lock.with_signatures(
            {mul_base_q(wallet): ad.ecdsa_sign(wallet, bob_pre.txs.lock.sighash)}
        )
        broadcast(btc, lock)
        # mine until inside the unsafe zone: confs + margin > t1
        while (confirmations(btc, lock.txid) or 0) + PARAMS.redeem_safety_margin <= PARAMS.t1:
            mine_block(btc)
        st = sw.AliceState(
            params=PARAMS,
            keys=alice,
            addresses=addrs,
            presigned=alice_pre,
            xmr_wallet_secret=ScalarP.random(arng),
            xmr_funding_txid=b"\x00" * 32,
            sweep_key_secret=ScalarP.random(arng),
            state="encsig_received",
        )
        encsig = ad.ecdsa_enc_sign(bob.dlsig_secret, alice.spend_btc, alice_pre.txs.redeem.sighash)
        alice_pre.encsig_redeem = encsig
        st.sig_redeem_b = ad.ecdsa_dec_sig(alice.cross_secret, encsig)
        _st, actions = sw.alice_step(st, Chains(btc, xmr), [])
        broadcast_labels = [a.label for a in actions if isinstance(a, BroadcastTx)]
        assert "redeem_btc" not in broadcast_labels
        assert "cancel_btc" in broadcast_labels
