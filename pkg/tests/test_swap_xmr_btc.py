import random

import pytest

from xswap import adaptors as ad
from xswap import swap_xmr_btc as sw2
from xswap.actions import Chains, ProtocolAbort
from xswap.chains import ChainState, confirmations
from xswap.dleq import dleq_verify
from xswap.groups import ScalarP, ScalarQ, mul_base_p, mul_base_q
from xswap.swap_btc_xmr import SwapParams

PARAMS = SwapParams(amt_btc=100_000, amt_xmr=2_000_000, fee=1_000, t1=10, t2=5)


def _fixture_keys(seed_a=1, seed_b=2):
    return sw2.v2_keys("alice", random.Random(seed_a)), sw2.v2_keys("bob", random.Random(seed_b))


def _run_setup(alice, bob, arng=None, brng=None):
    arng = arng or random.Random(100)
    brng = brng or random.Random(200)
    refund_dest = mul_base_p(ScalarP.random(arng))
    xmr_side, xmr_msgs = sw2.xmr_setup(PARAMS, alice, bob, b"\x0a" * 32, 2_001_000, refund_dest)
    btc_side, btc_msgs = sw2.btc_setup(
        PARAMS,
        alice,
        bob,
        xmr_side,
        b"\x0b" * 32,
        101_000,
        mul_base_q(ScalarQ.random(brng)),
        mul_base_q(ScalarQ.random(arng)),
    )
    return xmr_side, btc_side, xmr_msgs, btc_msgs


class TestXmrSetup:
    def test_honest_run_encsig_verifies_for_alice(self):
        alice, bob = _fixture_keys()
        xmr_side, _btc, _m1, _m2 = _run_setup(alice, bob)
        assert ad.schnorr_enc_verify(
            bob.spend_xmr, alice.refund_pub_xmr, xmr_side.refund.sighash, xmr_side.refund_encsig
        )

    def test_lock_stays_unsigned_through_setup(self):
        # steps 4+5 (sign and publish XMR_l) only happen during execution,
        # after the whole bitcoin leg is signed
        alice, bob = _fixture_keys()
        xmr_side, btc_side, _m1, _m2 = _run_setup(alice, bob)
        assert xmr_side.lock.signatures == ()
        assert btc_side.lock.signatures == ()

    def test_tampered_refund_proof_aborts(self):
        alice, bob = _fixture_keys()
        alice.refund_pub_xmr = mul_base_p(ScalarP.random(random.Random(9)))
        with pytest.raises(ProtocolAbort) as exc:
            _run_setup(alice, bob)
        assert exc.value.reason == "bad-dleq"

    def test_refund_transaction_returns_funds_to_alice(self):
        alice, bob = _fixture_keys()
        xmr_side, _btc, _m1, _m2 = _run_setup(alice, bob)
        assert xmr_side.refund.input.parent_txid == xmr_side.lock.txid
        assert xmr_side.refund.outputs[0].amount == PARAMS.amt_xmr - PARAMS.fee

    def test_cross_representation_consistency(self):
        # R_A's secp and ed forms pass the cross-group verifier
        alice, _bob = _fixture_keys()
        assert dleq_verify(alice.refund_pub_btc, alice.refund_pub_xmr, alice.refund_proof)


class TestBtcSetup:
    def test_dual_construction_identical_txids(self):
        alice, bob = _fixture_keys()
        arng, brng = random.Random(100), random.Random(200)
        refund_dest = mul_base_p(ScalarP.random(arng))
        cancel_dest = mul_base_q(ScalarQ.random(brng))
        take_dest = mul_base_q(ScalarQ.random(arng))
        args_x = (PARAMS, alice.spend_xmr, bob.spend_xmr, mul_base_p(alice.view_secret + bob.view_secret), refund_dest, b"\x0a" * 32, 2_001_000)
        lx1, rx1 = sw2.build_xmr_transactions(*args_x)
        lx2, rx2 = sw2.build_xmr_transactions(*args_x)
        assert lx1.txid == lx2.txid and rx1.txid == rx2.txid
        args_b = (PARAMS, alice.cosign_public, bob.cosign_public, mul_base_q(alice.refund_secret.v), cancel_dest, take_dest, b"\x0b" * 32, 101_000)
        set1 = sw2.build_btc_transactions(*args_b)
        set2 = sw2.build_btc_transactions(*args_b)
        assert [t.txid for t in set1] == [t.txid for t in set2]

    def test_redeem_output_has_two_exits(self):
        alice, bob = _fixture_keys()
        _xmr, btc_side, _m1, _m2 = _run_setup(alice, bob)
        out = btc_side.redeem.outputs[0]
        assert len(out.clauses) == 2
        locked, instant = out.clauses
        assert locked.rel_timelock == PARAMS.t2
        assert set(locked.required_keys) == {alice.cosign_public, bob.cosign_public}
        assert instant.rel_timelock == 0
        assert set(instant.required_keys) == {alice.refund_pub_btc, bob.cosign_public}

    def test_signing_order_take_then_cancel_and_encsig(self):
        alice, bob = _fixture_keys()
        _xmr, btc_side, _m1, btc_msgs = _run_setup(alice, bob)
        kinds = [m.kind for m in btc_msgs]
        assert kinds.index("BtcTakeSig") < kinds.index("BtcCancelSig")
        assert kinds.index("BtcCancelSig") <= kinds.index("RedeemEncSig")
        assert ad.ecdsa_enc_verify(
            bob.cosign_public, alice.spend_btc, btc_side.redeem.sighash, btc_side.redeem_encsig
        )

    def test_fee_schedule(self):
        alice, bob = _fixture_keys()
        _xmr, btc_side, _m1, _m2 = _run_setup(alice, bob)
        assert btc_side.lock.fee == PARAMS.fee
        assert btc_side.cancel.fee == PARAMS.fee
        assert btc_side.redeem.fee == 0  # rides free; see module docstring
        assert btc_side.take.fee == PARAMS.fee
        assert btc_side.cancel.outputs[0].amount == PARAMS.amt_btc - PARAMS.fee
        assert btc_side.redeem.outputs[0].amount == PARAMS.amt_btc
        assert btc_side.take.outputs[0].amount == PARAMS.amt_btc - PARAMS.fee


class TestScenarioOutcomes:
    def test_happy_path(self, run_cached):
        r = run_cached("xmr_btc", "happy")
        assert r.oracle_ok, r.oracle_detail
        alice_keys = r.world.setup_artifacts["alice_keys"]
        assert r.recovered[("bob", "s_A")] == alice_keys.spend_secret.encode().hex()
        assert r.balances["alice"]["btc"] == PARAMS.amt_btc - PARAMS.fee
        assert r.balances["bob"]["xmr"] == PARAMS.amt_xmr - PARAMS.fee

    def test_take_waits_for_t2_window(self, run_cached):
        r = run_cached("xmr_btc", "happy")
        mined_tick = {}
        for ev in r.transcript:
            if ev.kind == "mined":
                mined_tick.setdefault(ev.digest, ev.tick)
        w = r.world
        redeem_id = w.label_to_txid["redeem_btc"].hex()[:16]
        take_id = w.label_to_txid["take_btc"].hex()[:16]
        redeem_mined = next(ev.tick for ev in r.transcript if ev.kind == "mined" and ev.label == redeem_id)
        take_mined = next(ev.tick for ev in r.transcript if ev.kind == "mined" and ev.label == take_id)
        assert take_mined - redeem_mined >= PARAMS.t2

    def test_bob_never_locks_draining_asymmetry(self, run_cached):
        r = run_cached("xmr_btc", "bob_never_locks")
        assert r.oracle_ok, r.oracle_detail
        assert r.fees_paid["bob"]["btc"] == 0
        assert r.fees_paid["alice"]["xmr"] == 2 * PARAMS.fee  # lock + refund
        assert r.balances["bob"]["btc"] == PARAMS.amt_btc + PARAMS.fee  # wallet untouched

    def test_alice_no_redeem_both_refund(self, run_cached):
        r = run_cached("xmr_btc", "alice_no_redeem")
        assert r.oracle_ok, r.oracle_detail
        assert r.terminal == {"alice": "xmr_refunded", "bob": "btc_cancelled"}

    def test_cheat_path_equals_cooperative_refund(self, run_cached):
        cheat = run_cached("xmr_btc", "alice_cheats")
        refund = run_cached("xmr_btc", "alice_no_redeem")
        assert cheat.oracle_ok, cheat.oracle_detail
        assert cheat.balances == refund.balances
        alice_keys = cheat.world.setup_artifacts["alice_keys"]
        assert cheat.recovered[("bob", "s_A")] == alice_keys.spend_secret.encode().hex()
        assert cheat.recovered[("bob", "r_A")] == alice_keys.refund_secret.encode().hex()

    def test_cheat_with_offline_bob_documents_loss(self, run_cached):
        r = run_cached("xmr_btc", "alice_cheats_bob_offline")
        assert r.oracle_ok, r.oracle_detail
        assert r.balances["alice"]["btc"] == PARAMS.amt_btc - PARAMS.fee
        assert r.balances["alice"]["xmr"] == PARAMS.amt_xmr - PARAMS.fee
        assert r.world.bob.abort_reason == "emergency-window-closed"

    def test_emergency_never_fires_without_cheat(self, run_cached):
        for scenario in ("happy", "bob_never_locks", "alice_no_redeem"):
            r = run_cached("xmr_btc", scenario)
            emergency = [ev for ev in r.transcript if "emergency" in ev.label]
            assert emergency == [], scenario


class TestEmergencyRefundOp:
    def test_window_closed_raises(self, run_cached):
        # in the offline-cheat run BTC_t confirmed, so a late emergency call
        # must refuse to fire
        r = run_cached("xmr_btc", "alice_cheats_bob_offline")
        w = r.world
        bob_state = w.bob
        bob_state.emergency_broadcast = False  # pretend he never tried
        with pytest.raises(ProtocolAbort) as exc:
            sw2.emergency_refund(bob_state, Chains(w.btc, w.xmr))
        assert exc.value.reason == "emergency-window-closed"

    def test_not_applicable_without_cheat(self, run_cached):
        r = run_cached("xmr_btc", "happy")
        w = r.world
        with pytest.raises(ProtocolAbort) as exc:
            sw2.emergency_refund(w.bob, Chains(w.btc, w.xmr))
        assert exc.value.reason == "emergency-not-applicable"
