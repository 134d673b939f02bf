import random

import pytest

from xswap import adaptors as ad
from xswap.adaptors import (
    DecryptionError,
    EcdsaEncSig,
    EcdsaSignature,
    RecoveryError,
    SchnorrEncSig,
    SchnorrSignature,
)
from xswap.groups import (
    CrossScalar,
    DecodingError,
    PointP,
    PointQ,
    SECP_ORDER,
    ScalarP,
    ScalarQ,
    mul_base_p,
    mul_base_q,
    sample_cross_scalar,
)

MSG = b"a 32-byte-ish transaction sighash"


@pytest.fixture()
def ecdsa_key(rng):
    x = ScalarQ.random(rng)
    return x, mul_base_q(x)


@pytest.fixture()
def schnorr_key(rng):
    x = ScalarP.random(rng)
    return x, mul_base_p(x)


class TestEcdsaPlain:
    def test_sign_verify_round_trip(self, ecdsa_key):
        x, X = ecdsa_key
        sig = ad.ecdsa_sign(x, MSG)
        assert ad.ecdsa_verify(X, MSG, sig)

    def test_wrong_public_key_rejected(self, ecdsa_key, rng):
        x, _X = ecdsa_key
        sig = ad.ecdsa_sign(x, MSG)
        assert not ad.ecdsa_verify(mul_base_q(ScalarQ.random(rng)), MSG, sig)

    def test_flipped_message_bits_rejected(self, ecdsa_key):
        x, X = ecdsa_key
        sig = ad.ecdsa_sign(x, MSG)
        for byte_idx in range(0, len(MSG), 5):
            mutated = bytearray(MSG)
            mutated[byte_idx] ^= 0x10
            assert not ad.ecdsa_verify(X, bytes(mutated), sig)

    def test_low_s_output(self, ecdsa_key):
        x, _ = ecdsa_key
        for i in range(40):
            sig = ad.ecdsa_sign(x, MSG + bytes([i]))
            assert 1 <= sig.s.v <= SECP_ORDER // 2

    def test_zero_key_rejected(self):
        with pytest.raises(ValueError):
            ad.ecdsa_sign(ScalarQ(0), MSG)

    def test_deterministic(self, ecdsa_key):
        x, _ = ecdsa_key
        assert ad.ecdsa_sign(x, MSG) == ad.ecdsa_sign(x, MSG)


class TestEcdsaAdaptor:
    def test_enc_sign_enc_verify(self, ecdsa_key, rng):
        x, X = ecdsa_key
        y = sample_cross_scalar(rng)
        Y = mul_base_q(y)
        encsig = ad.ecdsa_enc_sign(x, Y, MSG)
        assert ad.ecdsa_enc_verify(X, Y, MSG, encsig)

    def test_enc_verify_wrong_key_or_message(self, ecdsa_key, rng):
        x, X = ecdsa_key
        y = sample_cross_scalar(rng)
        Y = mul_base_q(y)
        encsig = ad.ecdsa_enc_sign(x, Y, MSG)
        assert not ad.ecdsa_enc_verify(X, mul_base_q(sample_cross_scalar(rng)), MSG, encsig)
        assert not ad.ecdsa_enc_verify(X, Y, MSG + b"!", encsig)
        assert not ad.ecdsa_enc_verify(mul_base_q(ScalarQ.random(rng)), Y, MSG, encsig)

    def test_identity_inputs_rejected(self, ecdsa_key):
        x, X = ecdsa_key
        with pytest.raises(ValueError):
            ad.ecdsa_enc_sign(x, PointQ.identity(), MSG)
        y = CrossScalar(5)
        encsig = ad.ecdsa_enc_sign(x, mul_base_q(y), MSG)
        from dataclasses import replace

        crippled = replace(encsig, R_hat=PointQ.identity())
        assert not ad.ecdsa_enc_verify(X, mul_base_q(y), MSG, crippled)

    def test_decrypt_yields_valid_signature(self, ecdsa_key, rng):
        x, X = ecdsa_key
        y = sample_cross_scalar(rng)
        encsig = ad.ecdsa_enc_sign(x, mul_base_q(y), MSG)
        sig = ad.ecdsa_dec_sig(y, encsig)
        assert ad.ecdsa_verify(X, MSG, sig)
        assert sig.s.v <= SECP_ORDER // 2

    def test_decrypt_with_wrong_key_errors(self, ecdsa_key, rng):
        x, _ = ecdsa_key
        y = sample_cross_scalar(rng)
        encsig = ad.ecdsa_enc_sign(x, mul_base_q(y), MSG)
        with pytest.raises(DecryptionError):
            ad.ecdsa_dec_sig(CrossScalar(y.v + 1), encsig)

    def test_low_s_flip_case_constructed_by_search(self, ecdsa_key):
        # find a message where the raw decrypted s lands in the high half,
        # so normalization provably flipped it
        x, X = ecdsa_key
        y = CrossScalar(0x1234567890ABCDEF)
        Y = mul_base_q(y)
        flipped = None
        for i in range(200):
            m = MSG + i.to_bytes(2, "little")
            encsig = ad.ecdsa_enc_sign(x, Y, m)
            raw = (encsig.s_tilde.v * pow(y.v, -1, SECP_ORDER)) % SECP_ORDER
            if raw > SECP_ORDER // 2:
                flipped = (m, encsig, raw)
                break
        assert flipped is not None, "no high-s case found in 200 tries"
        m, encsig, raw = flipped
        sig = ad.ecdsa_dec_sig(y, encsig)
        assert sig.s.v == SECP_ORDER - raw
        assert ad.ecdsa_verify(X, m, sig)
        assert ad.ecdsa_rec_key(sig, encsig, Y) == y

    def test_recovery_round_trip_100_random_secrets(self, ecdsa_key):
        x, _X = ecdsa_key
        rng = random.Random(2024)
        both_branches = {True: 0, False: 0}
        for i in range(100):
            y = sample_cross_scalar(rng)
            Y = mul_base_q(y)
            m = MSG + i.to_bytes(2, "little")
            encsig = ad.ecdsa_enc_sign(x, Y, m)
            sig = ad.ecdsa_dec_sig(y, encsig)
            raw = (encsig.s_tilde.v * pow(y.v, -1, SECP_ORDER)) % SECP_ORDER
            both_branches[raw > SECP_ORDER // 2] += 1
            assert ad.ecdsa_rec_key(sig, encsig, Y) == y
        assert both_branches[True] > 0 and both_branches[False] > 0

    def test_recovers_one(self, ecdsa_key):
        x, _ = ecdsa_key
        y = CrossScalar(1)
        encsig = ad.ecdsa_enc_sign(x, mul_base_q(y), MSG)
        sig = ad.ecdsa_dec_sig(y, encsig)
        assert ad.ecdsa_rec_key(sig, encsig, mul_base_q(y)).v == 1

    def test_unrelated_signature_fails_recovery(self, ecdsa_key, rng):
        x, _ = ecdsa_key
        y = sample_cross_scalar(rng)
        Y = mul_base_q(y)
        encsig = ad.ecdsa_enc_sign(x, Y, MSG)
        unrelated = ad.ecdsa_sign(x, MSG)
        with pytest.raises(RecoveryError):
            ad.ecdsa_rec_key(unrelated, encsig, Y)


class TestSchnorrPlain:
    def test_sign_verify_round_trip(self, schnorr_key):
        x, X = schnorr_key
        sig = ad.schnorr_sign(x, MSG)
        assert ad.schnorr_verify(X, MSG, sig)

    def test_wrong_key_and_message_rejected(self, schnorr_key, rng):
        x, X = schnorr_key
        sig = ad.schnorr_sign(x, MSG)
        assert not ad.schnorr_verify(mul_base_p(ScalarP.random(rng)), MSG, sig)
        assert not ad.schnorr_verify(X, MSG + b"!", sig)


class TestSchnorrAdaptor:
    def test_enc_sign_dec_verify_round_trip(self, schnorr_key, rng):
        x, X = schnorr_key
        y = sample_cross_scalar(rng)
        Y = mul_base_p(y)
        encsig = ad.schnorr_enc_sign(x, Y, MSG)
        assert ad.schnorr_enc_verify(X, Y, MSG, encsig)
        sig = ad.schnorr_dec_sig(y, encsig)
        assert ad.schnorr_verify(X, MSG, sig)

    def test_enc_verify_wrong_encryption_key(self, schnorr_key, rng):
        x, X = schnorr_key
        y = sample_cross_scalar(rng)
        encsig = ad.schnorr_enc_sign(x, mul_base_p(y), MSG)
        assert not ad.schnorr_enc_verify(X, mul_base_p(sample_cross_scalar(rng)), MSG, encsig)

    def test_recovery_exact_100_random_secrets(self, schnorr_key):
        x, _ = schnorr_key
        rng = random.Random(31337)
        for i in range(100):
            y = sample_cross_scalar(rng)
            encsig = ad.schnorr_enc_sign(x, mul_base_p(y), MSG + bytes([i % 256]))
            sig = ad.schnorr_dec_sig(y, encsig)
            assert ad.schnorr_rec_key(sig, encsig) == y

    def test_identity_encryption_key_rejected(self, schnorr_key):
        x, _ = schnorr_key
        with pytest.raises(ValueError):
            ad.schnorr_enc_sign(x, PointP.identity(), MSG)

    def test_wrong_decryption_key_errors(self, schnorr_key, rng):
        x, _ = schnorr_key
        y = sample_cross_scalar(rng)
        encsig = ad.schnorr_enc_sign(x, mul_base_p(y), MSG)
        with pytest.raises(DecryptionError):
            ad.schnorr_dec_sig(CrossScalar(y.v ^ 1), encsig)

    def test_mismatched_pair_fails_recovery(self, schnorr_key, rng):
        x, _ = schnorr_key
        y = sample_cross_scalar(rng)
        encsig = ad.schnorr_enc_sign(x, mul_base_p(y), MSG)
        other = ad.schnorr_sign(x, MSG)
        with pytest.raises(RecoveryError):
            ad.schnorr_rec_key(other, encsig)


class TestRobustness:
    """No adaptor operation may crash on malformed input."""

    def test_verify_functions_return_false_on_garbage(self, ecdsa_key, schnorr_key):
        _x, X = ecdsa_key
        _xp, XP = schnorr_key
        assert ad.ecdsa_verify(X, MSG, "junk") is False
        assert ad.ecdsa_verify("junk", MSG, ad.ecdsa_sign(_x, MSG)) is False
        assert ad.ecdsa_enc_verify(X, X, MSG, object()) is False
        assert ad.schnorr_verify(XP, MSG, None) is False
        assert ad.schnorr_enc_verify(XP, XP, MSG, 42) is False

    def test_codecs_round_trip_and_reject_bad_lengths(self, ecdsa_key, schnorr_key, rng):
        x, _ = ecdsa_key
        xp, _ = schnorr_key
        y = sample_cross_scalar(rng)
        sig = ad.ecdsa_sign(x, MSG)
        assert EcdsaSignature.decode(sig.encode()) == sig
        enc = ad.ecdsa_enc_sign(x, mul_base_q(y), MSG)
        assert EcdsaEncSig.decode(enc.encode()) == enc
        ssig = ad.schnorr_sign(xp, MSG)
        assert SchnorrSignature.decode(ssig.encode()) == ssig
        senc = ad.schnorr_enc_sign(xp, mul_base_p(y), MSG)
        assert SchnorrEncSig.decode(senc.encode()) == senc
        for cls in (EcdsaSignature, EcdsaEncSig, SchnorrSignature, SchnorrEncSig):
            with pytest.raises(DecodingError):
                cls.decode(b"\x01\x02\x03")
