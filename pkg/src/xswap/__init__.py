"""Bitcoin/Monero atomic swap protocol engine with simulated chains.

Implements both swap directions over adaptor signatures and cross-group
discrete-log-equality proofs, executed against deterministic in-memory
ledgers. Simulation grade: none of the cryptography here is hardened for
production use.
"""

from .groups import (
    CROSS_SCALAR_BITS,
    CrossScalar,
    PointP,
    PointQ,
    ScalarP,
    ScalarQ,
    aux_generators,
    mul_base_p,
    mul_base_q,
    sample_cross_scalar,
)
from .dleq import (
    PROOF_SIZE,
    CrossGroupDleqProof,
    dleq_prove,
    dleq_verify,
    proof_decode,
    proof_encode,
)
from .adaptors import (
    EcdsaEncSig,
    EcdsaSignature,
    SchnorrEncSig,
    SchnorrSignature,
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
    schnorr_verify,
)
from .chains import (
    ChainState,
    SimOutput,
    SimTransaction,
    SpendClause,
    broadcast,
    confirmations,
    extract_witness,
    find_by_id,
    mine_block,
    scan_with_view_key,
)
from .harness import ScenarioConfig, run_scenario
from .swap_btc_xmr import SwapParams

__version__ = "0.1.0"
