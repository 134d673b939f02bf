"""Deterministic in-memory ledgers for the two simulated chains.

The "btc" chain verifies ECDSA signatures over secp keys; the "xmr" chain
verifies Schnorr signatures over ed keys and additionally carries a public
view key per output so a watcher holding the private view key can discover
outputs without being able to spend them.

Transactions spend exactly one parent output through one of its spend
clauses and must conserve value (sum of outputs + declared fee = parent
amount). Transaction ids and sighashes are digests of a canonical encoding
that excludes witnesses, so an unsigned transaction's id is stable and
children can be pre-signed before the parent is ever signed or published.

Relative timelocks: a transaction (or the clause it spends through) may
require the parent to have at least N confirmations at the current tip
before the spender can be mined. Broadcasting early is allowed; the
transaction waits in the mempool. Conflicting spends may coexist in the
mempool and are resolved at mining time by the caller-supplied priority
(default: broadcast order); losers are evicted once a conflicting spend
confirms.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from . import adaptors
from .groups import PointP, PointQ, ScalarP, mul_base_p

TXID_TAG = b"xswap/txid/v1"
SIGHASH_TAG = b"xswap/sighash/v1"

REJECT_BAD_SIGNATURE = "bad-signature"
REJECT_TIMELOCK = "timelock-unreachable"
REJECT_DOUBLE_SPEND = "double-spend"
REJECT_VALUE_MISMATCH = "value-mismatch"
REJECT_UNKNOWN_INPUT = "unknown-input"
REJECT_MALFORMED = "malformed"


class ChainError(ValueError):
    pass


class WitnessError(KeyError):
    """Requested key has no signature in the transaction's witness."""


@dataclass(frozen=True)
class SpendClause:
    """One way to spend an output: signatures for every key, after a delay.

    Keys are canonicalized by sorted encoding so that two parties building
    the same clause independently produce identical bytes.
    """

    required_keys: tuple
    rel_timelock: int = 0

    def __post_init__(self):
        if not self.required_keys:
            raise ChainError("spend clause needs at least one key")
        if self.rel_timelock < 0:
            raise ChainError("relative timelock must be non-negative")
        ordered = tuple(sorted(self.required_keys, key=lambda k: k.encode()))
        object.__setattr__(self, "required_keys", ordered)


@dataclass(frozen=True)
class TxInput:
    parent_txid: bytes
    vout: int
    clause: int


@dataclass(frozen=True)
class SimOutput:
    amount: int
    clauses: tuple
    view_key_pub: Optional[PointP] = None

    def __post_init__(self):
        if self.amount <= 0:
            raise ChainError("output amount must be positive")
        if not self.clauses:
            raise ChainError("output needs at least one spend clause")


@dataclass(frozen=True)
class SimTransaction:
    chain: str  # "btc" or "xmr"
    input: Optional[TxInput]  # None only for faucet (coinbase-style) mints
    outputs: tuple
    fee: int = 0
    rel_timelock: int = 0
    nonce: int = 0  # disambiguates otherwise-identical faucet transactions
    signatures: tuple = ()  # ((public key, signature), ...); excluded from txid

    def canonical_bytes(self) -> bytes:
        out = [b"B" if self.chain == "btc" else b"X"]
        if self.input is None:
            out.append(b"\x00")
        else:
            out.append(b"\x01")
            out.append(self.input.parent_txid)
            out.append(self.input.vout.to_bytes(4, "little"))
            out.append(self.input.clause.to_bytes(4, "little"))
        out.append(self.rel_timelock.to_bytes(4, "little"))
        out.append(self.fee.to_bytes(8, "little"))
        out.append(self.nonce.to_bytes(8, "little"))
        out.append(len(self.outputs).to_bytes(4, "little"))
        for o in self.outputs:
            out.append(o.amount.to_bytes(8, "little"))
            out.append(len(o.clauses).to_bytes(4, "little"))
            for clause in o.clauses:
                out.append(len(clause.required_keys).to_bytes(4, "little"))
                for key in clause.required_keys:
                    out.append(key.encode())
                out.append(clause.rel_timelock.to_bytes(4, "little"))
            if o.view_key_pub is None:
                out.append(b"\x00")
            else:
                out.append(b"\x01")
                out.append(o.view_key_pub.encode())
        return b"".join(out)

    @property
    def txid(self) -> bytes:
        return hashlib.sha256(TXID_TAG + self.canonical_bytes()).digest()

    @property
    def sighash(self) -> bytes:
        return hashlib.sha256(SIGHASH_TAG + self.canonical_bytes()).digest()

    def with_signatures(self, by_key: dict) -> "SimTransaction":
        """Attach one signature per clause key; returns a new transaction."""
        return replace(self, signatures=tuple(by_key.items()))


@dataclass(frozen=True)
class BroadcastResult:
    accepted: bool
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.accepted


_ACCEPT = BroadcastResult(True)


@dataclass
class ChainState:
    kind: str  # "btc" or "xmr"
    tip_height: int = 0
    confirmed: dict = field(default_factory=dict)  # txid -> (tx, height)
    spent: dict = field(default_factory=dict)  # (txid, vout) -> spender txid
    mempool: list = field(default_factory=list)
    minted: int = 0
    _arrivals: int = 0

    # -- building blocks ----------------------------------------------------

    def add_faucet(self, amount: int, key, view_key_pub: Optional[PointP] = None) -> bytes:
        """Mint an output to a single key, confirmed in its own fresh block."""
        clause = SpendClause((key,))
        tx = SimTransaction(
            chain=self.kind,
            input=None,
            outputs=(SimOutput(amount, (clause,), view_key_pub),),
            fee=0,
            nonce=self.minted + 1,
        )
        self.tip_height += 1
        self.confirmed[tx.txid] = (tx, self.tip_height)
        self.minted += amount
        return tx.txid

    def _verify_one(self, key, message: bytes, sig) -> bool:
        if self.kind == "btc":
            return isinstance(key, PointQ) and adaptors.ecdsa_verify(key, message, sig)
        return isinstance(key, PointP) and adaptors.schnorr_verify(key, message, sig)

    def _parent_output(self, tx: SimTransaction) -> Optional[SimOutput]:
        entry = self.confirmed.get(tx.input.parent_txid)
        parent = entry[0] if entry else None
        if parent is None:
            for cand in self.mempool:
                if cand.txid == tx.input.parent_txid:
                    parent = cand
                    break
        if parent is None or not 0 <= tx.input.vout < len(parent.outputs):
            return None
        return parent.outputs[tx.input.vout]


def broadcast(chain: ChainState, tx: SimTransaction) -> BroadcastResult:
    """Validate a transaction and admit it to the mempool.

    Conflicts with other mempool transactions are allowed (they race at
    mining time); conflicts with confirmed spends are rejected outright.
    """
    if tx.chain != chain.kind:
        return BroadcastResult(False, REJECT_MALFORMED)
    if tx.input is None:
        return BroadcastResult(False, REJECT_MALFORMED)
    if tx.txid in chain.confirmed or any(t.txid == tx.txid for t in chain.mempool):
        return _ACCEPT  # idempotent re-broadcast
    parent_out = chain._parent_output(tx)
    if parent_out is None:
        return BroadcastResult(False, REJECT_UNKNOWN_INPUT)
    if not 0 <= tx.input.clause < len(parent_out.clauses):
        return BroadcastResult(False, REJECT_UNKNOWN_INPUT)
    if chain.spent.get((tx.input.parent_txid, tx.input.vout)) is not None:
        return BroadcastResult(False, REJECT_DOUBLE_SPEND)
    if tx.fee < 0 or sum(o.amount for o in tx.outputs) + tx.fee != parent_out.amount:
        return BroadcastResult(False, REJECT_VALUE_MISMATCH)
    clause = parent_out.clauses[tx.input.clause]
    sig_by_key = dict(tx.signatures)
    if set(sig_by_key) != set(clause.required_keys):
        return BroadcastResult(False, REJECT_BAD_SIGNATURE)
    for key in clause.required_keys:
        if not chain._verify_one(key, tx.sighash, sig_by_key[key]):
            return BroadcastResult(False, REJECT_BAD_SIGNATURE)
    chain.mempool.append(tx)
    chain._arrivals += 1
    return _ACCEPT


def _required_lock(chain: ChainState, tx: SimTransaction) -> Optional[int]:
    parent_out = chain._parent_output(tx)
    if parent_out is None:
        return None
    clause = parent_out.clauses[tx.input.clause]
    return max(tx.rel_timelock, clause.rel_timelock)


def _minable(chain: ChainState, tx: SimTransaction) -> bool:
    entry = chain.confirmed.get(tx.input.parent_txid)
    if entry is None:
        return False  # parent still unconfirmed
    lock = _required_lock(chain, tx)
    if lock is None:
        return False
    parent_confs = chain.tip_height - entry[1] + 1
    return parent_confs >= lock


def mine_block(chain: ChainState, priority: Optional[list] = None) -> list:
    """Mine one block: include every minable mempool transaction.

    ``priority`` is an optional list of txids ranked first when conflicting
    spends are both minable; everything else keeps broadcast order. Returns
    the txids confirmed in this block.
    """
    candidates = [tx for tx in chain.mempool if _minable(chain, tx)]
    if priority:
        rank = {txid: i for i, txid in enumerate(priority)}
        candidates.sort(key=lambda tx: rank.get(tx.txid, len(rank)))
    new_height = chain.tip_height + 1
    included = []
    block_spends = set()
    for tx in candidates:
        outpoint = (tx.input.parent_txid, tx.input.vout)
        if outpoint in block_spends or outpoint in chain.spent:
            continue  # conflicting spend lost the race for this block
        block_spends.add(outpoint)
        included.append(tx)
    chain.tip_height = new_height
    for tx in included:
        if chain.spent.get((tx.input.parent_txid, tx.input.vout)) is not None:
            raise ChainError("double spend reached a confirmed block")
        chain.confirmed[tx.txid] = (tx, new_height)
        chain.spent[(tx.input.parent_txid, tx.input.vout)] = tx.txid
    mined_ids = {tx.txid for tx in included}
    survivors = []
    for tx in chain.mempool:
        if tx.txid in mined_ids:
            continue
        spender = chain.spent.get((tx.input.parent_txid, tx.input.vout))
        if spender is not None and spender != tx.txid:
            continue  # evicted: conflicts with a confirmed spend
        survivors.append(tx)
    chain.mempool = survivors
    return [tx.txid for tx in included]


def confirmations(chain: ChainState, txid: bytes) -> Optional[int]:
    """None if unknown, 0 while in the mempool, height-based count once mined."""
    entry = chain.confirmed.get(txid)
    if entry is not None:
        return chain.tip_height - entry[1] + 1
    if any(tx.txid == txid for tx in chain.mempool):
        return 0
    return None


def find_by_id(chain: ChainState, txid: bytes) -> Optional[SimTransaction]:
    entry = chain.confirmed.get(txid)
    if entry is not None:
        return entry[0]
    for tx in chain.mempool:
        if tx.txid == txid:
            return tx
    return None


def utxos(chain: ChainState) -> Iterator[tuple]:
    """Yield (txid, vout, output) for every unspent confirmed output."""
    for txid, (tx, _height) in chain.confirmed.items():
        for vout, output in enumerate(tx.outputs):
            if (txid, vout) not in chain.spent:
                yield txid, vout, output


def scan_with_view_key(chain: ChainState, view_secret: ScalarP) -> list:
    """All confirmed outputs whose public view key matches the secret."""
    target = mul_base_p(view_secret)
    hits = []
    for txid, (tx, _height) in chain.confirmed.items():
        for vout, output in enumerate(tx.outputs):
            if output.view_key_pub is not None and output.view_key_pub == target:
                hits.append((txid, vout, output))
    return hits


def extract_witness(tx: SimTransaction, key):
    """The signature bound to ``key`` in the transaction's witness."""
    for k, sig in tx.signatures:
        if k == key:
            return sig
    raise WitnessError(f"no signature for key {key!r} in witness")


def balance(chain: ChainState, keys) -> int:
    """Sum of unspent outputs spendable by a single key from ``keys``.

    Multi-key and multi-clause outputs are contested and count for nobody.
    """
    keyset = set(keys)
    total = 0
    for _txid, _vout, output in utxos(chain):
        if len(output.clauses) == 1:
            clause = output.clauses[0]
            if len(clause.required_keys) == 1 and clause.required_keys[0] in keyset:
                total += output.amount
    return total


def total_fees(chain: ChainState) -> int:
    return sum(tx.fee for tx, _h in chain.confirmed.values())


def check_conservation(chain: ChainState) -> None:
    """Assert minted value = unspent value + fees over confirmed history."""
    unspent = sum(o.amount for _t, _v, o in utxos(chain))
    if unspent + total_fees(chain) != chain.minted:
        raise ChainError(
            f"conservation violated on {chain.kind}: "
            f"{unspent} unspent + {total_fees(chain)} fees != {chain.minted} minted"
        )


def dump_json(chain: ChainState) -> dict:
    """JSON-friendly snapshot of the full chain state (golden-testable)."""

    def tx_json(tx: SimTransaction) -> dict:
        return {
            "txid": tx.txid.hex(),
            "canonical": tx.canonical_bytes().hex(),
            "fee": tx.fee,
            "witness": [
                {"key": k.encode().hex(), "sig": s.encode().hex()}
                for k, s in tx.signatures
            ],
        }

    return {
        "kind": chain.kind,
        "tip_height": chain.tip_height,
        "minted": chain.minted,
        "confirmed": [
            {"height": h, **tx_json(tx)} for tx, h in chain.confirmed.values()
        ],
        "mempool": [tx_json(tx) for tx in chain.mempool],
        "spent": sorted(
            f"{txid.hex()}:{vout}->{spender.hex()}"
            for (txid, vout), spender in chain.spent.items()
        ),
    }


def state_digest(chain: ChainState) -> str:
    """Deterministic hex digest of the chain state."""
    blob = json.dumps(dump_json(chain), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
