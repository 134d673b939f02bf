"""Deterministic scenario runner for both swap protocols.

A scenario is a fully seeded world: two fresh chains, funded wallets, the
complete off-chain setup, and two state machines driven tick by tick. One
tick = deliver queued messages, step Alice, step Bob (each step's actions
applied immediately), then mine one block per chain (per its cadence).
Messages sent in tick n are delivered in tick n+1.

Faults model the failure scenarios: the network can drop specific message
kinds or broadcast labels, parties can be offline for a tick window (their
step simply does not run), and mining can be given per-chain priority
hints so an adversary deterministically wins a mempool race.

Every scenario carries a balance-and-terminal-state oracle computed from
the swap parameters alone; ``run_scenario`` evaluates it and the CLI turns
a failed oracle into a nonzero exit code.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from . import chains as chainmod
from . import swap_btc_xmr as v1
from . import swap_xmr_btc as v2
from .actions import BroadcastTx, Chains, Note, SendMessage
from .chains import ChainState, check_conservation, confirmations, state_digest
from .groups import ScalarP, ScalarQ, mul_base_p, mul_base_q

PROTOCOLS = ("btc_xmr", "xmr_btc")

SCENARIOS = {
    "btc_xmr": ("happy", "no_encsig", "bob_silent_after_cancel", "front_run"),
    "xmr_btc": (
        "happy",
        "bob_never_locks",
        "alice_no_redeem",
        "alice_cheats",
        "alice_cheats_bob_offline",
    ),
}

DEFAULT_PARAMS = v1.SwapParams(
    amt_btc=100_000, amt_xmr=2_000_000, fee=1_000, t1=10, t2=5
)


class ScenarioError(ValueError):
    """Bad scenario/protocol combination or malformed configuration."""


@dataclass(frozen=True)
class FaultPlan:
    """Per-scenario misbehaviour and network-failure switches."""

    drop_messages: tuple = ()  # message kinds the network swallows
    drop_broadcasts: tuple = ()  # broadcast labels the network swallows
    offline: tuple = ()  # (party, from_tick, to_tick-or-None) windows
    alice_ignores_safety_margin: bool = False
    alice_cheats: bool = False
    bob_front_runs: bool = False
    bob_encsig_send_at_conf: int = 0
    alice_lock_patience: int = 12  # xmr blocks Alice waits for BTC_l
    priority: tuple = ()  # (chain, (label, ...)) mining priority hints


@dataclass(frozen=True)
class ScenarioConfig:
    protocol: str
    scenario: str
    seed: int = 1
    params: v1.SwapParams = DEFAULT_PARAMS
    horizon: int = 60
    btc_mine_every: int = 1
    xmr_mine_every: int = 1
    fault_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ScenarioError(
                f"unknown protocol {self.protocol!r}; valid: {', '.join(PROTOCOLS)}"
            )
        if self.scenario not in SCENARIOS[self.protocol]:
            raise ScenarioError(
                f"scenario {self.scenario!r} is not valid for protocol "
                f"{self.protocol!r}; valid: {', '.join(SCENARIOS[self.protocol])}"
            )
        if self.horizon < 1:
            raise ScenarioError("horizon must be positive")

    def faults(self) -> FaultPlan:
        plan = _scenario_faults(self.protocol, self.scenario, self.params)
        if self.fault_overrides:
            allowed = {f.name for f in FaultPlan.__dataclass_fields__.values()}
            unknown = set(self.fault_overrides) - set(FaultPlan.__dataclass_fields__)
            if unknown:
                raise ScenarioError(f"unknown fault overrides: {sorted(unknown)}")
            plan = replace(plan, **self.fault_overrides)
        return plan

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "scenario": self.scenario,
            "seed": self.seed,
            "params": self.params.to_json(),
            "horizon": self.horizon,
            "btc_mine_every": self.btc_mine_every,
            "xmr_mine_every": self.xmr_mine_every,
            "fault_overrides": self.fault_overrides,
        }


def _scenario_faults(protocol: str, scenario: str, params: v1.SwapParams) -> FaultPlan:
    if protocol == "btc_xmr":
        if scenario == "happy":
            return FaultPlan()
        if scenario == "no_encsig":
            return FaultPlan(drop_messages=("EncSigRedeem",))
        if scenario == "bob_silent_after_cancel":
            # Bob publishes the lock on tick 1 and is never heard from again.
            return FaultPlan(offline=(("bob", 2, None),))
        if scenario == "front_run":
            return FaultPlan(
                alice_ignores_safety_margin=True,
                bob_front_runs=True,
                bob_encsig_send_at_conf=params.t1 - params.redeem_safety_margin + 1,
                priority=(("btc", ("cancel_btc",)),),
            )
    else:
        if scenario == "happy":
            return FaultPlan()
        if scenario == "bob_never_locks":
            return FaultPlan(offline=(("bob", 1, None),))
        if scenario == "alice_no_redeem":
            return FaultPlan(drop_broadcasts=("redeem_btc",))
        if scenario == "alice_cheats":
            return FaultPlan(alice_cheats=True)
        if scenario == "alice_cheats_bob_offline":
            # Offline exactly through the emergency window: from the tick
            # Alice cheats until well after BTC_t becomes minable.
            return FaultPlan(alice_cheats=True, offline=(("bob", 3, params.t2 + 8),))
    raise ScenarioError(f"unhandled scenario {scenario!r}")  # pragma: no cover


@dataclass(frozen=True)
class EventRecord:
    tick: int
    actor: str
    kind: str  # message | broadcast | mined | state-change | recovered-secret | ...
    label: str
    digest: str

    def to_json(self) -> dict:
        return {
            "tick": self.tick,
            "actor": self.actor,
            "kind": self.kind,
            "label": self.label,
            "digest": self.digest,
        }


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


@dataclass
class RunResult:
    config: ScenarioConfig
    transcript: list
    balances: dict  # party -> chain -> int
    fees_paid: dict  # party -> chain -> int
    terminal: dict  # party -> state tag
    recovered: dict  # (party, name) -> hex value
    expected: dict
    oracle_ok: bool
    oracle_detail: str
    chain_digests: dict
    # non-serialized debris for tests
    world: object = None

    def transcript_digest(self) -> str:
        blob = "\n".join(json.dumps(ev.to_json(), sort_keys=True) for ev in self.transcript)
        return hashlib.sha256(blob.encode()).hexdigest()

    def transcript_jsonl(self) -> str:
        return "\n".join(json.dumps(ev.to_json(), sort_keys=True) for ev in self.transcript) + "\n"


def _child_rng(seed: int, name: str) -> random.Random:
    material = hashlib.sha256(f"xswap/{seed}/{name}".encode()).digest()
    return random.Random(int.from_bytes(material, "big"))


class _World:
    """Mutable run state shared by the setup and the tick loop."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.faults = config.faults()
        self.params = config.params
        self.btc = ChainState("btc")
        self.xmr = ChainState("xmr")
        self.chains = Chains(self.btc, self.xmr)
        self.transcript: list = []
        self.label_to_txid: dict = {}
        self.broadcaster: dict = {}  # (chain, txid) -> party
        self.inboxes = {"alice": [], "bob": []}
        self.pending = {"alice": [], "bob": []}
        self.recovered: dict = {}
        self.owned_keys = {"alice": {"btc": set(), "xmr": set()}, "bob": {"btc": set(), "xmr": set()}}
        self.alice = None
        self.bob = None
        self.alice_step: Optional[Callable] = None
        self.bob_step: Optional[Callable] = None
        self.setup_artifacts: dict = {}

    # -- logging ------------------------------------------------------------

    def log(self, tick: int, actor: str, kind: str, label: str, payload: bytes) -> None:
        self.transcript.append(EventRecord(tick, actor, kind, label, _digest(payload)))

    def log_message(self, tick: int, actor: str, msg, dropped: bool = False) -> None:
        kind = "message-dropped" if dropped else "message"
        self.log(tick, actor, kind, msg.kind, json.dumps(msg.to_json(), sort_keys=True).encode())

    # -- fault helpers --------------------------------------------------------

    def offline(self, party: str, tick: int) -> bool:
        for who, start, end in self.faults.offline:
            if who == party and tick >= start and (end is None or tick <= end):
                return True
        return False

    def offline_forever(self, party: str, tick: int) -> bool:
        return any(
            who == party and end is None and tick >= start
            for who, start, end in self.faults.offline
        )

    # -- action execution ----------------------------------------------------

    def apply_actions(self, tick: int, party: str, actions: list) -> None:
        for act in actions:
            if isinstance(act, BroadcastTx):
                self.label_to_txid.setdefault(act.label, act.tx.txid)
                if act.label in self.faults.drop_broadcasts:
                    self.log(tick, party, "broadcast-dropped", act.label, act.tx.canonical_bytes())
                    continue
                chain = self.btc if act.chain == "btc" else self.xmr
                result = chainmod.broadcast(chain, act.tx)
                label = act.label if result.accepted else f"{act.label}/rejected:{result.reason}"
                self.log(tick, party, "broadcast", label, act.tx.canonical_bytes())
                if result.accepted:
                    self.broadcaster.setdefault((act.chain, act.tx.txid), party)
            elif isinstance(act, SendMessage):
                msg = act.message
                if msg.kind in self.faults.drop_messages:
                    self.log_message(tick, party, msg, dropped=True)
                    continue
                self.log_message(tick, party, msg)
                target = "bob" if party == "alice" else "alice"
                self.pending[target].append(msg)
            elif isinstance(act, Note):
                payload = json.dumps(act.data, sort_keys=True).encode()
                if act.kind == "recovered-secret":
                    self.recovered[(act.data["party"], act.data["name"])] = act.data["value"]
                label = act.data.get("state") or act.data.get("name") or ""
                self.log(tick, party, act.kind, label, payload)

    def mine(self, tick: int) -> None:
        priority_by_chain = dict(self.faults.priority)
        for name, chain, every in (
            ("btc", self.btc, self.config.btc_mine_every),
            ("xmr", self.xmr, self.config.xmr_mine_every),
        ):
            if tick % every != 0:
                continue
            labels = priority_by_chain.get(name, ())
            prio = [self.label_to_txid[l] for l in labels if l in self.label_to_txid]
            mined = chainmod.mine_block(chain, priority=prio or None)
            for txid in mined:
                self.log(tick, name, "mined", txid.hex()[:16], txid)
            check_conservation(chain)


# ---------------------------------------------------------------------------
# Per-protocol world setup
# ---------------------------------------------------------------------------


def _setup_btc_xmr(w: _World) -> None:
    cfg, p, faults = w.config, w.params, w.faults
    arng = _child_rng(cfg.seed, "alice")
    brng = _child_rng(cfg.seed, "bob")

    alice_keys, bob_keys = v1.kgen_exchange(arng, brng)
    w.log_message(0, "alice", v1.kgen_message(alice_keys, "KeyGenA"))
    w.log_message(0, "bob", v1.kgen_message(bob_keys, "KeyGenB"))

    a_redeem = ScalarQ.random(arng)
    a_punish = ScalarQ.random(arng)
    b_refund = ScalarQ.random(brng)
    addresses = v1.SwapAddresses(
        redeem_a=mul_base_q(a_redeem),
        punish_a=mul_base_q(a_punish),
        refund_b=mul_base_q(b_refund),
    )
    w.log_message(
        0,
        "alice",
        v1.AddressesMessage(
            redeem_a=addresses.redeem_a, punish_a=addresses.punish_a, refund_b=addresses.refund_b
        ),
    )

    bob_wallet = ScalarQ.random(brng)
    alice_xmr_wallet = ScalarP.random(arng)
    btc_funding = w.btc.add_faucet(p.amt_btc + p.fee, mul_base_q(bob_wallet))
    xmr_funding = w.xmr.add_faucet(p.amt_xmr + p.fee, mul_base_p(alice_xmr_wallet))

    alice_pre, bob_pre, signing_msgs = v1.signing_protocol(
        p, alice_keys, bob_keys, addresses, btc_funding, p.amt_btc + p.fee
    )
    w.log_message(0, "bob", signing_msgs[0])
    w.log_message(0, "alice", signing_msgs[1])

    alice_sweep = ScalarP.random(arng)
    bob_sweep = ScalarP.random(brng)
    w.alice = v1.AliceState(
        params=p,
        keys=alice_keys,
        addresses=addresses,
        presigned=alice_pre,
        xmr_wallet_secret=alice_xmr_wallet,
        xmr_funding_txid=xmr_funding,
        sweep_key_secret=alice_sweep,
        ignore_safety_margin=faults.alice_ignores_safety_margin,
    )
    w.bob = v1.BobState(
        params=p,
        keys=bob_keys,
        addresses=addresses,
        presigned=bob_pre,
        btc_wallet_secret=bob_wallet,
        btc_funding_txid=btc_funding,
        sweep_key_secret=bob_sweep,
        front_runs=faults.bob_front_runs,
        encsig_send_at_conf=faults.bob_encsig_send_at_conf,
    )
    w.alice_step = v1.alice_step
    w.bob_step = v1.bob_step

    w.owned_keys["alice"]["btc"] = {addresses.redeem_a, addresses.punish_a}
    w.owned_keys["alice"]["xmr"] = {mul_base_p(alice_xmr_wallet), mul_base_p(alice_sweep)}
    w.owned_keys["bob"]["btc"] = {addresses.refund_b, mul_base_q(bob_wallet)}
    w.owned_keys["bob"]["xmr"] = {mul_base_p(bob_sweep)}

    w.label_to_txid.update(
        {
            "lock_btc": alice_pre.txs.lock.txid,
            "cancel_btc": alice_pre.txs.cancel.txid,
            "refund_btc": alice_pre.txs.refund.txid,
            "punish_btc": alice_pre.txs.punish.txid,
            "redeem_btc": alice_pre.txs.redeem.txid,
        }
    )
    w.setup_artifacts = {
        "alice_keys": alice_keys,
        "bob_keys": bob_keys,
        "addresses": addresses,
        "presigned": alice_pre,
    }


def _setup_xmr_btc(w: _World) -> None:
    cfg, p, faults = w.config, w.params, w.faults
    arng = _child_rng(cfg.seed, "alice")
    brng = _child_rng(cfg.seed, "bob")

    alice_keys = v2.v2_keys("alice", arng)
    bob_keys = v2.v2_keys("bob", brng)

    alice_xmr_wallet = ScalarP.random(arng)
    alice_refund_dest = ScalarP.random(arng)
    alice_take_dest = ScalarQ.random(arng)
    bob_wallet = ScalarQ.random(brng)
    bob_cancel_dest = ScalarQ.random(brng)
    bob_emergency_dest = ScalarQ.random(brng)
    bob_redeem_dest = ScalarP.random(brng)

    xmr_funding = w.xmr.add_faucet(p.amt_xmr + p.fee, mul_base_p(alice_xmr_wallet))
    btc_funding = w.btc.add_faucet(p.amt_btc + p.fee, mul_base_q(bob_wallet))

    xmr_side, xmr_msgs = v2.xmr_setup(
        p, alice_keys, bob_keys, xmr_funding, p.amt_xmr + p.fee, mul_base_p(alice_refund_dest)
    )
    btc_side, btc_msgs = v2.btc_setup(
        p,
        alice_keys,
        bob_keys,
        xmr_side,
        btc_funding,
        p.amt_btc + p.fee,
        mul_base_q(bob_cancel_dest),
        mul_base_q(alice_take_dest),
    )
    senders = {"alice": "alice", "bob": "bob"}
    for msg in xmr_msgs + btc_msgs:
        actor = getattr(msg, "sender", None)
        if actor is None:
            actor = "bob" if msg.kind in ("XmrRefundEncSig", "BtcTakeSig", "RedeemEncSig") else "alice"
        w.log_message(0, senders.get(actor, actor), msg)

    w.alice = v2.AliceStateV2(
        params=p,
        keys=alice_keys,
        xmr_side=xmr_side,
        btc_side=btc_side,
        xmr_wallet_secret=alice_xmr_wallet,
        xmr_refund_dest_secret=alice_refund_dest,
        btc_take_dest_secret=alice_take_dest,
        cheats=faults.alice_cheats,
        btc_lock_patience=faults.alice_lock_patience,
    )
    w.bob = v2.BobStateV2(
        params=p,
        keys=bob_keys,
        xmr_side=xmr_side,
        btc_side=btc_side,
        btc_wallet_secret=bob_wallet,
        btc_cancel_dest_secret=bob_cancel_dest,
        btc_emergency_dest_secret=bob_emergency_dest,
        xmr_redeem_dest_secret=bob_redeem_dest,
    )
    w.alice_step = v2.alice_step_v2
    w.bob_step = v2.bob_step_v2

    w.owned_keys["alice"]["btc"] = {mul_base_q(alice_take_dest)}
    w.owned_keys["alice"]["xmr"] = {mul_base_p(alice_xmr_wallet), mul_base_p(alice_refund_dest)}
    w.owned_keys["bob"]["btc"] = {
        mul_base_q(bob_wallet),
        mul_base_q(bob_cancel_dest),
        mul_base_q(bob_emergency_dest),
    }
    w.owned_keys["bob"]["xmr"] = {mul_base_p(bob_redeem_dest)}

    w.label_to_txid.update(
        {
            "lock_xmr": xmr_side.lock.txid,
            "refund_xmr": xmr_side.refund.txid,
            "lock_btc": btc_side.lock.txid,
            "cancel_btc": btc_side.cancel.txid,
            "redeem_btc": btc_side.redeem.txid,
            "take_btc": btc_side.take.txid,
        }
    )
    w.setup_artifacts = {
        "alice_keys": alice_keys,
        "bob_keys": bob_keys,
        "xmr_side": xmr_side,
        "btc_side": btc_side,
    }


# ---------------------------------------------------------------------------
# Oracles: expected terminal states and balances per scenario
# ---------------------------------------------------------------------------


def _expected(config: ScenarioConfig) -> dict:
    p = config.params
    amt, xamt, fee = p.amt_btc, p.amt_xmr, p.fee
    table = {
        ("btc_xmr", "happy"): {
            "balances": {"alice": {"btc": amt - fee, "xmr": 0}, "bob": {"btc": 0, "xmr": xamt - fee}},
            "terminal": {"alice": "redeemed", "bob": "monero_swept"},
        },
        ("btc_xmr", "no_encsig"): {
            "balances": {"alice": {"btc": 0, "xmr": xamt - fee}, "bob": {"btc": amt - 2 * fee, "xmr": 0}},
            "terminal": {"alice": "refunded", "bob": "refunded"},
        },
        ("btc_xmr", "bob_silent_after_cancel"): {
            "balances": {"alice": {"btc": amt - 2 * fee, "xmr": 0}, "bob": {"btc": 0, "xmr": 0}},
            "terminal": {"alice": "punished"},
            "xmr_lock_unspent": True,
        },
        ("btc_xmr", "front_run"): {
            "balances": {"alice": {"btc": 0, "xmr": 0}, "bob": {"btc": amt - 2 * fee, "xmr": xamt - fee}},
            "terminal": {"alice": "aborted", "bob": "refunded"},
        },
        ("xmr_btc", "happy"): {
            "balances": {"alice": {"btc": amt - fee, "xmr": 0}, "bob": {"btc": 0, "xmr": xamt - fee}},
            "terminal": {"alice": "btc_taken", "bob": "xmr_redeemed"},
        },
        ("xmr_btc", "bob_never_locks"): {
            "balances": {"alice": {"btc": 0, "xmr": xamt - fee}, "bob": {"btc": amt + fee, "xmr": 0}},
            "terminal": {"alice": "xmr_refunded"},
            "bob_btc_fees": 0,
        },
        ("xmr_btc", "alice_no_redeem"): {
            "balances": {"alice": {"btc": 0, "xmr": xamt - fee}, "bob": {"btc": amt - fee, "xmr": 0}},
            "terminal": {"alice": "xmr_refunded", "bob": "btc_cancelled"},
        },
        ("xmr_btc", "alice_cheats"): {
            "balances": {"alice": {"btc": 0, "xmr": xamt - fee}, "bob": {"btc": amt - fee, "xmr": 0}},
            "terminal": {"alice": "xmr_refunded", "bob": "emergency_refunded"},
        },
        ("xmr_btc", "alice_cheats_bob_offline"): {
            "balances": {
                "alice": {"btc": amt - fee, "xmr": xamt - fee},
                "bob": {"btc": 0, "xmr": 0},
            },
            "terminal": {"alice": "btc_taken", "bob": "aborted"},
        },
    }
    key = (config.protocol, config.scenario)
    expected = dict(table[key])
    if config.fault_overrides.get("alice_ignores_safety_margin") is False and key == (
        "btc_xmr",
        "front_run",
    ):
        # With the guard in force the race never starts and the run
        # degenerates to the ordinary refund outcome.
        expected["balances"] = {
            "alice": {"btc": 0, "xmr": xamt - fee},
            "bob": {"btc": amt - 2 * fee, "xmr": 0},
        }
        expected["terminal"] = {"alice": "refunded", "bob": "refunded"}
    return expected


def _evaluate_oracle(expected: dict, result: "RunResult", w: _World) -> tuple:
    problems = []
    for party, chains_ in expected["balances"].items():
        for chain_name, want in chains_.items():
            got = result.balances[party][chain_name]
            if got != want:
                problems.append(f"{party} {chain_name} balance {got} != expected {want}")
    for party, want_state in expected.get("terminal", {}).items():
        got_state = result.terminal[party]
        if got_state != want_state:
            problems.append(f"{party} terminal state {got_state!r} != expected {want_state!r}")
    if expected.get("xmr_lock_unspent"):
        lock_txid = w.label_to_txid.get("lock_xmr")
        if lock_txid is None or not confirmations(w.xmr, lock_txid):
            problems.append("xmr lock was never confirmed")
        elif (lock_txid, 0) in w.xmr.spent:
            problems.append("xmr lock output was spent but must stay locked")
    if "bob_btc_fees" in expected:
        got = result.fees_paid["bob"]["btc"]
        if got != expected["bob_btc_fees"]:
            problems.append(f"bob paid {got} in btc fees, expected {expected['bob_btc_fees']}")
    return (not problems, "; ".join(problems))


# ---------------------------------------------------------------------------
# The runner
# ---------------------------------------------------------------------------


def run_scenario(config: ScenarioConfig) -> RunResult:
    """Execute one scenario to its terminal states and evaluate its oracle."""
    w = _World(config)
    if config.protocol == "btc_xmr":
        _setup_btc_xmr(w)
        terminal_states = v1.TERMINAL_STATES
    else:
        _setup_xmr_btc(w)
        terminal_states = v2.TERMINAL_STATES_V2

    for tick in range(1, config.horizon + 1):
        w.inboxes["alice"], w.pending["alice"] = w.pending["alice"], []
        w.inboxes["bob"], w.pending["bob"] = w.pending["bob"], []
        for party, state, stepper in (
            ("alice", w.alice, w.alice_step),
            ("bob", w.bob, w.bob_step),
        ):
            if w.offline(party, tick):
                continue
            _state, actions = stepper(state, w.chains, w.inboxes[party])
            w.apply_actions(tick, party, actions)
        w.mine(tick)
        alice_done = w.alice.state in terminal_states
        bob_done = w.bob.state in terminal_states or w.offline_forever("bob", tick)
        if alice_done and bob_done and not w.pending["alice"] and not w.pending["bob"]:
            break

    balances = {
        party: {
            "btc": chainmod.balance(w.btc, keys["btc"]),
            "xmr": chainmod.balance(w.xmr, keys["xmr"]),
        }
        for party, keys in w.owned_keys.items()
    }
    fees = {p: {"btc": 0, "xmr": 0} for p in ("alice", "bob")}
    for (chain_name, txid), party in w.broadcaster.items():
        chain = w.btc if chain_name == "btc" else w.xmr
        entry = chain.confirmed.get(txid)
        if entry is not None:
            fees[party][chain_name] += entry[0].fee

    result = RunResult(
        config=config,
        transcript=w.transcript,
        balances=balances,
        fees_paid=fees,
        terminal={"alice": w.alice.state, "bob": w.bob.state},
        recovered=dict(w.recovered),
        expected={},
        oracle_ok=False,
        oracle_detail="",
        chain_digests={"btc": state_digest(w.btc), "xmr": state_digest(w.xmr)},
        world=w,
    )
    expected = _expected(config)
    ok, detail = _evaluate_oracle(expected, result, w)
    result.expected = expected
    result.oracle_ok = ok
    result.oracle_detail = detail
    return result
