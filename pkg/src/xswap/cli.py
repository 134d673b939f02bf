"""Command-line front end: run scenarios, verify proofs, self-test.

Exit codes: 0 on success, 2 when an oracle or verification fails, 1 on
usage errors. The default seed comes from the XSWAP_SEED environment
variable when set.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from .dleq import PROOF_SIZE, MalformedProofError, dleq_prove, dleq_verify, proof_decode
from .groups import DecodingError, PointP, PointQ, sample_cross_scalar
from .harness import (
    DEFAULT_PARAMS,
    PROTOCOLS,
    SCENARIOS,
    ScenarioConfig,
    ScenarioError,
    run_scenario,
)
from .swap_btc_xmr import SwapParams

PROOF_FILE_SIZE = 33 + 32 + PROOF_SIZE


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="xswap", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run one swap scenario", add_help=True)
    run_p.add_argument("--protocol", choices=PROTOCOLS)
    run_p.add_argument("--scenario")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--config", help="JSON config file (flags override it)")
    run_p.add_argument("--out", help="write the JSONL transcript here")

    verify_p = sub.add_parser("verify-proof", help="verify a serialized cross-group proof")
    verify_p.add_argument("file", help="binary file: secp key (33) + ed key (32) + proof")

    sub.add_parser("selftest", help="run the built-in property and scenario suite")
    return parser


def _default_seed() -> int:
    env = os.environ.get("XSWAP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            print(f"error: XSWAP_SEED must be an integer, got {env!r}", file=sys.stderr)
            raise SystemExit(1)
    return 1


def _load_config(args) -> ScenarioConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            raise SystemExit(1)
    protocol = args.protocol or data.get("protocol")
    scenario = args.scenario or data.get("scenario")
    if not protocol or not scenario:
        print("error: --protocol and --scenario are required (flag or config)", file=sys.stderr)
        raise SystemExit(1)
    seed = args.seed if args.seed is not None else data.get("seed", _default_seed())
    params = DEFAULT_PARAMS
    if "params" in data:
        try:
            params = SwapParams(**data["params"])
        except (TypeError, ValueError) as exc:
            print(f"error: bad params: {exc}", file=sys.stderr)
            raise SystemExit(1)
    try:
        return ScenarioConfig(
            protocol=protocol,
            scenario=scenario,
            seed=seed,
            params=params,
            horizon=data.get("horizon", 60),
            btc_mine_every=data.get("btc_mine_every", 1),
            xmr_mine_every=data.get("xmr_mine_every", 1),
            fault_overrides=data.get("faults", {}),
        )
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(1)


def _cmd_run(args) -> int:
    config = _load_config(args)
    result = run_scenario(config)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(result.transcript_jsonl())
    print(f"protocol : {config.protocol}")
    print(f"scenario : {config.scenario} (seed {config.seed})")
    print(f"terminal : alice={result.terminal['alice']} bob={result.terminal['bob']}")
    for party in ("alice", "bob"):
        bal = result.balances[party]
        print(f"balance  : {party} btc={bal['btc']} xmr={bal['xmr']}")
    print(f"digest   : {result.transcript_digest()}")
    if result.oracle_ok:
        print("oracle   : pass")
        return 0
    print(f"oracle   : FAIL ({result.oracle_detail})")
    return 2


def _cmd_verify_proof(args) -> int:
    try:
        with open(args.file, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if len(blob) != PROOF_FILE_SIZE:
        print(f"invalid: expected {PROOF_FILE_SIZE} bytes, got {len(blob)}")
        return 2
    try:
        s_btc = PointQ.decode(blob[:33])
        s_xmr = PointP.decode(blob[33:65])
        proof = proof_decode(blob[65:])
    except DecodingError as exc:
        print(f"invalid: {exc}")
        return 2
    try:
        ok = dleq_verify(s_btc, s_xmr, proof)
    except MalformedProofError as exc:
        print(f"invalid: {exc}")
        return 2
    print("proof: valid" if ok else "proof: INVALID")
    return 0 if ok else 2


def _cmd_selftest() -> int:
    failures = []

    def section(name, fn):
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report, do not crash
            failures.append(f"{name}: {exc}")
            print(f"selftest {name:28s} FAIL ({exc})")
        else:
            print(f"selftest {name:28s} ok")

    def crypto_roundtrips():
        from . import adaptors as ad
        from .groups import ScalarP, ScalarQ, mul_base_p, mul_base_q

        rng = random.Random(99)
        x = ScalarQ.random(rng)
        X = mul_base_q(x)
        xp = ScalarP.random(rng)
        XP = mul_base_p(xp)
        for i in range(25):
            m = b"selftest" + i.to_bytes(2, "little")
            y = sample_cross_scalar(rng)
            e = ad.ecdsa_enc_sign(x, mul_base_q(y), m)
            assert ad.ecdsa_enc_verify(X, mul_base_q(y), m, e)
            sig = ad.ecdsa_dec_sig(y, e)
            assert ad.ecdsa_verify(X, m, sig)
            assert ad.ecdsa_rec_key(sig, e, mul_base_q(y)) == y
            es = ad.schnorr_enc_sign(xp, mul_base_p(y), m)
            assert ad.schnorr_enc_verify(XP, mul_base_p(y), m, es)
            ssig = ad.schnorr_dec_sig(y, es)
            assert ad.schnorr_verify(XP, m, ssig)
            assert ad.schnorr_rec_key(ssig, es) == y

    def cross_group_proof():
        rng = random.Random(7)
        s = sample_cross_scalar(rng)
        s_btc, s_xmr, proof = dleq_prove(s, rng)
        assert dleq_verify(s_btc, s_xmr, proof)
        wrong = sample_cross_scalar(rng)
        from .groups import mul_base_p

        assert not dleq_verify(s_btc, mul_base_p(wrong), proof)

    def scenarios():
        for protocol, names in SCENARIOS.items():
            for name in names:
                result = run_scenario(ScenarioConfig(protocol=protocol, scenario=name, seed=1))
                assert result.oracle_ok, f"{protocol}/{name}: {result.oracle_detail}"

    section("crypto-roundtrips", crypto_roundtrips)
    section("cross-group-proof", cross_group_proof)
    section("scenario-oracles", scenarios)
    if failures:
        print(f"selftest: {len(failures)} section(s) failed")
        return 2
    print("selftest: all sections passed")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        code = _cmd_run(args)
    elif args.command == "verify-proof":
        code = _cmd_verify_proof(args)
    elif args.command == "selftest":
        code = _cmd_selftest()
    else:
        parser.print_help()
        code = 1
    return code


if __name__ == "__main__":
    sys.exit(main())
