"""Shared plumbing between the two protocol state machines and the harness.

State machine steps never touch the chains directly; they return a list of
actions for the harness to execute (and possibly drop, when simulating
faults). ``Note`` actions only feed the event log, e.g. to surface a
recovered secret so tests can compare it bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .chains import ChainState, SimTransaction


class ProtocolAbort(Exception):
    """A verification gate failed; carries a machine-readable reason."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


class Chains(NamedTuple):
    btc: ChainState
    xmr: ChainState


@dataclass(frozen=True)
class BroadcastTx:
    chain: str  # "btc" or "xmr"
    tx: SimTransaction
    label: str = ""  # human-readable name for the event log


@dataclass(frozen=True)
class SendMessage:
    message: object  # protocol message dataclass with .kind and .to_json()


@dataclass(frozen=True)
class Note:
    kind: str
    data: dict = field(default_factory=dict)
