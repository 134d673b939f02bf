"""Deterministic byte transcript for Fiat-Shamir challenge derivation.

Every (label, message) pair is appended to a running SHA-256 state with
length framing, so distinct append sequences can never collide and two
transcripts fed the same sequence always produce the same challenges.
"""

from __future__ import annotations

import hashlib


class Transcript:
    """Ordered, domain-separated log of protocol bytes."""

    def __init__(self, protocol_label: bytes):
        self._h = hashlib.sha256()
        self._append_framed(b"proto", protocol_label)

    def _append_framed(self, label: bytes, data: bytes) -> None:
        self._h.update(len(label).to_bytes(4, "little"))
        self._h.update(label)
        self._h.update(len(data).to_bytes(4, "little"))
        self._h.update(data)

    def append(self, label: bytes, data: bytes) -> None:
        if not isinstance(data, (bytes, bytearray)):
            raise TypeError("transcript data must be bytes")
        self._append_framed(label, bytes(data))

    def append_int(self, label: bytes, value: int, width: int = 32) -> None:
        self._append_framed(label, int(value).to_bytes(width, "little"))

    def challenge_bytes(self, label: bytes, n: int) -> bytes:
        """Extract n challenge bytes; also folds the extraction into the log."""
        out = b""
        counter = 0
        while len(out) < n:
            h = self._h.copy()
            h.update(len(label).to_bytes(4, "little"))
            h.update(label)
            h.update(counter.to_bytes(4, "little"))
            out += h.digest()
            counter += 1
        self._append_framed(b"challenge/" + label, out[:n])
        return out[:n]

    def challenge_int(self, label: bytes, bits: int) -> int:
        """Uniform integer in [0, 2**bits); bits need not be a multiple of 8."""
        nbytes = (bits + 7) // 8
        raw = int.from_bytes(self.challenge_bytes(label, nbytes), "little")
        return raw & ((1 << bits) - 1)
