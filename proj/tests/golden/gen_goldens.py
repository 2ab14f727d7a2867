#!/usr/bin/env python3
"""Regenerates the golden files in this directory from an independent
implementation of the keyed stream and schedule pipeline (hashlib +
python-cryptography ChaCha20). Run from the repository root:

    python3 tests/golden/gen_goldens.py
"""

import hashlib
import math
import os
import struct

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

HERE = os.path.dirname(os.path.abspath(__file__))


class Stream:
    """key = SHA-256(seed); bytes = ChaCha20 keystream, zero nonce, 64-bit
    block counter from zero; u64 = next 8 bytes little-endian."""

    def __init__(self, seed: bytes):
        self.key = hashlib.sha256(seed).digest()
        self.buf = b""
        self.counter = 0

    def _refill(self):
        # python-cryptography's ChaCha20 takes the original 64-bit-counter
        # variant: nonce argument = counter (8 bytes LE) || nonce (8 bytes).
        full_nonce = struct.pack("<Q", self.counter) + b"\x00" * 8
        cipher = Cipher(algorithms.ChaCha20(self.key, full_nonce), mode=None)
        self.buf += cipher.encryptor().update(b"\x00" * 64)
        self.counter += 1

    def next_u64(self) -> int:
        while len(self.buf) < 8:
            self._refill()
        u = struct.unpack("<Q", self.buf[:8])[0]
        self.buf = self.buf[8:]
        return u

    def next_real(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53


def walk_chain(stream: Stream, n: int, probs: dict, n_slots: int) -> list:
    bits = []
    k = -n
    for _ in range(n_slots):
        drop = stream.next_real() < probs[k]
        bits.append(1 if drop else 0)
        if drop:
            k = 1 if k < 0 else min(k + 1, n)
        else:
            k = -1 if k > 0 else max(k - 1, -n)
    return bits


def to_schedule(bits: list, slot_ns: int):
    starts, durations = [], []
    i = 0
    while i < len(bits):
        if bits[i] == 1:
            j = i
            while j < len(bits) and bits[j] == 1:
                j += 1
            starts.append((i + 1) * slot_ns)
            durations.append((j - i) * slot_ns)
            i = j
        else:
            i += 1
    return starts, durations


def golden_keystream():
    s = Stream(b"abc")
    u64s = [s.next_u64() for _ in range(16)]
    out = ["# first 16 u64 draws of the stream seeded with \"abc\""]
    out += [str(u) for u in u64s]
    with open(os.path.join(HERE, "keystream_abc.txt"), "w") as f:
        f.write("\n".join(out) + "\n")


def golden_schedules():
    secret, wid = b"golden-secret", b"wm-7"
    rate, packet = 500000.0, 1500
    period_ns = 30_000_000_000
    slot_ns = round(1e9 * packet / rate)           # 3_000_000
    n_slots = math.ceil(rate * period_ns / 1e9 / packet)  # 10_000
    n = 2
    probs = {-2: 0.25, -1: 0.05, 1: 0.9, 2: 0.6}

    syn = Stream(secret + wid)
    lines = []
    for period in range(3):
        child = Stream(struct.pack(">Q", syn.next_u64()))
        bits = walk_chain(child, n, probs, n_slots)
        starts, durations = to_schedule(bits, slot_ns)
        lines.append(
            "period=%d D=%s E=%s"
            % (period, ",".join(map(str, starts)), ",".join(map(str, durations)))
        )
    with open(os.path.join(HERE, "schedules_golden.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    golden_keystream()
    golden_schedules()
    print("wrote", os.path.join(HERE, "keystream_abc.txt"))
    print("wrote", os.path.join(HERE, "schedules_golden.txt"))
