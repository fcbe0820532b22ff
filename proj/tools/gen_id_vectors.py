#!/usr/bin/env python3
"""Reference generator for ephemeral-ID test vectors.

Independent of the C++ library: SHA-256 comes from hashlib and the fold is
written here directly. Output lines are `hex(preimage_27B),hex(id_4B)`.
"""
import argparse
import hashlib
import random
import struct


def fold(digest: bytes) -> bytes:
    while len(digest) > 4:
        half = len(digest) // 2
        digest = bytes(a ^ b for a, b in zip(digest[:half], digest[half:]))
    return digest


def preimage(device_id: bytes, battery: int, timestamp: int, epoch: int) -> bytes:
    assert len(device_id) == 18
    return device_id + bytes([battery]) + struct.pack(">Q", (timestamp // epoch) * epoch)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=128)
    ap.add_argument("--seed", type=int, default=20201)
    ap.add_argument("--out", default="data/vectors/ephemeral_ids.csv")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    cases = [preimage(bytes(18), 0, 0, 900), preimage(bytes([0xff] * 18), 255, 2**64 - 1, 1)]
    while len(cases) < args.count:
        epoch = rng.choice([1, 60, 300, 900, 3600])
        cases.append(preimage(bytes(rng.getrandbits(8) for _ in range(18)), rng.getrandbits(8),
                              rng.getrandbits(rng.choice([32, 40, 64])), epoch))
    with open(args.out, "w") as f:
        for p in cases:
            f.write(f"{p.hex()},{fold(hashlib.sha256(p).digest()).hex()}\n")


if __name__ == "__main__":
    main()
