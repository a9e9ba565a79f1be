"""Seedable, platform-independent random streams.

Algorithm (version ``pcg64-splitmix-v1``):

* A run seed feeds a SplitMix64 sequence.  Each named sub-stream
  ``k`` (see :data:`STREAM_IDS`) takes the SplitMix64 sequence seeded with
  ``seed ^ (k * 0x9E3779B97F4A7C15)`` and uses its first two outputs
  ``o1, o2`` as the 128-bit PCG state ``(o1 << 64) | o2`` and the
  increment ``(k << 1) | 1``.
* Raw 64-bit words come from PCG64 (128-bit LCG, XSL-RR output,
  state advanced before output).  numpy's ``PCG64`` bit generator
  implements exactly this and is used for speed.
* Uniforms on [0, 1) are ``(word >> 11) * 2**-53``.
* Normals use Box-Muller on consecutive uniform pairs ``(u1, u2)``:
  ``r = sqrt(-2 log(1 - u1))``, emitting ``r cos(2 pi u2)`` then
  ``r sin(2 pi u2)``.  An odd request discards the final sine.
"""

from __future__ import annotations

import numpy as np

GENERATOR_VERSION = "pcg64-splitmix-v1"

STREAM_IDS = {
    "init": 1,
    "interior": 2,
    "boundary": 3,
    "data": 4,
    "shuffle": 5,
    "eval": 6,
}

_M64 = (1 << 64) - 1


def splitmix64(x: int):
    """Infinite SplitMix64 output sequence starting from state ``x``."""
    x &= _M64
    while True:
        x = (x + 0x9E3779B97F4A7C15) & _M64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        yield z ^ (z >> 31)


def stream_state(seed: int, stream_id: int) -> tuple[int, int]:
    """The (state, inc) pair a named sub-stream starts from."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    gen = splitmix64((seed ^ (stream_id * 0x9E3779B97F4A7C15)) & _M64)
    o1, o2 = next(gen), next(gen)
    return (o1 << 64) | o2, (stream_id << 1) | 1


class Stream:
    """One named random sub-stream.  Owned by a single consumer."""

    def __init__(self, seed: int, name: str):
        if name not in STREAM_IDS:
            raise ValueError(f"unknown stream {name!r}")
        self.seed = int(seed)
        self.name = name
        state, inc = stream_state(self.seed, STREAM_IDS[name])
        self._bits = np.random.PCG64()
        self._bits.state = {
            "bit_generator": "PCG64",
            "state": {"state": state, "inc": inc},
            "has_uint32": 0,
            "uinteger": 0,
        }

    def raw(self, n: int) -> np.ndarray:
        return self._bits.random_raw(int(n)).astype(np.uint64, copy=False)

    def uniform(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        n = int(n)
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n]

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation by a stable argsort of ``n`` uniforms."""
        return np.argsort(self.uniform(n), kind="stable")


class Streams:
    """Lazily created, independent sub-streams for one run seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, Stream] = {}

    def __getitem__(self, name: str) -> Stream:
        if name not in self._streams:
            self._streams[name] = Stream(self.seed, name)
        return self._streams[name]
