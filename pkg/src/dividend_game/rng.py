"""Deterministic per-path random streams.

Each simulated path owns a private xoshiro256++ stream whose state is filled
by splitmix64 from (master seed, path index).  Results are therefore
bit-identical for a fixed seed regardless of how paths are distributed over
workers.  The compiled Monte Carlo kernels implement the same generator; this
pure-Python version exists for the reference engine and for equality tests
against the kernels.

Draw order per path is fixed: one uniform for the competitor indicator, one
uniform for the stopping randomization, then one standard normal per time
step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0


def splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class XoshiroStream:
    """xoshiro256++ seeded via splitmix64 from (master_seed, path_index)."""

    def __init__(self, master_seed: int, path_index: int):
        base = (int(master_seed) + _GOLDEN * (int(path_index) + 1)) & _MASK
        state = []
        for j in range(4):
            base = splitmix64((base + j) & _MASK)
            state.append(base)
        self._s = state
        self._spare = None

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[0] + s[3]) & _MASK, 23) + s[0]) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def normal(self) -> float:
        """Standard normal via the polar method, with the spare cached."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        while True:
            u = 2.0 * self.uniform() - 1.0
            v = 2.0 * self.uniform() - 1.0
            q = u * u + v * v
            if 0.0 < q < 1.0:
                break
        f = np.sqrt(-2.0 * np.log(q) / q)
        self._spare = v * f
        return u * f

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)])


@dataclass(frozen=True)
class PathDraws:
    """All randomness consumed by one simulated game path."""

    theta: bool
    u: float
    z: np.ndarray

    @classmethod
    def generate(cls, master_seed: int, path_index: int, n_steps: int, p: float) -> "PathDraws":
        stream = XoshiroStream(master_seed, path_index)
        theta = stream.uniform() < p
        u = stream.uniform()
        if u == 0.0:
            u = _INV_2_53
        return cls(theta=theta, u=u, z=stream.normals(n_steps))
