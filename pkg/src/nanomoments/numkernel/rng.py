"""Counter-based random streams.

Every Monte Carlo sample owns a stream keyed by ``(seed, sample_index)``, so
that the value drawn for a sample never depends on which worker produced it or
in which order.  The underlying block cipher is Philox-4x64 from numpy; the
normal variates are produced here by the Box-Muller transform of its uniforms.
"""

import math

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0 ** -53


@njit(cache=True)
def _to_unit(raw):
    out = np.empty(raw.size)
    for i in range(raw.size):
        out[i] = (float(raw[i] >> np.uint64(11)) + 0.5) * _TWO_M53
    return out


@njit(cache=True)
def _box_muller(raw):
    """Normals from pairs (u_i, u_{i+half}) of uniforms built from raw words."""
    u = _to_unit(raw)
    half = u.size // 2
    z = np.empty(2 * half)
    for i in range(half):
        rad = math.sqrt(-2.0 * math.log(u[i]))
        ang = 2.0 * math.pi * u[half + i]
        z[i] = rad * math.cos(ang)
        z[half + i] = rad * math.sin(ang)
    return z


class RngStream:
    """A Philox stream at position ``counter`` under ``key``.

    Parameters
    ----------
    key : int
        64-bit master seed.
    counter : int
        128-bit starting block position.  Streams for distinct samples use
        disjoint counter blocks, see :meth:`for_sample`.

    Notes
    -----
    The stream is stateful: each draw advances the counter.  Two streams built
    from the same ``(key, counter)`` produce bit-identical output.
    """

    def __init__(self, key, counter=0):
        key = int(key)
        counter = int(counter)
        if key < 0 or key > MASK64:
            raise ValueError(f"key must be a 64-bit unsigned integer, got {key}")
        if counter < 0 or counter >= 1 << 128:
            raise ValueError("counter must fit in 128 bits")
        self.key = key
        self.start = counter
        self._bitgen = np.random.Philox(key=key, counter=counter)
        self._gen = None

    def reset(self, key, counter=0):
        """Rewind to ``(key, counter)``; equivalent to ``RngStream(key, counter)``.

        Rebinding the state of the existing generator is several times cheaper
        than constructing a new one, which matters when a worker walks through
        thousands of tiny samples.
        """
        key = int(key)
        counter = int(counter)
        if key < 0 or key > MASK64:
            raise ValueError(f"key must be a 64-bit unsigned integer, got {key}")
        if counter < 0 or counter >= 1 << 128:
            raise ValueError("counter must fit in 128 bits")
        self.key = key
        self.start = counter
        self._bitgen.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.array([counter & MASK64, counter >> 64, 0, 0], dtype=np.uint64),
                "key": np.array([key, 0], dtype=np.uint64),
            },
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self

    def reset_for_sample(self, seed, index):
        return self.reset(seed, int(index) << 64)

    @classmethod
    def for_sample(cls, seed, index):
        """Stream for Monte Carlo sample ``index``: the index fills the high 64 counter bits."""
        return cls(seed, int(index) << 64)

    @property
    def counter(self):
        """Current 256-bit Philox counter, as an int."""
        words = self._bitgen.state["state"]["counter"]
        return sum(int(w) << (64 * i) for i, w in enumerate(words))

    def uniform(self, size=None):
        """Uniform variates on the open interval (0, 1) with 53 random bits."""
        n = 1 if size is None else int(np.prod(size))
        u = _to_unit(self._bitgen.random_raw(n))
        return float(u[0]) if size is None else u.reshape(size)

    def gaussian(self, size=None):
        """Standard normal variates by the Box-Muller transform."""
        n = 1 if size is None else int(np.prod(size))
        half = (n + 1) // 2
        z = _box_muller(self._bitgen.random_raw(2 * half))
        return float(z[0]) if size is None else z[:n].reshape(size)

    def complex_gaussian(self, size):
        """Complex normals with E|z|^2 = 1."""
        g = self.gaussian((2,) + tuple(np.atleast_1d(size)))
        return (g[0] + 1j * g[1]) * np.sqrt(0.5)

    def beta(self, a, b):
        """Beta(a, b) variates, broadcasting over array parameters."""
        if self._gen is None:
            self._gen = np.random.Generator(self._bitgen)
        return self._gen.beta(a, b)

    def __repr__(self):
        return f"RngStream(key={self.key}, counter={self.start})"


def gaussian(stream, size=None):
    """Standard normal variate(s) drawn from ``stream``."""
    return stream.gaussian(size)
