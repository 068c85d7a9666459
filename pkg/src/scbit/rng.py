"""Seedable random source with splittable sub-streams."""

import numpy as np


class RandomSource:
    """Pseudo-random source backing all stream generation.

    Wraps a PCG64 generator seeded through a ``SeedSequence``. ``spawn``
    derives statistically independent child sources, so each encoder lane
    (and each Monte Carlo trial) can own its own sub-stream while the whole
    experiment stays reproducible from one 64-bit seed.
    """

    def __init__(self, seed=None, _sequence=None):
        if _sequence is None:
            _sequence = np.random.SeedSequence(seed)
        self._sequence = _sequence
        self._gen = np.random.Generator(np.random.PCG64(_sequence))

    @property
    def seed(self):
        return self._sequence.entropy

    def spawn(self, n):
        """Split off ``n`` independent child sources."""
        return [RandomSource(_sequence=s) for s in self._sequence.spawn(n)]

    def uniform(self, size=None):
        """Uniform samples in [0, 1)."""
        return self._gen.random(size)

    def uniform_signed(self, size=None):
        """Uniform samples in [-1, 1)."""
        return self._gen.uniform(-1.0, 1.0, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def binomial(self, n, p):
        return int(self._gen.binomial(n, p))

    def sample_without_replacement(self, n, size):
        """``size`` distinct draws from ``range(n)``."""
        return self._gen.choice(n, size=size, replace=False)

    def __repr__(self):
        return f"RandomSource(seed={self.seed!r})"
