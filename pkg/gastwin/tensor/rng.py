# -*- coding: utf-8 -*-
"""
Seeded random number generation.

All randomness of the library (initialization, dropout, shuffling,
augmentation and synthetic data) is drawn from :class:`RngState` objects.
"""
import zlib
import numpy as np


class RngState:
    """
    Random state wrapping a :class:`numpy.random.Generator` driven by the
    ``PCG64`` bit generator, which yields the same sequence for the same seed
    on every platform.

    Attributes
    ----------
    seed : int
        Unsigned 64 bit seed.
    generator : :class:`numpy.random.Generator`
        The generator. Draws advance its state.
    """
    ALGORITHM = 'PCG64'

    def __init__(self, seed=0):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError('seed must be an unsigned 64 bit integer, got {}'
                             .format(seed))
        self.seed = seed
        self.generator = np.random.Generator(np.random.PCG64(seed))

    def __repr__(self):
        return 'RngState(seed={})'.format(self.seed)

    def spawn(self, key):
        """
        Derive an independent state from this seed and a string key.

        The derived seed only depends on :attr:`seed` and `key`, not on the
        draws made so far, e.g. ``RngState(seed).spawn(basename)`` gives the
        per-file states of the synthetic data generator.

        Parameters
        ----------
        key : str
            Key, e.g. a file basename or ``'epoch/3'``.
        """
        seq = np.random.SeedSequence([self.seed,
                                      zlib.crc32(str(key).encode('utf-8'))])
        return RngState(int(seq.generate_state(1, dtype=np.uint64)[0]))

    def random(self, size=None):
        return self.generator.random(size)

    def uniform(self, low=0., high=1., size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0., scale=1., size=None):
        return self.generator.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        """Draw integers from ``[low, high)``."""
        return self.generator.integers(low, high, size)

    def permutation(self, n):
        return self.generator.permutation(n)
