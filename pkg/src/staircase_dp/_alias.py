"""Walker/Vose alias tables for O(1) draws from a finite pmf."""

import numpy as np


class AliasTable:
    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a nonempty 1-D array")
        if np.any(p < 0) or not np.isfinite(p).all():
            raise ValueError("probabilities must be finite and nonnegative")
        total = p.sum()
        if total <= 0:
            raise ValueError("probabilities must not all be zero")
        size = p.size
        scaled = p * (size / total)
        accept = np.ones(size)
        alias = np.arange(size)
        small = [i for i in range(size) if scaled[i] < 1.0]
        large = [i for i in range(size) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large[-1]
            accept[s] = scaled[s]
            alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            if scaled[g] < 1.0:
                large.pop()
                small.append(g)
        # leftovers are 1 up to rounding
        for i in small + large:
            accept[i] = 1.0 if p[i] > 0 else 0.0
            alias[i] = i if p[i] > 0 else int(np.argmax(p))
        self.accept = accept
        self.alias = alias

    def __len__(self):
        return self.accept.size

    def sample(self, rng, size):
        column = rng.integers(0, self.accept.size, size=size)
        coin = rng.random(size=size)
        return np.where(coin < self.accept[column], column, self.alias[column])
