"""Seeded random streams.

Every stream is a Philox (counter-based) generator keyed by a ``SeedSequence``
built from ``(seed, purpose, index)``. Simulations split their episodes into
fixed blocks of :data:`BLOCK` episodes; block ``b`` draws environment noise
from ``stream(seed, ENV, b)`` and policy noise from ``stream(seed, POLICY, b)``,
so results never depend on the order in which blocks are executed.
"""

import numpy as np

ENV = 0
POLICY = 1
COUPLING = 2
INSTANCE = 3

BLOCK = 4096


def stream(seed, purpose=0, index=0, *extra):
    """Return an independent generator for ``(seed, purpose, index, *extra)``."""
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, int(purpose), int(index), *map(int, extra)])
    return np.random.Generator(np.random.Philox(ss))


def blocks(episodes, block=BLOCK):
    """Yield ``(block_index, size)`` pairs covering ``episodes`` episodes."""
    b = 0
    done = 0
    while done < episodes:
        size = min(block, episodes - done)
        yield b, size
        done += size
        b += 1
