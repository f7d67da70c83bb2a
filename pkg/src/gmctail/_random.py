"""Counter-based random streams.

Every random draw in the package is addressed by ``(seed, stream, index)``.
The bit generator is Philox keyed by the seed, with the counter's upper words
set to the block index and stream id, so the values attached to a replicate
never depend on how many replicates were requested or on scheduling.
"""
import numpy as np

# replicate blocks; changing this changes every sampled value
BLOCK_SIZE = 256

FIELD = 0
SCALING = 1
BOOTSTRAP = 2
PARETO = 3
PERPETUITY = 4
MULTIPLIER = 5
AUXILIARY = 6

_MAX_SEED = 2**128


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < _MAX_SEED:
        raise ValueError(f"seed must be a non-negative integer below 2**128, got {seed}")
    return seed


def counter_generator(seed, index=0, stream=0):
    """Return a Generator for block ``index`` of ``stream`` under ``seed``."""
    seed = check_seed(seed)
    if index < 0 or stream < 0:
        raise ValueError("index and stream must be non-negative")
    bitgen = np.random.Philox(key=seed, counter=[0, 0, int(index), int(stream)])
    return np.random.Generator(bitgen)


def block_slices(n, block_size=BLOCK_SIZE):
    """Yield ``(block_index, start, stop)`` covering ``range(n)``."""
    for b, start in enumerate(range(0, n, block_size)):
        yield b, start, min(start + block_size, n)


def standard_normal_rows(seed, n, width, stream=FIELD):
    """n x width standard normals; row k is a function of (seed, stream, k) only."""
    out = np.empty((n, width))
    for b, start, stop in block_slices(n):
        rng = counter_generator(seed, b, stream)
        out[start:stop] = rng.standard_normal((stop - start, width))
    return out


def uniform_samples(seed, n, stream=AUXILIARY):
    """n uniforms on [0, 1); value k is a function of (seed, stream, k) only."""
    out = np.empty(n)
    for b, start, stop in block_slices(n):
        out[start:stop] = counter_generator(seed, b, stream).random(stop - start)
    return out
