import typing as th

import numpy as np

# stable ids so a stream never changes when new streams are added
STREAMS: th.Dict[str, int] = {
    "generation": 0,
    "initializer": 1,
    "optimizer": 2,
    "sampling": 3,
    "multistart": 4,
}


def seed_sequence(seed: int, stream: str, *key: int) -> np.random.SeedSequence:
    if stream not in STREAMS:
        raise KeyError(f"unknown random stream {stream!r}")
    return np.random.SeedSequence(entropy=seed, spawn_key=(STREAMS[stream], *key))


def generator(seed: int, stream: str, *key: int) -> np.random.Generator:
    """Independent generator for one named stage (and optionally one problem)."""
    return np.random.default_rng(seed_sequence(seed, stream, *key))


def int_seed(seed: int, stream: str, *key: int) -> int:
    # positive 31-bit seed for libraries that want a plain int (pycma treats 0 as "time")
    state = seed_sequence(seed, stream, *key).generate_state(1, dtype=np.uint32)[0]
    return int(state % (2**31 - 2)) + 1
