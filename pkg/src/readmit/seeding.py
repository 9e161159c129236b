"""Named seed derivation: every random stream is a pure function of the
master seed and a path of names/indices."""
import hashlib

import numpy as np


def derive_seed(master: int, *path) -> int:
    key = "/".join([str(int(master))] + [str(p) for p in path])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little") >> 1


def rng(master: int, *path) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *path))
