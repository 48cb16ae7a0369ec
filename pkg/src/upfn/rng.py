"""Counter-based normal variates keyed by (seed, replicate, cell).

Every lattice cell owns one slot of a Philox4x64 block: cell ``i`` reads
block ``i // 4`` and slot ``i % 4``.  The key of the block cipher is
``(seed, replicate)``, so any sub-range of cells of any replicate can be
regenerated on its own without touching a sequential stream.
"""

from __future__ import annotations

import numpy as np

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def _uniform_open(words: np.ndarray) -> np.ndarray:
    # 53-bit uniforms strictly inside (0, 1)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


def normals(seed: int, replicate: int, start: int, count: int) -> np.ndarray:
    """Standard normals for cells ``start, ..., start + count - 1``.

    Box-Muller on the four words of each Philox block gives four variates
    (two cosine/sine pairs), so the value of a cell never depends on which
    other cells were requested.
    """
    if count <= 0:
        return np.empty(0)
    if seed < 0 or replicate < 0 or start < 0:
        raise ValueError("seed, replicate and start must be nonnegative")
    first_block = start // 4
    last_block = (start + count - 1) // 4
    nblocks = last_block - first_block + 1
    bitgen = np.random.Philox(key=[seed, replicate], counter=[first_block, 0, 0, 0])
    words = bitgen.random_raw(4 * nblocks).reshape(nblocks, 4)
    u1 = _uniform_open(words[:, 0::2])  # (nblocks, 2)
    u2 = _uniform_open(words[:, 1::2])
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = _TWO_PI * u2
    z = np.empty((nblocks, 4))
    z[:, 0::2] = radius * np.cos(angle)
    z[:, 1::2] = radius * np.sin(angle)
    z = z.ravel()
    offset = start - 4 * first_block
    return z[offset:offset + count]


def normal_batch(seed: int, replicates, count: int) -> np.ndarray:
    """Array of shape ``(len(replicates), count)``; row k is replicate ``replicates[k]``."""
    replicates = list(replicates)
    out = np.empty((len(replicates), count))
    for k, rep in enumerate(replicates):
        out[k] = normals(seed, rep, 0, count)
    return out
