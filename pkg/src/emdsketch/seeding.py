"""Hierarchical seed splitting.

Every random draw in the package derives from one 64-bit root seed.  A child
seed is addressed by a path of small integers, by convention
``(module_id, pipeline_id, trial_id, ...)``, and is produced with numpy's
``SeedSequence`` spawn keys so that sibling streams never overlap.
"""
from __future__ import annotations

import numpy as np

# module ids, first component of every seed path
EMBED = 1
SKETCH = 2
NETS = 3
RECOVERY = 4
MEDIAN = 5
PACKING = 6
CALIBRATION = 7
BENCH = 8
INSTANCES = 9

MASK64 = (1 << 64) - 1


def child_seed(root: int, *path: int) -> int:
    """64-bit seed for the node ``path`` below ``root``."""
    ss = np.random.SeedSequence(int(root) & MASK64, spawn_key=tuple(int(p) for p in path))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def rng(root: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(root) & MASK64,
                                                        spawn_key=tuple(int(p) for p in path)))
