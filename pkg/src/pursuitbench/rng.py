"""Seed derivation for reproducible runs.

All randomness in the workbench flows from one master seed through named
sub-streams so that any stage (simulation, splitting, rotation, model init,
batch shuffling) can be reproduced in isolation.  A sub-stream is a PCG64
generator keyed by ``SeedSequence(master_seed, spawn_key=(stream, *key))``;
the stream ids below are frozen and part of the on-disk reproducibility
contract, so renumbering them invalidates existing fixtures.
"""
from __future__ import annotations

import numpy as np

# Frozen stream ids.
STREAM_SIM = 0        # per trajectory: (STREAM_SIM, label, index)
STREAM_SPLIT = 1      # train/test split shuffles
STREAM_ROTATION = 2   # rotation angles: (STREAM_ROTATION, role) role 0=train 1=test
STREAM_FOLDS = 3      # k-fold shuffles: (STREAM_FOLDS, condition, T)
STREAM_INIT = 4       # model init: (STREAM_INIT, family, condition, T, fold)
STREAM_BATCH = 5      # batch shuffles: (STREAM_BATCH, family, condition, T, fold)


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the PCG64 generator for a named sub-stream of ``master_seed``."""
    if any(k < 0 for k in key):
        raise ValueError(f"sub-stream key must be non-negative, got {key}")
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(seq))
