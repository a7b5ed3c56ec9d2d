"""Tick loop binding a source to a bank of detectors."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .detector import ClickLog, DetectorConfig, DetectorState, attach_detectors
from .errors import ValidationError
from .signal import DEFAULT_BLOCK, SignalSource


def run_simulation(source: SignalSource, detectors: Sequence[DetectorState], T: int,
                   block: int = DEFAULT_BLOCK) -> ClickLog:
    """Draw ``T`` samples from ``source`` and step every detector on each.

    Samples are processed in blocks of ``block`` ticks; results do not depend
    on the block size except through floating-point summation order.
    """
    if T < 1:
        raise ValidationError("T must be at least 1")
    grid = source.grid
    t0 = source.tick
    ids, ticks = [], []
    done = 0
    while done < T:
        n = min(block, T - done)
        amps = source.sample_block(n)
        cache: dict[int, np.ndarray] = {}
        for det in detectors:
            kind = det.config.kind
            f = cache.get(id(kind))
            if f is None:
                f = cache[id(kind)] = kind.functional(amps, grid)
            per_tick = det.step_block(f / det.config.gamma)
            hit = np.flatnonzero(per_tick)
            if hit.size:
                reps = per_tick[hit]
                ticks.append(np.repeat(hit + (source.tick - n - t0), reps))
                ids.append(np.full(int(reps.sum()), det.id, dtype=np.int64))
        done += n
    n_det = max((d.id for d in detectors), default=-1) + 1
    if ids:
        ids_a, ticks_a = np.concatenate(ids), np.concatenate(ticks)
        order = np.lexsort((ids_a, ticks_a))
        ids_a, ticks_a = ids_a[order], ticks_a[order]
    else:
        ids_a = ticks_a = np.zeros(0, dtype=np.int64)
    return ClickLog(ids_a, ticks_a, T, n_det)


def split_ticks(T: int, replicas: int) -> list[int]:
    """Replica lengths summing to ``T``, longer ones first."""
    if replicas < 1:
        raise ValidationError("replicas must be at least 1")
    if T < replicas:
        raise ValidationError(f"T={T} cannot be split across {replicas} replicas")
    base, extra = divmod(T, replicas)
    return [base + (r < extra) for r in range(replicas)]


def run_replicas(source: SignalSource, configs: Sequence[DetectorConfig], T: int,
                 replicas: int = 1, workers: int | None = None,
                 block: int = DEFAULT_BLOCK) -> list[tuple[ClickLog, list[DetectorState]]]:
    """Run ``configs`` against independent replicas of ``source`` splitting ``T`` ticks.

    Replica ``r`` uses ``source.spawn(r)``, so results depend only on the
    source seed, never on ``source``'s current position or on ``workers``.
    """
    lengths = split_ticks(T, replicas)

    def one(r):
        src = source.spawn(r)
        states = attach_detectors(src, configs)
        return run_simulation(src, states, lengths[r], block), states

    if workers and workers > 1 and replicas > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(replicas)))
    return [one(r) for r in range(replicas)]
