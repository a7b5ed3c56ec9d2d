"""Threshold ("click") detectors.

A detector integrates a nonnegative functional of the field, scaled by
``1/gamma``, tick after tick. Whenever the accumulated energy reaches the
threshold ``eps_click = C * Tr D`` it emits a click and keeps the remainder
(carry-over), so no collected energy is ever lost:

    clicks * eps_click + accumulator == sum of increments
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ShapeError, ValidationError
from .signal import (
    ORTHONORMAL_TOL,
    CovarianceSpec,
    FieldSample,
    GridSpec,
    SignalSource,
    check_orthonormal,
)

POVM_SQRT = "sqrt"
POVM_LITERAL = "literal"


def _amplitudes(sample) -> np.ndarray:
    return sample.amplitudes if isinstance(sample, FieldSample) else np.asarray(sample)


class DetectorKind:
    """What a detector integrates. Subclasses are immutable value objects.

    ``functional`` maps samples (``(..., M)``) to the per-tick integrand
    (before division by gamma); ``mean_functional`` is its ensemble mean
    for a Gaussian field with the given covariance.
    """

    def validate(self, grid: GridSpec) -> None:
        raise NotImplementedError

    def functional(self, amps: np.ndarray, grid: GridSpec) -> np.ndarray:
        raise NotImplementedError

    def mean_functional(self, cov: CovarianceSpec) -> float:
        raise NotImplementedError

    def operator(self, grid: GridSpec) -> np.ndarray:
        """Matrix of the quadratic form, for kinds that have one."""
        raise TypeError(f"{type(self).__name__} has no operator form")

    @property
    def label(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Position(DetectorKind):
    """Energy density at one cell: ``|phi(x0)|^2 dV``."""

    cell: int

    def validate(self, grid):
        grid.flat_index(self.cell)

    def functional(self, amps, grid):
        x = grid.flat_index(self.cell)
        return np.abs(amps[..., x]) ** 2 * grid.dV

    def mean_functional(self, cov):
        return float(cov.diagonal()[cov.grid.flat_index(self.cell)] * cov.grid.dV)

    def operator(self, grid):
        x = grid.flat_index(self.cell)
        op = np.zeros((grid.total_cells,) * 2, dtype=complex)
        op[x, x] = 1.0
        return op

    @property
    def label(self):
        return f"position[{self.cell}]"


@dataclass(frozen=True, eq=False)
class Region(DetectorKind):
    """Energy collected over a set of cells: ``sum_{x in V} |phi(x)|^2 dV``."""

    cells: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))

    def validate(self, grid):
        if not self.cells:
            raise ValidationError("region must contain at least one cell")
        for c in self.cells:
            grid.flat_index(c)

    def functional(self, amps, grid):
        idx = list(self.cells)
        return np.sum(np.abs(amps[..., idx]) ** 2, axis=-1) * grid.dV

    def mean_functional(self, cov):
        return float(np.sum(cov.diagonal()[list(self.cells)]) * cov.grid.dV)

    def operator(self, grid):
        op = np.zeros((grid.total_cells,) * 2, dtype=complex)
        op[self.cells, self.cells] = 1.0
        return op

    @property
    def label(self):
        return "region[" + ",".join(map(str, self.cells)) + "]"


@dataclass(frozen=True, eq=False)
class Antenna(DetectorKind):
    """Energy along a unit direction ``e``: ``|<phi, e>|^2``."""

    mode: np.ndarray
    name: str = "e"

    def __post_init__(self):
        object.__setattr__(self, "mode", np.asarray(self.mode, dtype=complex).reshape(-1))

    def validate(self, grid):
        check_orthonormal(self.mode[None, :], grid)

    def functional(self, amps, grid):
        return np.abs(amps @ self.mode.conj() * grid.dV) ** 2

    def mean_functional(self, cov):
        return cov.quadratic_mean(self.operator(cov.grid))

    def operator(self, grid):
        return grid.dV * np.outer(self.mode, self.mode.conj())

    @property
    def label(self):
        return f"antenna[{self.name}]"


@dataclass(frozen=True, eq=False)
class Subspace(DetectorKind):
    """Energy in a subspace ``L``: ``||P_L phi||^2`` for an orthonormal basis of ``L``."""

    basis: np.ndarray
    name: str = "L"

    def __post_init__(self):
        object.__setattr__(self, "basis", np.atleast_2d(np.asarray(self.basis, dtype=complex)))

    def validate(self, grid):
        check_orthonormal(self.basis, grid)

    def functional(self, amps, grid):
        coeff = amps @ self.basis.conj().T * grid.dV
        return np.sum(np.abs(coeff) ** 2, axis=-1)

    def mean_functional(self, cov):
        return cov.quadratic_mean(self.operator(cov.grid))

    def operator(self, grid):
        return grid.dV * (self.basis.T @ self.basis.conj())

    @property
    def label(self):
        return f"subspace[{self.name}]"


@dataclass(frozen=True, eq=False)
class Povm(DetectorKind):
    """Effect ``Q >= 0`` given as a matrix on amplitude vectors.

    ``mode="sqrt"`` integrates ``<Q phi, phi>`` and reproduces ``Tr rho Q``;
    ``mode="literal"`` integrates ``||Q phi||^2``, whose rate follows
    ``Tr rho Q^2`` instead.
    """

    matrix: np.ndarray
    mode: str = POVM_SQRT
    name: str = "Q"

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        if self.mode not in (POVM_SQRT, POVM_LITERAL):
            raise ValidationError(f"POVM mode must be 'sqrt' or 'literal', got {self.mode!r}")

    def validate(self, grid):
        q = self.matrix
        m = grid.total_cells
        if q.shape != (m, m):
            raise ShapeError(f"POVM effect has shape {q.shape}, expected ({m}, {m})")
        if not np.allclose(q, q.conj().T, atol=1e-10):
            raise ValidationError(f"POVM effect {self.name} is not Hermitian")
        lo = np.linalg.eigvalsh(q).min()
        if lo < -1e-10:
            raise ValidationError(f"POVM effect {self.name} is not positive semidefinite (min eigenvalue {lo:.3g})")

    def functional(self, amps, grid):
        qa = amps @ self.matrix.T
        if self.mode == POVM_SQRT:
            return np.maximum(np.real(np.sum(qa * amps.conj(), axis=-1)), 0.0) * grid.dV
        return np.sum(np.abs(qa) ** 2, axis=-1) * grid.dV

    def mean_functional(self, cov):
        return cov.quadratic_mean(self.operator(cov.grid) if self.mode == POVM_SQRT
                                  else self.matrix.conj().T @ self.matrix)

    def operator(self, grid):
        return self.matrix

    @property
    def label(self):
        return f"povm[{self.name},{self.mode}]"


@dataclass(frozen=True, eq=False)
class NonlinearPosition(DetectorKind):
    """Quadratic plus quartic energy at one cell: ``(|phi|^2 + alpha |phi|^4) dV``."""

    cell: int
    alpha: float = 0.0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValidationError(f"alpha must be nonnegative, got {self.alpha}")

    def validate(self, grid):
        grid.flat_index(self.cell)

    def functional(self, amps, grid):
        e2 = np.abs(amps[..., grid.flat_index(self.cell)]) ** 2
        return (e2 + self.alpha * e2 * e2) * grid.dV

    def mean_functional(self, cov):
        # Complex Gaussian: E|z|^4 = 2 (E|z|^2)^2.
        d = cov.diagonal()[cov.grid.flat_index(self.cell)]
        return float((d + 2.0 * self.alpha * d * d) * cov.grid.dV)

    @property
    def label(self):
        return f"nonlinear[{self.cell},alpha={self.alpha:g}]"


def tick_increment(kind: DetectorKind, sample, grid: GridSpec, gamma: float) -> float:
    """Energy collected by a ``kind`` detector during one tick."""
    amps = _amplitudes(sample)
    if amps.shape != (grid.total_cells,):
        raise ShapeError(f"sample has shape {amps.shape}, grid expects ({grid.total_cells},)")
    if gamma <= 0:
        raise ValidationError("gamma must be positive")
    return float(kind.functional(amps, grid)) / gamma


@dataclass(frozen=True)
class DetectorConfig:
    kind: DetectorKind
    C: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.C) and self.C > 0):
            raise ValidationError(f"C must be positive, got {self.C}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValidationError(f"gamma must be positive, got {self.gamma}")


@dataclass
class DetectorState:
    """Mutable accumulator of one detector bound to a source."""

    config: DetectorConfig
    threshold: float
    id: int
    accumulator: float = 0.0
    clicks: int = 0
    collected: float = 0.0

    @property
    def kind(self) -> DetectorKind:
        return self.config.kind

    def step(self, increment: float, tick: int = 0) -> int:
        """Add one increment; return the number of clicks fired at this tick."""
        if increment < 0:
            raise ValidationError("increment must be nonnegative")
        eps = self.threshold
        a = self.accumulator + increment
        self.collected += increment
        n = 0
        if a >= eps:
            n = int(math.floor(a / eps))
            a -= n * eps
            if a < 0.0:
                a = 0.0
            elif a >= eps:
                n += 1
                a -= eps
        self.accumulator = a
        self.clicks += n
        return n

    def step_block(self, increments: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`step` over consecutive ticks; returns clicks per tick.

        Threshold crossings are located on the running total
        ``accumulator + cumsum(increments)``, which is the carry-over rule
        without the per-tick modulo.
        """
        inc = np.asarray(increments, dtype=float)
        if inc.size == 0:
            return np.zeros(0, dtype=np.int64)
        eps = self.threshold
        total = self.accumulator + np.cumsum(inc)
        crossed = np.floor(total / eps).astype(np.int64)
        per_tick = np.diff(crossed, prepend=0)
        n = int(crossed[-1])
        a = float(total[-1] - n * eps)
        if a < 0.0:
            a = 0.0
        elif a >= eps:
            per_tick[-1] += 1
            n += 1
            a -= eps
        self.accumulator = a
        self.clicks += n
        self.collected += float(inc.sum())
        return per_tick

    def accounting_error(self) -> float:
        """Relative mismatch of ``clicks * threshold + accumulator`` against collected energy."""
        lhs = self.clicks * self.threshold + self.accumulator
        return abs(lhs - self.collected) / max(self.collected, self.threshold)


def detector_step(state: DetectorState, increment: float, tick: int = 0) -> int:
    return state.step(increment, tick)


def attach_detectors(source: SignalSource, configs: Sequence[DetectorConfig],
                     first_id: int = 0) -> list[DetectorState]:
    """Fresh detector states with ``threshold = C * Tr D`` of ``source``."""
    states = []
    for i, cfg in enumerate(configs):
        cfg.kind.validate(source.grid)
        states.append(DetectorState(cfg, cfg.C * source.trace, first_id + i))
    return states


class Click(NamedTuple):
    detector_id: int
    tick: int


@dataclass
class ClickLog:
    """All clicks of a run, ordered by tick then detector id."""

    detector_ids: np.ndarray
    ticks: np.ndarray
    total_ticks: int
    n_detectors: int
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.detector_ids = np.asarray(self.detector_ids, dtype=np.int64)
        self.ticks = np.asarray(self.ticks, dtype=np.int64)
        self.counts = np.bincount(self.detector_ids, minlength=self.n_detectors).astype(np.int64)

    def __len__(self):
        return len(self.ticks)

    def __iter__(self) -> Iterator[Click]:
        for d, t in zip(self.detector_ids.tolist(), self.ticks.tolist()):
            yield Click(d, t)

    @property
    def clicks(self) -> list[Click]:
        return list(self)

    @property
    def total_clicks(self) -> int:
        return int(len(self.ticks))

    def ticks_of(self, detector_id: int) -> np.ndarray:
        return self.ticks[self.detector_ids == detector_id]

    def __eq__(self, other):
        if not isinstance(other, ClickLog):
            return NotImplemented
        return (self.total_ticks == other.total_ticks and self.n_detectors == other.n_detectors
                and np.array_equal(self.detector_ids, other.detector_ids)
                and np.array_equal(self.ticks, other.ticks))

    @classmethod
    def concatenate(cls, logs: Sequence[ClickLog]) -> ClickLog:
        """Join logs of consecutive runs, shifting ticks by the preceding run lengths."""
        offset, ids, ticks = 0, [], []
        for log in logs:
            ids.append(log.detector_ids)
            ticks.append(log.ticks + offset)
            offset += log.total_ticks
        n_det = max((log.n_detectors for log in logs), default=0)
        return cls(np.concatenate(ids) if ids else [], np.concatenate(ticks) if ticks else [],
                   offset, n_det)


def count_coincidences(ticks_a: np.ndarray, ticks_b: np.ndarray, window: int = 0) -> int:
    """Pairs (one click from each side) with ``|t_a - t_b| <= window``, each click used once.

    Greedy earliest-first matching on the sorted tick lists, which is maximal
    for interval matching on a line.
    """
    if window < 0:
        raise ValidationError("window must be nonnegative")
    a = np.sort(np.asarray(ticks_a, dtype=np.int64))
    b = np.sort(np.asarray(ticks_b, dtype=np.int64))
    if window == 0:
        ua, ca = np.unique(a, return_counts=True)
        ub, cb = np.unique(b, return_counts=True)
        _, ia, ib = np.intersect1d(ua, ub, assume_unique=True, return_indices=True)
        return int(np.minimum(ca[ia], cb[ib]).sum())
    i = j = n = 0
    la, lb = a.tolist(), b.tolist()
    while i < len(la) and j < len(lb):
        d = la[i] - lb[j]
        if -window <= d <= window:
            n += 1
            i += 1
            j += 1
        elif d < 0:
            i += 1
        else:
            j += 1
    return n


def operator_sum_residual(kinds: Sequence[DetectorKind], grid: GridSpec) -> np.ndarray:
    """``I - sum_k Q_k`` for a family of kinds with operator forms."""
    total = sum(k.operator(grid) for k in kinds)
    return np.eye(grid.total_cells) - total
