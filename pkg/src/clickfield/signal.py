"""Classical Gaussian random fields on a discretized spatial domain.

A field is sampled from its spectral representation

    phi(s) = sum_k sqrt(p_k) * xi_k(s) * psi_k

where ``psi_k`` are orthonormal mode functions on the grid (inner product
weighted by the cell volume ``dV``), ``p_k >= 0`` are energy weights and
``xi_k(s)`` are standard complex Gaussian coefficients (real and imaginary
parts independent with variance 1/2 each) evolving in internal time ``s``
either independently per tick or as a stationary AR(1) chain.

With this convention ``E[phi(x) conj(phi(y))] = sum_k p_k psi_k(x) conj(psi_k(y))``,
which is the covariance kernel ``D(x, y)``, and ``E ||phi||^2 = Tr D``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import NormalizationError, OrthonormalityError, ShapeError, ValidationError

ORTHONORMAL_TOL = 1e-10
DEFAULT_BLOCK = 1 << 16


def replica_seed_sequence(seed: int, replica: int = 0) -> np.random.SeedSequence:
    """Child seed for replica ``replica`` of base seed ``seed``.

    Splitting rule: ``SeedSequence(entropy=seed, spawn_key=(replica,))``. This is
    exactly what ``SeedSequence(seed).spawn(n)[replica]`` yields, so replicas
    are statistically independent streams.
    """
    if seed < 0 or replica < 0:
        raise ValidationError("seed and replica index must be nonnegative")
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replica),))


@dataclass(frozen=True)
class GridSpec:
    """Regular grid of ``M`` cells; ``dV`` defaults to ``1/M`` (unit total volume)."""

    cells_per_axis: tuple[int, ...]
    dV: float | None = None

    def __post_init__(self):
        cells = self.cells_per_axis
        if isinstance(cells, (int, np.integer)):
            cells = (int(cells),)
        cells = tuple(int(c) for c in cells)
        if not cells or any(c < 1 for c in cells):
            raise ValidationError(f"cells_per_axis must be positive integers, got {cells}")
        object.__setattr__(self, "cells_per_axis", cells)
        dv = 1.0 / int(np.prod(cells)) if self.dV is None else float(self.dV)
        if not np.isfinite(dv) or dv <= 0:
            raise ValidationError(f"dV must be positive, got {self.dV}")
        object.__setattr__(self, "dV", dv)

    @property
    def dimension(self) -> int:
        return len(self.cells_per_axis)

    @property
    def total_cells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    M = total_cells

    def flat_index(self, cell) -> int:
        """Flat (C-order) index of ``cell``, given either flat or as a per-axis tuple."""
        if isinstance(cell, (tuple, list)):
            if len(cell) != self.dimension:
                raise ShapeError(f"cell {cell} does not have {self.dimension} coordinates")
            return int(np.ravel_multi_index(tuple(int(c) for c in cell), self.cells_per_axis))
        idx = int(cell)
        if not 0 <= idx < self.total_cells:
            raise ShapeError(f"cell index {idx} outside grid of {self.total_cells} cells")
        return idx

    def inner(self, a, b) -> complex:
        """``<a, b> = sum_x a(x) conj(b(x)) dV`` (linear in the first slot)."""
        return complex(np.vdot(b, a) * self.dV)

    def norm(self, a) -> float:
        return float(np.sqrt(np.sum(np.abs(a) ** 2) * self.dV))

    def point_mode(self, cell) -> np.ndarray:
        """Unit-norm mode concentrated on a single cell."""
        v = np.zeros(self.total_cells, dtype=complex)
        v[self.flat_index(cell)] = 1.0 / np.sqrt(self.dV)
        return v

    def standard_basis(self) -> np.ndarray:
        """All point modes as rows of an ``M x M`` array."""
        return np.eye(self.total_cells, dtype=complex) / np.sqrt(self.dV)

    def uniform_mode(self) -> np.ndarray:
        return np.full(self.total_cells, 1.0 / np.sqrt(self.dV * self.total_cells), dtype=complex)

    def check_vector(self, a, what="vector") -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.total_cells,):
            raise ShapeError(f"{what} has shape {a.shape}, grid expects ({self.total_cells},)")
        if not np.all(np.isfinite(a)):
            raise ValidationError(f"{what} has non-finite entries")
        return a


@dataclass(frozen=True)
class FieldSample:
    """Field values over the grid at one internal-time tick."""

    amplitudes: np.ndarray
    tick: int

    def __post_init__(self):
        if self.tick < 0:
            raise ValidationError("tick must be nonnegative")


def gram_matrix(vectors, grid: GridSpec) -> np.ndarray:
    """``G[j, k] = <v_k, v_j>`` under the dV-weighted inner product."""
    v = np.atleast_2d(np.asarray(vectors, dtype=complex))
    return grid.dV * (v.conj() @ v.T)


def check_orthonormal(vectors, grid: GridSpec, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    """Return ``vectors`` as a ``K x M`` array or raise listing the offending pairs."""
    v = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if v.ndim != 2 or v.shape[1] != grid.total_cells:
        raise ShapeError(f"modes have shape {v.shape}, grid expects (K, {grid.total_cells})")
    if not np.all(np.isfinite(v)):
        raise ValidationError("modes have non-finite entries")
    g = gram_matrix(v, grid)
    bad = np.argwhere(np.abs(g - np.eye(len(v))) > tol)
    pairs = [(int(j), int(k), complex(g[j, k])) for j, k in bad if j <= k]
    if pairs:
        pairs = [(j, k, ip.real if j == k else ip) for j, k, ip in pairs]
        raise OrthonormalityError(pairs)
    return v


class CovarianceSpec:
    """Spectral form of a covariance operator ``D = sum_k p_k |psi_k><psi_k|``.

    ``modes`` is a ``K x M`` array of orthonormal grid functions and
    ``weights`` the ``K`` nonnegative energies.  Instances are immutable.
    """

    def __init__(self, grid: GridSpec, modes, weights):
        modes = check_orthonormal(modes, grid)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != len(modes):
            raise ShapeError(f"{len(modes)} modes but {len(w)} weights")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise ValidationError("at least one weight must be positive")
        modes.setflags(write=False)
        w.setflags(write=False)
        self.grid = grid
        self.modes = modes
        self.weights = w

    @property
    def trace(self) -> float:
        return float(np.sum(self.weights))

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.weights))

    def kernel_matrix(self) -> np.ndarray:
        """``K[x, y] = D(x, y) = sum_k p_k psi_k(x) conj(psi_k(y))``."""
        return (self.modes.T * self.weights) @ self.modes.conj()

    def kernel(self, x, y) -> complex:
        x, y = self.grid.flat_index(x), self.grid.flat_index(y)
        return complex(np.sum(self.weights * self.modes[:, x] * self.modes[:, y].conj()))

    def diagonal(self) -> np.ndarray:
        """``D(x, x)`` for every cell."""
        return np.real(self.weights @ (np.abs(self.modes) ** 2))

    def operator_matrix(self) -> np.ndarray:
        """Matrix of ``D`` acting on amplitude vectors (kernel times ``dV``)."""
        return self.kernel_matrix() * self.grid.dV

    def density_matrix(self) -> np.ndarray:
        """``rho = D / Tr D`` as a matrix on amplitude vectors."""
        return self.operator_matrix() / self.trace

    def quadratic_mean(self, op) -> float:
        """``Tr(D A) = E <A phi, phi>`` for an operator matrix ``A``."""
        op = np.asarray(op, dtype=complex)
        m = self.grid.total_cells
        if op.shape != (m, m):
            raise ShapeError(f"operator has shape {op.shape}, expected ({m}, {m})")
        vals = np.einsum("kx,xy,ky->k", self.modes.conj(), op, self.modes) * self.grid.dV
        return float(np.real(np.sum(self.weights * vals)))

    def describe(self) -> dict:
        return {
            "rank": self.rank,
            "trace": self.trace,
            "weights": [float(w) for w in self.weights],
            "diagonal_density": [float(d) for d in self.diagonal() * self.grid.dV / self.trace],
        }


@dataclass(frozen=True)
class TemporalModel:
    """Per-mode coefficient dynamics; ``kappa=0`` is white (fresh every tick).

    AR(1): ``xi(s+1) = kappa * xi(s) + sqrt(1 - kappa^2) * eta(s+1)``. The
    first coefficient is drawn from the stationary law, so the chain is
    stationary from tick 0 on.
    """

    kappa: float = 0.0

    def __post_init__(self):
        k = float(self.kappa)
        if not 0.0 <= k < 1.0:
            raise ValidationError(f"kappa must lie in [0, 1), got {self.kappa}")
        object.__setattr__(self, "kappa", k)

    @classmethod
    def white(cls) -> TemporalModel:
        return cls(0.0)

    @classmethod
    def ar1(cls, kappa: float) -> TemporalModel:
        return cls(kappa)

    @property
    def variant(self) -> str:
        return "white" if self.kappa == 0.0 else "ar1"

    def describe(self) -> dict:
        return {"variant": self.variant, "kappa": self.kappa}


WHITE = TemporalModel.white()


class SignalSource:
    """Seeded stream of field samples with a prescribed covariance.

    Single-owner mutable state: each call advances the random stream. Use
    :meth:`spawn` for an independent replica or :meth:`fresh` to replay the
    same stream from the beginning.
    """

    def __init__(
        self,
        covariance: CovarianceSpec,
        temporal: TemporalModel = WHITE,
        seed: int = 0,
        replica: int = 0,
        kind: str = "mixed",
    ):
        self.covariance = covariance
        self.temporal = temporal
        self.seed = int(seed)
        self.replica = int(replica)
        self.kind = kind
        self._rng = np.random.default_rng(replica_seed_sequence(self.seed, self.replica))
        self._amp = np.sqrt(covariance.weights)
        self._xi: np.ndarray | None = None
        self.tick = 0

    @property
    def grid(self) -> GridSpec:
        return self.covariance.grid

    @property
    def trace(self) -> float:
        return self.covariance.trace

    @property
    def coefficients(self) -> np.ndarray | None:
        """Mode coefficients of the most recent sample (``None`` before the first)."""
        return None if self._xi is None else self._xi.copy()

    def fresh(self) -> SignalSource:
        """Same spec, seed and replica, rewound to tick 0."""
        return self.spawn(self.replica)

    def spawn(self, replica: int) -> SignalSource:
        return SignalSource(self.covariance, self.temporal, self.seed, replica, self.kind)

    def coefficient_block(self, n: int) -> np.ndarray:
        """Advance ``n`` ticks and return the ``n x K`` coefficient history."""
        k = len(self._amp)
        eta = self._rng.standard_normal((n, k, 2)).view(np.complex128)[..., 0]
        eta *= np.sqrt(0.5)
        kappa = self.temporal.kappa
        if kappa == 0.0:
            xi = eta
        else:
            c = np.sqrt(1.0 - kappa * kappa)
            if self._xi is None:
                xi = np.empty_like(eta)
                xi[0] = eta[0]
                if n > 1:
                    xi[1:], _ = lfilter([c], [1.0, -kappa], eta[1:], axis=0, zi=kappa * xi[:1])
            else:
                xi, _ = lfilter([c], [1.0, -kappa], eta, axis=0, zi=kappa * self._xi[None, :])
        if n:
            self._xi = xi[-1].copy()
        self.tick += n
        return xi

    def sample_block(self, n: int) -> np.ndarray:
        """Advance ``n`` ticks and return the samples as an ``n x M`` array."""
        if n < 0:
            raise ValidationError("block length must be nonnegative")
        xi = self.coefficient_block(n)
        return (xi * self._amp) @ self.covariance.modes

    def next_sample(self) -> FieldSample:
        tick = self.tick
        return FieldSample(self.sample_block(1)[0], tick)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "temporal": self.temporal.describe(),
            **self.covariance.describe(),
        }


def build_pure_source(psi, epsilon: float, temporal: TemporalModel = WHITE, seed: int = 0,
                      grid: GridSpec | None = None) -> SignalSource:
    """Rank-one source with covariance ``epsilon * |Psi><Psi|`` for a unit-norm ``psi``."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    grid = GridSpec((len(psi),)) if grid is None else grid
    psi = grid.check_vector(psi, "Psi")
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    norm = grid.norm(psi)
    if abs(norm * norm - 1.0) > ORTHONORMAL_TOL:
        raise NormalizationError(f"Psi must have unit norm, ||Psi||^2 = {norm * norm:.12g}")
    cov = CovarianceSpec(grid, psi[None, :], [float(epsilon)])
    return SignalSource(cov, temporal, seed, kind="pure")


def build_mixed_source(modes: Sequence, weights: Sequence[float], temporal: TemporalModel = WHITE,
                       seed: int = 0, grid: GridSpec | None = None) -> SignalSource:
    """Source with covariance ``sum_k weights[k] |modes[k]><modes[k]|``."""
    modes = np.atleast_2d(np.asarray(modes, dtype=complex))
    grid = GridSpec((modes.shape[1],)) if grid is None else grid
    cov = CovarianceSpec(grid, modes, weights)
    return SignalSource(cov, temporal, seed, kind="mixed")


def next_sample(source: SignalSource) -> FieldSample:
    return source.next_sample()


def total_energy(sample, grid: GridSpec) -> float:
    """``sum_x |phi(x)|^2 dV``."""
    amps = sample.amplitudes if isinstance(sample, FieldSample) else np.asarray(sample)
    if amps.shape[-1:] != (grid.total_cells,):
        raise ShapeError(f"sample has {amps.shape[-1]} cells, grid has {grid.total_cells}")
    return float(np.sum(np.abs(amps) ** 2) * grid.dV)


def empirical_covariance(source: SignalSource, n_samples: int, return_stderr: bool = False,
                         block: int = DEFAULT_BLOCK):
    """Sample estimate of the kernel ``D(x, y)`` from ``n_samples`` fresh draws.

    The estimator is centered and normalized by ``n - 1``, so the result is
    Hermitian for any input. With ``return_stderr`` the Monte Carlo standard
    error of every entry is returned as a second (real) matrix.
    """
    if n_samples < 2:
        raise ValidationError("n_samples must be at least 2")
    m = source.grid.total_cells
    s1 = np.zeros(m, dtype=complex)
    s2 = np.zeros((m, m), dtype=complex)
    s4 = np.zeros((m, m)) if return_stderr else None
    left = n_samples
    while left:
        n = min(block, left)
        x = source.sample_block(n)
        s1 += x.sum(axis=0)
        s2 += x.T @ x.conj()
        if return_stderr:
            s4 += (np.abs(x) ** 2).T @ (np.abs(x) ** 2)
        left -= n
    mean = s1 / n_samples
    cov = (s2 - n_samples * np.outer(mean, mean.conj())) / (n_samples - 1)
    cov = 0.5 * (cov + cov.conj().T)
    if not return_stderr:
        return cov
    # Var of z = phi(x) conj(phi(y)) is E|z|^2 - |E z|^2.
    raw = s2 / n_samples
    var = np.maximum(s4 / n_samples - np.abs(raw) ** 2, 0.0)
    return cov, np.sqrt(var / n_samples)
