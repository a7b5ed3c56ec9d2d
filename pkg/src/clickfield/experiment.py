"""End-to-end click experiments with analytic targets.

Every experiment takes a :class:`SignalSource` only as a template: runs use
``source.spawn(r)`` for replica ``r``, so a report is a pure function of the
source spec, its seed and the experiment parameters.

Probabilities are always click counts normalized across the detector bank,
``P(k) = n_k / sum_j n_j``. Analytic targets are the normalized mean
increments of each detector; for quadratic detectors this is ``Tr(rho A_k)``.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from . import stats
from .detector import (
    POVM_LITERAL,
    Antenna,
    DetectorConfig,
    DetectorKind,
    NonlinearPosition,
    Position,
    Povm,
    Region,
    Subspace,
    count_coincidences,
    operator_sum_residual,
)
from .errors import InconclusiveRunError, ValidationError
from .report import DetectorRow, ExperimentReport
from .signal import DEFAULT_BLOCK, SignalSource, check_orthonormal
from .simulate import run_replicas

MIN_CLICKS = 100
COMPLETENESS_TOL = 1e-8


def _parameters(source: SignalSource, **extra) -> dict:
    grid = source.grid
    return {
        "seed": source.seed,
        "grid": {"cells_per_axis": list(grid.cells_per_axis), "dV": grid.dV},
        "source": source.describe(),
        **extra,
    }


def _merge(runs, n_det: int):
    counts = np.zeros(n_det, dtype=np.int64)
    err = 0.0
    for log, states in runs:
        counts[: log.n_detectors] += log.counts
        err = max([err] + [s.accounting_error() for s in states])
    return counts, err


def _targets(kinds: Sequence[DetectorKind], source: SignalSource) -> np.ndarray:
    means = np.array([k.mean_functional(source.covariance) for k in kinds])
    total = means.sum()
    return means / total if total > 0 else means


def _rows(counts, targets, labels, first_id=0, z=stats.Z95) -> list[DetectorRow]:
    n = int(np.sum(counts))
    rows = []
    for i, (c, t, lab) in enumerate(zip(counts, targets, labels)):
        ci = stats.wilson_interval(int(c), n, z)
        rows.append(DetectorRow(first_id + i, lab, int(c), ci.point, ci.low, ci.high,
                                float(t), abs(ci.point - float(t))))
    return rows


def _require_clicks(n: int, required: int = MIN_CLICKS):
    if n < max(required, 1):
        raise InconclusiveRunError(n, max(required, 1))


def _distribution(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    return counts / counts.sum()


def _rate_table(counts, T, C, gamma, targets, labels):
    table = []
    for c, t, lab in zip(counts, targets, labels):
        r = stats.rate_with_stderr(int(c), T)
        table.append({"kind": lab, "rate": r.point, "stderr": r.stderr,
                      "expected_rate": float(t) / (C * gamma)})
    return table


def born_experiment(source: SignalSource, C: float = 1.0, gamma: float = 1.0, T: int = 10**6,
                    replicas: int = 1, workers: int | None = None,
                    min_clicks: int = MIN_CLICKS) -> ExperimentReport:
    """One position detector per cell; compare click frequencies with ``rho(x, x) dV``."""
    grid = source.grid
    m = grid.total_cells
    kinds = [Position(x) for x in range(m)]
    configs = [DetectorConfig(k, C, gamma) for k in kinds]
    runs = run_replicas(source, configs, T, replicas, workers)
    counts, acc_err = _merge(runs, m)
    n = int(counts.sum())
    _require_clicks(n, min_clicks)
    target = _targets(kinds, source)
    p_hat = _distribution(counts)
    labels = [k.label for k in kinds]
    rows = _rows(counts, target, labels)
    report = ExperimentReport("born", _parameters(source, T=T, C=C, gamma=gamma, replicas=replicas))
    report.rows = rows
    report.metrics = {
        "total_clicks": n,
        "tv": stats.tv_distance(p_hat, target),
        "tv_tolerance": stats.multinomial_tv_tolerance(m, n),
        "max_abs_dev": float(np.max(np.abs(p_hat - target))),
        "wilson_covered": int(sum(r.ci_low <= r.target <= r.ci_high for r in rows)),
        "energy_accounting_max_rel_error": acc_err,
    }
    report.tables = {"rates": _rate_table(counts, T, C, gamma, target, labels)}
    return report


def calibration_experiment(source: SignalSource, C_values: Sequence[float], gamma: float = 1.0,
                           T: int = 10**6, replicas: int = 1, workers: int | None = None,
                           min_clicks: int = MIN_CLICKS) -> ExperimentReport:
    """Position banks at several calibrations, all driven by the same signal stream."""
    C_values = [float(c) for c in C_values]
    if not C_values or any(c <= 0 for c in C_values):
        raise ValidationError("C_values must be a nonempty list of positive numbers")
    grid = source.grid
    m = grid.total_cells
    kinds = [Position(x) for x in range(m)]
    configs = [DetectorConfig(k, c, gamma) for c in C_values for k in kinds]
    runs = run_replicas(source, configs, T, replicas, workers)
    counts, acc_err = _merge(runs, m * len(C_values))
    per_c = counts.reshape(len(C_values), m)
    totals = per_c.sum(axis=1)
    _require_clicks(int(totals[int(np.argmax(C_values))]), min_clicks)
    if np.any(totals == 0):
        _require_clicks(0, min_clicks)
    target = _targets(kinds, source)
    report = ExperimentReport("calibration",
                              _parameters(source, T=T, C_values=C_values, gamma=gamma, replicas=replicas))
    rows, per_c_table = [], []
    dists = [_distribution(row) for row in per_c]
    for i, c in enumerate(C_values):
        labels = [f"{k.label}@C={c:g}" for k in kinds]
        rows += _rows(per_c[i], target, labels, first_id=i * m)
        rate = stats.rate_with_stderr(int(totals[i]), T)
        per_c_table.append({
            "C": c,
            "total_clicks": int(totals[i]),
            "total_rate": rate.point,
            "rate_stderr": rate.stderr,
            "expected_total_rate": 1.0 / (c * gamma),
            "rate_times_C_ratio": float(totals[i] * c / (totals[0] * C_values[0])),
            "tv_to_target": stats.tv_distance(dists[i], target),
            "argmax_cell": int(np.argmax(per_c[i])),
        })
    pairs = []
    for i, j in itertools.combinations(range(len(C_values)), 2):
        tv = stats.tv_distance(dists[i], dists[j])
        tol = stats.two_sample_tv_tolerance(m, int(totals[i]), int(totals[j]))
        pairs.append({"C_a": C_values[i], "C_b": C_values[j], "tv": tv, "tolerance_95": tol,
                      "within_tolerance": tv <= tol})
    report.rows = rows
    report.tables = {"per_C": per_c_table, "pairwise": pairs}
    ratios = [abs(r["rate_times_C_ratio"] - 1.0) for r in per_c_table]
    report.metrics = {
        "total_clicks": int(totals.sum()),
        "max_pairwise_tv": max((p["tv"] for p in pairs), default=0.0),
        "all_pairs_within_tolerance": all(p["within_tolerance"] for p in pairs),
        "max_rate_scaling_deviation": max(ratios),
        "argmax_agrees": len({r["argmax_cell"] for r in per_c_table}) == 1,
        "energy_accounting_max_rel_error": acc_err,
    }
    return report


def double_click_experiment(source: SignalSource, region_a, region_b, C_values: Sequence[float],
                            window: int = 0, gamma: float = 1.0, T: int = 10**6,
                            replicas: int = 1, workers: int | None = None,
                            min_clicks: int = MIN_CLICKS) -> ExperimentReport:
    """Two region detectors; count same-window coincidences for each calibration.

    Double-click probability is ``coincidences / max(n_a, n_b)`` and is
    compared with ``(P_a + P_b) / (2 C)``.
    """
    grid = source.grid
    a = sorted({grid.flat_index(c) for c in region_a})
    b = sorted({grid.flat_index(c) for c in region_b})
    if not a or not b:
        raise ValidationError("both regions must be nonempty")
    shared = sorted(set(a) & set(b))
    if shared:
        raise ValidationError(f"regions overlap at cell(s) {shared}")
    if window < 0:
        raise ValidationError("window must be nonnegative")
    C_values = sorted(float(c) for c in C_values)
    if not C_values or C_values[0] <= 0:
        raise ValidationError("C_values must be a nonempty list of positive numbers")
    ka, kb = Region(tuple(a)), Region(tuple(b))
    configs = [DetectorConfig(k, c, gamma) for c in C_values for k in (ka, kb)]
    runs = run_replicas(source, configs, T, replicas, workers)
    counts, acc_err = _merge(runs, 2 * len(C_values))
    target = _targets([ka, kb], source)
    rows, table = [], []
    for i, c in enumerate(C_values):
        na, nb = int(counts[2 * i]), int(counts[2 * i + 1])
        coinc = sum(count_coincidences(log.ticks_of(2 * i), log.ticks_of(2 * i + 1), window)
                    for log, _ in runs)
        opp = max(na, nb)
        if c == C_values[-1]:
            _require_clicks(na + nb, min_clicks)
        if opp == 0:
            _require_clicks(0, min_clicks)
        p_a, p_b = na / (na + nb), nb / (na + nb)
        p_dc = coinc / opp
        sigma = stats.proportion_stderr(coinc, opp)
        bound = (p_a + p_b) / (2.0 * c)
        rows += _rows([na, nb], target, [f"{ka.label}@C={c:g}", f"{kb.label}@C={c:g}"], 2 * i)
        table.append({
            "C": c, "n_a": na, "n_b": nb, "coincidences": coinc,
            "p_double": p_dc, "sigma": sigma, "bound": bound,
            "within_bound": p_dc <= bound + 3.0 * sigma,
            "double_rate_per_time": coinc * gamma / T,
        })
    mono = []
    for lo, hi in zip(table, table[1:]):
        z = stats.two_proportion_z(lo["coincidences"], max(lo["n_a"], lo["n_b"]),
                                   hi["coincidences"], max(hi["n_a"], hi["n_b"]))
        mono.append({"C_low": lo["C"], "C_high": hi["C"], "z": z, "decreasing_95": z > 1.6448536269514722})
    report = ExperimentReport("doubleclick", _parameters(
        source, T=T, C_values=C_values, gamma=gamma, window=window, replicas=replicas,
        region_a=a, region_b=b))
    report.rows = rows
    report.tables = {"coincidence": table, "monotonicity": mono}
    report.metrics = {
        "total_clicks": int(counts.sum()),
        "max_p_double": max(r["p_double"] for r in table),
        "all_within_bound": all(r["within_bound"] for r in table),
        "strictly_decreasing_95": all(r["decreasing_95"] for r in mono),
        "energy_accounting_max_rel_error": acc_err,
    }
    return report


def observable_experiment(source: SignalSource, eigenvalues: Sequence[float], eigenvectors,
                          C: float = 1.0, gamma: float = 1.0, T: int = 10**6, replicas: int = 1,
                          workers: int | None = None, min_clicks: int = MIN_CLICKS) -> ExperimentReport:
    """One antenna per eigenvector; average the eigenvalues over the clicks."""
    grid = source.grid
    lam = np.asarray(eigenvalues, dtype=float)
    vecs = check_orthonormal(eigenvectors, grid)
    if len(lam) != len(vecs):
        raise ValidationError(f"{len(lam)} eigenvalues but {len(vecs)} eigenvectors")
    kinds = [Antenna(v, name=f"e{k}") for k, v in enumerate(vecs)]
    runs = run_replicas(source, [DetectorConfig(k, C, gamma) for k in kinds], T, replicas, workers)
    counts, acc_err = _merge(runs, len(kinds))
    n = int(counts.sum())
    _require_clicks(n, min_clicks)
    p_hat = _distribution(counts)
    target = np.array([k.mean_functional(source.covariance) for k in kinds]) / source.trace
    avg = float(lam @ p_hat)
    expected = float(lam @ target)
    se = math.sqrt(max(float(lam**2 @ p_hat) - avg * avg, 0.0) / n)
    report = ExperimentReport("observable", _parameters(
        source, T=T, C=C, gamma=gamma, replicas=replicas, eigenvalues=lam.tolist()))
    report.rows = _rows(counts, target, [k.label for k in kinds])
    report.metrics = {
        "total_clicks": n,
        "empirical_average": avg,
        "target_average": expected,
        "stderr": se,
        "deviation": abs(avg - expected),
        "within_3se": abs(avg - expected) <= 3.0 * se,
        "target_sum": float(target.sum()),
        "energy_accounting_max_rel_error": acc_err,
    }
    return report


def check_partition(parts: Sequence[DetectorKind], grid, tol: float = COMPLETENESS_TOL) -> np.ndarray:
    """Raise unless the parts' operators sum to the identity; return the residual."""
    for p in parts:
        if not isinstance(p, (Subspace, Povm)):
            raise ValidationError(f"partition parts must be Subspace or Povm, got {type(p).__name__}")
        p.validate(grid)
    resid = operator_sum_residual(parts, grid)
    if np.max(np.abs(resid)) > tol:
        raise ValidationError(
            f"partition is incomplete: residual operator I - sum Q_k has trace "
            f"{np.real(np.trace(resid)):.6g} and max entry {np.max(np.abs(resid)):.3g}")
    return resid


def partition_experiment(source: SignalSource, parts: Sequence[DetectorKind], C: float = 1.0,
                         gamma: float = 1.0, T: int = 10**6, replicas: int = 1,
                         workers: int | None = None, min_clicks: int = MIN_CLICKS) -> ExperimentReport:
    """Subspace or POVM antennas forming a resolution of the identity.

    Row targets are the quantum values ``Tr(rho Q_k)``; the ``rate_law_targets``
    metric holds what the detector functional actually predicts, which
    differs for literal-form POVM effects.
    """
    grid = source.grid
    check_partition(parts, grid)
    runs = run_replicas(source, [DetectorConfig(k, C, gamma) for k in parts], T, replicas, workers)
    counts, acc_err = _merge(runs, len(parts))
    n = int(counts.sum())
    _require_clicks(n, min_clicks)
    rho = source.covariance
    quantum = np.array([rho.quadratic_mean(k.operator(grid)) for k in parts]) / source.trace
    rate_law = _targets(parts, source)
    p_hat = _distribution(counts)
    report = ExperimentReport("partition", _parameters(source, T=T, C=C, gamma=gamma, replicas=replicas))
    report.rows = _rows(counts, quantum, [k.label for k in parts])
    report.metrics = {
        "total_clicks": n,
        "tv": stats.tv_distance(p_hat, quantum / quantum.sum()),
        "tv_rate_law": stats.tv_distance(p_hat, rate_law),
        "tv_tolerance": stats.multinomial_tv_tolerance(len(parts), n),
        "target_sum": float(quantum.sum()),
        "rate_law_targets": rate_law.tolist(),
        "literal_mode": any(isinstance(k, Povm) and k.mode == POVM_LITERAL for k in parts),
        "energy_accounting_max_rel_error": acc_err,
    }
    return report


def nonlinearity_experiment(source: SignalSource, alphas: Sequence[float], C: float = 1.0,
                            gamma: float = 1.0, T: int = 10**6, replicas: int = 1,
                            workers: int | None = None, min_clicks: int = MIN_CLICKS) -> ExperimentReport:
    """Position banks with an added quartic term ``alpha |phi|^4``.

    The ``oracle`` column uses the Gaussian moment ``E|phi(x)|^4 = 2 D(x,x)^2``.
    """
    alphas = [float(a) for a in alphas]
    if not alphas or alphas[0] != 0.0 or any(b < a for a, b in zip(alphas, alphas[1:])):
        raise ValidationError("alphas must be ascending and start with 0")
    m = source.grid.total_cells
    banks = [[NonlinearPosition(x, a) for x in range(m)] for a in alphas]
    configs = [DetectorConfig(k, C, gamma) for bank in banks for k in bank]
    runs = run_replicas(source, configs, T, replicas, workers)
    counts, acc_err = _merge(runs, m * len(alphas))
    per_a = counts.reshape(len(alphas), m)
    born = _targets([Position(x) for x in range(m)], source)
    rows, table = [], []
    for i, (a, bank) in enumerate(zip(alphas, banks)):
        n = int(per_a[i].sum())
        _require_clicks(n, min_clicks)
        p_hat = _distribution(per_a[i])
        oracle = _targets(bank, source)
        rows += _rows(per_a[i], born, [k.label for k in bank], first_id=i * m)
        table.append({
            "alpha": a,
            "total_clicks": n,
            "tv_born": stats.tv_distance(p_hat, born),
            "tv_oracle": stats.tv_distance(p_hat, oracle),
            "oracle_tv_born": stats.tv_distance(oracle, born),
            "tv_tolerance": stats.multinomial_tv_tolerance(m, n),
            "p_hat": p_hat.tolist(),
            "oracle": oracle.tolist(),
        })
    base = table[0]
    for row in table:
        band = base["tv_born"] + stats.two_sample_tv_tolerance(m, base["total_clicks"], row["total_clicks"])
        row["exceeds_alpha0_band"] = row["tv_born"] > band
        bias = np.array(row["oracle"]) - born
        seen = np.array(row["p_hat"]) - born
        strong = np.abs(bias) > row["tv_tolerance"] / m
        row["bias_direction_agrees"] = bool(np.all(np.sign(bias[strong]) == np.sign(seen[strong])))
    report = ExperimentReport("nonlinearity", _parameters(
        source, T=T, C=C, gamma=gamma, alphas=alphas, replicas=replicas))
    report.rows = rows
    report.tables = {"per_alpha": table}
    report.metrics = {
        "total_clicks": int(counts.sum()),
        "tv_at_max_alpha": table[-1]["tv_born"],
        "tv_at_alpha0": base["tv_born"],
        "energy_accounting_max_rel_error": acc_err,
    }
    return report


def ergodicity_check(source: SignalSource, cell, deltas: Sequence[int], replicas: int = 1,
                     block: int = DEFAULT_BLOCK) -> ExperimentReport:
    """Time averages of ``|phi(s, x0)|^2`` over the first ``Delta`` ticks versus ``D(x0, x0)``.

    With several replicas the deviations are averaged across the seed family.
    """
    deltas = [int(d) for d in deltas]
    if not deltas or deltas[0] < 1 or any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ValidationError("deltas must be positive and strictly ascending")
    grid = source.grid
    x = grid.flat_index(cell)
    ensemble = float(source.covariance.diagonal()[x])
    averages = np.zeros((replicas, len(deltas)))
    for r in range(replicas):
        src = source.spawn(r)
        acc, done, k = 0.0, 0, 0
        while k < len(deltas):
            n = min(block, deltas[k] - done)
            e = np.abs(src.sample_block(n)[:, x]) ** 2
            acc += float(e.sum())
            done += n
            if done == deltas[k]:
                averages[r, k] = acc / done
                k += 1
    abs_dev = np.abs(averages - ensemble)
    rel_dev = abs_dev / ensemble if ensemble > 0 else np.where(abs_dev == 0, 0.0, np.inf)
    table = []
    for k, d in enumerate(deltas):
        table.append({
            "delta": d,
            "time_average": float(averages[:, k].mean()),
            "ensemble_value": ensemble,
            "abs_dev": float(abs_dev[:, k].mean()),
            "rel_dev": float(rel_dev[:, k].mean()),
            "rel_dev_per_replica": rel_dev[:, k].tolist(),
        })
    report = ExperimentReport("ergodicity", _parameters(
        source, cell=x, deltas=deltas, replicas=replicas))
    report.tables = {"ergodicity": table}
    report.metrics = {
        "total_clicks": 0,
        "rel_dev_at_max_delta": table[-1]["rel_dev"],
        "ensemble_value": ensemble,
    }
    return report
