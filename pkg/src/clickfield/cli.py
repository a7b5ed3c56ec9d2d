"""Config-driven command line entry point.

Usage::

    clickfield run --config born.ini [--seed 7] [--out results/]
    clickfield validate --config born.ini

The config format is documented in ``docs/config.md``.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import datetime as _dt
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiment as ex
from .detector import POVM_LITERAL, POVM_SQRT, Povm, Subspace
from .errors import ClickfieldError, InconclusiveRunError, ValidationError
from .signal import GridSpec, SignalSource, TemporalModel, build_mixed_source, build_pure_source

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INCONCLUSIVE = 3
EXIT_IO = 4

EXPERIMENTS = ("born", "calibration", "doubleclick", "observable", "partition", "nonlinearity", "ergodicity")
FORMATS = ("csv", "json", "both")

# Keys accepted per section; indexed families (mode.0, part.1.vector.2, ...) are matched by prefix.
_KEYS = {
    "experiment": {"name", "seed", "T", "replicas"},
    "grid": {"cells", "dV"},
    "source": {"kind", "mode", "epsilon", "weights", "temporal", "kappa"},
    "detector": {"C", "gamma", "window", "alphas", "region_a", "region_b", "eigenvalues",
                 "povm_mode", "cell", "deltas"},
    "output": {"path", "format"},
}
_INDEXED = {"source": ("mode.",), "detector": ("eigenvector.", "part.")}


@dataclass(frozen=True)
class PartSpec:
    kind: str  # "subspace" | "povm"
    vectors: tuple[tuple[complex, ...], ...] = ()
    matrix: tuple[tuple[complex, ...], ...] = ()


@dataclass(frozen=True)
class RunConfig:
    name: str
    seed: int
    cells: tuple[int, ...]
    source_kind: str
    T: int | None = None
    replicas: int = 1
    dV: float | None = None
    mode: tuple[complex, ...] | None = None
    modes: tuple[tuple[complex, ...], ...] | None = None
    epsilon: float | None = None
    weights: tuple[float, ...] | None = None
    temporal: str = "white"
    kappa: float = 0.0
    C: tuple[float, ...] = (1.0,)
    gamma: float = 1.0
    window: int = 0
    alphas: tuple[float, ...] | None = None
    region_a: tuple[int, ...] | None = None
    region_b: tuple[int, ...] | None = None
    eigenvalues: tuple[float, ...] | None = None
    eigenvectors: tuple[tuple[complex, ...], ...] | None = None
    parts: tuple[PartSpec, ...] | None = None
    povm_mode: str = POVM_SQRT
    cell: int | None = None
    deltas: tuple[int, ...] | None = None
    out: str = "."
    fmt: str = "both"

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.cells, self.dV)


# -- parsing helpers --------------------------------------------------------

def _split(text: str, sep: str = ",") -> list[str]:
    return [t.strip() for t in text.split(sep) if t.strip()]


def _complex(tok: str) -> complex:
    return complex(tok.replace(" ", ""))


def _vector(text: str) -> tuple[complex, ...]:
    return tuple(_complex(t) for t in _split(text))


def _matrix(text: str) -> tuple[tuple[complex, ...], ...]:
    return tuple(_vector(row) for row in _split(text, ";"))


def _index_key(key: str, prefix: str) -> int:
    return int(key[len(prefix):])


def parse_config(text: str, check: bool = True) -> RunConfig:
    """Parse and validate a config document; all problems are reported together."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    errors: list[str] = []
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ValidationError(f"config syntax: {e}") from None

    for sec in cp.sections():
        if sec not in _KEYS:
            errors.append(f"[{sec}]: unknown section")
            continue
        for key in cp[sec]:
            if key in _KEYS[sec]:
                continue
            prefix = next((p for p in _INDEXED.get(sec, ()) if key.startswith(p)), None)
            if prefix == "part.":
                continue  # checked in detail below
            if prefix and key[len(prefix):].isdigit():
                continue
            errors.append(f"{sec}.{key}: unknown key")

    def get(sec, key, conv, default=None, required=False):
        if cp.has_option(sec, key):
            raw = cp.get(sec, key)
            try:
                return conv(raw)
            except (ValueError, TypeError) as e:
                errors.append(f"{sec}.{key}: cannot parse {raw!r} ({e})")
                return default
        if required:
            errors.append(f"{sec}.{key}: missing mandatory key")
        return default

    ints = lambda s: tuple(int(t) for t in _split(s))  # noqa: E731
    floats = lambda s: tuple(float(t) for t in _split(s))  # noqa: E731

    name = get("experiment", "name", str.strip, required=True)
    seed = get("experiment", "seed", int, required=True)
    T = get("experiment", "T", int)
    replicas = get("experiment", "replicas", int, 1)
    cells = get("grid", "cells", ints, required=True)
    dV = get("grid", "dV", float)
    kind = get("source", "kind", str.strip, required=True)
    mode_raw = get("source", "mode", str.strip)
    epsilon = get("source", "epsilon", float)
    weights = get("source", "weights", floats)
    temporal = get("source", "temporal", str.strip, "white")
    kappa = get("source", "kappa", float, 0.0)

    modes = None
    if cp.has_section("source"):
        mkeys = sorted((k for k in cp["source"] if k.startswith("mode.") and k[5:].isdigit()), key=lambda k: _index_key(k, "mode."))
        if mkeys:
            modes = tuple(get("source", k, _vector, ()) for k in mkeys)

    mode = None
    if mode_raw is not None:
        if mode_raw == "uniform":
            if cells:
                try:
                    mode = tuple(complex(v) for v in GridSpec(cells, dV).uniform_mode())
                except ClickfieldError as e:
                    errors.append(f"grid: {e}")
        else:
            try:
                mode = _vector(mode_raw)
            except ValueError as e:
                errors.append(f"source.mode: cannot parse {mode_raw!r} ({e})")

    C = get("detector", "C", floats, (1.0,))
    gamma = get("detector", "gamma", float, 1.0)
    window = get("detector", "window", int, 0)
    alphas = get("detector", "alphas", floats)
    region_a = get("detector", "region_a", ints)
    region_b = get("detector", "region_b", ints)
    eigenvalues = get("detector", "eigenvalues", floats)
    povm_mode = get("detector", "povm_mode", str.strip, POVM_SQRT)
    cell = get("detector", "cell", int)
    deltas = get("detector", "deltas", ints)

    eigenvectors = parts = None
    if cp.has_section("detector"):
        det = cp["detector"]
        ekeys = sorted((k for k in det if k.startswith("eigenvector.") and k[12:].isdigit()),
                       key=lambda k: _index_key(k, "eigenvector."))
        if ekeys:
            eigenvectors = tuple(get("detector", k, _vector, ()) for k in ekeys)
        part_kinds = {}
        part_vecs: dict[int, dict[int, tuple]] = {}
        part_mats = {}
        for k in det:
            if not k.startswith("part."):
                continue
            bits = k.split(".")
            try:
                i = int(bits[1])
                if len(bits) == 2:
                    part_kinds[i] = det[k].strip()
                elif len(bits) == 4 and bits[2] == "vector":
                    part_vecs.setdefault(i, {})[int(bits[3])] = _vector(det[k])
                elif len(bits) == 3 and bits[2] == "matrix":
                    part_mats[i] = _matrix(det[k])
                else:
                    errors.append(f"detector.{k}: unknown key")
            except ValueError as e:
                errors.append(f"detector.{k}: cannot parse ({e})")
        if part_kinds:
            plist = []
            for i in sorted(part_kinds):
                pk = part_kinds[i]
                if pk not in ("subspace", "povm"):
                    errors.append(f"detector.part.{i}: kind must be 'subspace' or 'povm', got {pk!r}")
                vecs = tuple(v for _, v in sorted(part_vecs.get(i, {}).items()))
                plist.append(PartSpec(pk, vecs, part_mats.get(i, ())))
            parts = tuple(plist)

    out = get("output", "path", str.strip, ".")
    fmt = get("output", "format", str.strip, "both")

    if errors or any(v is None for v in (name, seed, cells, kind)):
        raise ValidationError(errors or ["missing mandatory keys"])

    cfg = RunConfig(
        name=name, seed=seed, cells=cells, source_kind=kind, T=T, replicas=replicas, dV=dV,
        mode=mode, modes=modes, epsilon=epsilon, weights=weights, temporal=temporal, kappa=kappa,
        C=C, gamma=gamma, window=window, alphas=alphas, region_a=region_a, region_b=region_b,
        eigenvalues=eigenvalues, eigenvectors=eigenvectors, parts=parts, povm_mode=povm_mode,
        cell=cell, deltas=deltas, out=out, fmt=fmt,
    )
    if check:
        validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    """Domain checks plus dry construction of the source and detectors."""
    errors: list[str] = []
    req = lambda cond, msg: cond or errors.append(msg)  # noqa: E731

    req(cfg.name in EXPERIMENTS, f"experiment.name: must be one of {', '.join(EXPERIMENTS)}")
    req(cfg.seed >= 0, "experiment.seed: seed must be nonnegative")
    req(cfg.replicas >= 1, "experiment.replicas: must be at least 1")
    if cfg.name != "ergodicity":
        req(cfg.T is not None, "experiment.T: missing mandatory key")
        if cfg.T is not None:
            req(cfg.T >= cfg.replicas and cfg.T >= 1, "experiment.T: must be >= 1 and >= replicas")
    req(len(cfg.cells) >= 1 and all(c >= 1 for c in cfg.cells), "grid.cells: must be positive integers")
    req(cfg.dV is None or cfg.dV > 0, "grid.dV: must be positive")
    req(cfg.temporal in ("white", "ar1"), "source.temporal: must be 'white' or 'ar1'")
    req(0.0 <= cfg.kappa < 1.0, "source.kappa: must lie in [0, 1)")
    req(cfg.temporal == "ar1" or cfg.kappa == 0.0, "source.kappa: only allowed with temporal = ar1")
    req(len(cfg.C) >= 1 and all(c > 0 for c in cfg.C), "detector.C: C must be positive")
    req(cfg.gamma > 0, "detector.gamma: gamma must be positive")
    req(cfg.window >= 0, "detector.window: must be nonnegative")
    req(cfg.fmt in FORMATS, f"output.format: must be one of {', '.join(FORMATS)}")
    req(cfg.povm_mode in (POVM_SQRT, POVM_LITERAL), "detector.povm_mode: must be 'sqrt' or 'literal'")
    if cfg.source_kind == "pure":
        req(cfg.mode is not None, "source.mode: required for a pure source")
        req(cfg.epsilon is not None, "source.epsilon: required for a pure source")
        req(cfg.epsilon is None or cfg.epsilon > 0, "source.epsilon: must be positive")
    elif cfg.source_kind == "mixed":
        req(cfg.modes is not None, "source.mode.<k>: required for a mixed source")
        req(cfg.weights is not None, "source.weights: required for a mixed source")
        if cfg.modes is not None and cfg.weights is not None:
            req(len(cfg.modes) == len(cfg.weights), "source.weights: one weight per mode required")
    else:
        errors.append("source.kind: must be 'pure' or 'mixed'")

    single_c = cfg.name in ("born", "observable", "partition", "nonlinearity")
    if single_c:
        req(len(cfg.C) == 1, f"detector.C: {cfg.name} takes a single C")
    if cfg.name == "doubleclick":
        req(cfg.region_a is not None and len(cfg.region_a) > 0, "detector.region_a: required, nonempty")
        req(cfg.region_b is not None and len(cfg.region_b) > 0, "detector.region_b: required, nonempty")
        if cfg.region_a and cfg.region_b:
            shared = sorted(set(cfg.region_a) & set(cfg.region_b))
            req(not shared, f"detector.region_a/region_b: regions overlap at cell(s) {shared}")
    if cfg.name == "observable":
        req(cfg.eigenvalues is not None, "detector.eigenvalues: required")
        req(cfg.eigenvectors is not None, "detector.eigenvector.<k>: required")
        if cfg.eigenvalues and cfg.eigenvectors:
            req(len(cfg.eigenvalues) == len(cfg.eigenvectors),
                "detector.eigenvalues: one eigenvalue per eigenvector required")
    if cfg.name == "partition":
        req(bool(cfg.parts), "detector.part.<k>: at least one part required")
    if cfg.name == "nonlinearity":
        req(cfg.alphas is not None, "detector.alphas: required")
        if cfg.alphas:
            req(cfg.alphas[0] == 0.0 and list(cfg.alphas) == sorted(cfg.alphas) and min(cfg.alphas) >= 0,
                "detector.alphas: must be ascending, nonnegative and start with 0")
    if cfg.name == "ergodicity":
        req(cfg.cell is not None, "detector.cell: required")
        req(cfg.deltas is not None and len(cfg.deltas) > 0, "detector.deltas: required")
        if cfg.deltas:
            d = list(cfg.deltas)
            req(d[0] >= 1 and all(b > a for a, b in zip(d, d[1:])),
                "detector.deltas: must be positive and strictly ascending")

    if errors:
        raise ValidationError(errors)
    # Delegate the physics-level checks (normalization, orthonormality, completeness).
    try:
        source = build_source(cfg)
        grid = source.grid
        if cfg.name == "doubleclick":
            for c in cfg.region_a + cfg.region_b:
                grid.flat_index(c)
        if cfg.name == "observable":
            from .signal import check_orthonormal
            check_orthonormal(np.array(cfg.eigenvectors, dtype=complex), grid)
        if cfg.name == "partition":
            ex.check_partition(build_parts(cfg), grid)
        if cfg.name == "ergodicity":
            grid.flat_index(cfg.cell)
    except ClickfieldError as e:
        msgs = e.messages if isinstance(e, ValidationError) else [str(e)]
        raise ValidationError(msgs) from e


def build_source(cfg: RunConfig) -> SignalSource:
    grid = cfg.grid
    temporal = TemporalModel(cfg.kappa)
    if cfg.source_kind == "pure":
        return build_pure_source(np.array(cfg.mode, dtype=complex), cfg.epsilon, temporal, cfg.seed, grid)
    return build_mixed_source(np.array(cfg.modes, dtype=complex), cfg.weights, temporal, cfg.seed, grid)


def build_parts(cfg: RunConfig) -> list:
    parts = []
    for i, p in enumerate(cfg.parts or ()):
        if p.kind == "subspace":
            parts.append(Subspace(np.array(p.vectors, dtype=complex), name=f"L{i}"))
        else:
            parts.append(Povm(np.array(p.matrix, dtype=complex), cfg.povm_mode, name=f"Q{i}"))
    return parts


# -- rendering ----------------------------------------------------------------

def _fmt_num(v) -> str:
    if isinstance(v, complex):
        if v.imag == 0:
            return repr(v.real)
        return repr(v).strip("()")
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _join(vals) -> str:
    return ", ".join(_fmt_num(v) for v in vals)


def render_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` for valid configs."""
    lines = ["[experiment]", f"name = {cfg.name}", f"seed = {cfg.seed}"]
    if cfg.T is not None:
        lines.append(f"T = {cfg.T}")
    lines += [f"replicas = {cfg.replicas}", "", "[grid]", f"cells = {_join(cfg.cells)}"]
    if cfg.dV is not None:
        lines.append(f"dV = {cfg.dV!r}")
    lines += ["", "[source]", f"kind = {cfg.source_kind}"]
    if cfg.mode is not None:
        lines.append(f"mode = {_join(cfg.mode)}")
    for k, m in enumerate(cfg.modes or ()):
        lines.append(f"mode.{k} = {_join(m)}")
    if cfg.epsilon is not None:
        lines.append(f"epsilon = {cfg.epsilon!r}")
    if cfg.weights is not None:
        lines.append(f"weights = {_join(cfg.weights)}")
    lines += [f"temporal = {cfg.temporal}", f"kappa = {cfg.kappa!r}", "", "[detector]",
              f"C = {_join(cfg.C)}", f"gamma = {cfg.gamma!r}", f"window = {cfg.window}",
              f"povm_mode = {cfg.povm_mode}"]
    for key in ("alphas", "region_a", "region_b", "eigenvalues", "deltas"):
        val = getattr(cfg, key)
        if val is not None:
            lines.append(f"{key} = {_join(val)}")
    if cfg.cell is not None:
        lines.append(f"cell = {cfg.cell}")
    for k, v in enumerate(cfg.eigenvectors or ()):
        lines.append(f"eigenvector.{k} = {_join(v)}")
    for i, p in enumerate(cfg.parts or ()):
        lines.append(f"part.{i} = {p.kind}")
        for j, v in enumerate(p.vectors):
            lines.append(f"part.{i}.vector.{j} = {_join(v)}")
        if p.matrix:
            lines.append(f"part.{i}.matrix = " + "; ".join(_join(r) for r in p.matrix))
    lines += ["", "[output]", f"path = {cfg.out}", f"format = {cfg.fmt}", ""]
    return "\n".join(lines)


# -- running --------------------------------------------------------------------

def execute(cfg: RunConfig):
    """Dispatch ``cfg`` to its experiment and return the report."""
    src = build_source(cfg)
    common = dict(T=cfg.T, replicas=cfg.replicas)
    if cfg.name == "born":
        return ex.born_experiment(src, cfg.C[0], cfg.gamma, **common)
    if cfg.name == "calibration":
        return ex.calibration_experiment(src, cfg.C, cfg.gamma, **common)
    if cfg.name == "doubleclick":
        return ex.double_click_experiment(src, cfg.region_a, cfg.region_b, cfg.C, cfg.window,
                                          cfg.gamma, **common)
    if cfg.name == "observable":
        return ex.observable_experiment(src, cfg.eigenvalues, np.array(cfg.eigenvectors, dtype=complex),
                                        cfg.C[0], cfg.gamma, **common)
    if cfg.name == "partition":
        return ex.partition_experiment(src, build_parts(cfg), cfg.C[0], cfg.gamma, **common)
    if cfg.name == "nonlinearity":
        return ex.nonlinearity_experiment(src, cfg.alphas, cfg.C[0], cfg.gamma, **common)
    return ex.ergodicity_check(src, cfg.cell, cfg.deltas, cfg.replicas)


_HEADLINE = {
    "born": "tv", "calibration": "max_pairwise_tv", "doubleclick": "max_p_double",
    "observable": "deviation", "partition": "tv", "nonlinearity": "tv_at_max_alpha",
    "ergodicity": "rel_dev_at_max_delta",
}


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Run ``cfg``, write its report files and print a one-line summary."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        report = execute(cfg)
    except InconclusiveRunError as e:
        print(f"error: {e}", file=stderr)
        return EXIT_INCONCLUSIVE
    except ValidationError as e:
        for m in e.messages:
            print(f"error: {m}", file=stderr)
        return EXIT_VALIDATION
    try:
        paths = report.write(cfg.out, cfg.fmt, stem=cfg.name)
        stamp = Path(cfg.out) / f"{cfg.name}.timestamp"
        stamp.write_text(_dt.datetime.now(_dt.timezone.utc).isoformat() + "\n", encoding="utf-8")
    except OSError as e:
        print(f"error: cannot write report: {e}", file=stderr)
        return EXIT_IO
    key = _HEADLINE[cfg.name]
    print(f"{cfg.name}: total_clicks={report.metrics.get('total_clicks', 0)} "
          f"{key}={report.metrics[key]:.6g} -> {', '.join(str(p) for p in paths)}", file=stdout)
    return EXIT_OK


def _load(path, stderr):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: cannot read config: {e}", file=stderr)
        return None


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="clickfield", description="Threshold-detector click experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, help="override experiment.seed")
    p_run.add_argument("--out", help="override output.path")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("--config", required=True)
    args = ap.parse_args(argv)

    text = _load(args.config, sys.stderr)
    if text is None:
        return EXIT_IO
    try:
        cfg = parse_config(text)
        if args.command == "run":
            if args.seed is not None:
                cfg = dataclasses.replace(cfg, seed=args.seed)
            if args.out is not None:
                cfg = dataclasses.replace(cfg, out=args.out)
            validate_config(cfg)
    except ValidationError as e:
        for m in e.messages:
            print(f"error: {m}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.name})")
        return EXIT_OK
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
