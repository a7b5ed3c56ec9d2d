import dataclasses
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clickfield.cli import (
    EXIT_INCONCLUSIVE,
    EXIT_OK,
    EXIT_VALIDATION,
    RunConfig,
    main,
    parse_config,
    render_config,
)
from clickfield.errors import ValidationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BORN = """
[experiment]
name = born
seed = 42
T = 100000

[grid]
cells = 4

[source]
kind = pure
mode = 1, 1, 1, 1
epsilon = 1.0

[detector]
C = 1
gamma = 1
"""


def _write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_born():
    cfg = parse_config(BORN)
    assert cfg.name == "born" and cfg.seed == 42 and cfg.T == 100_000
    assert cfg.cells == (4,) and cfg.C == (1.0,) and cfg.epsilon == 1.0


def test_negative_C():
    with pytest.raises(ValidationError) as info:
        parse_config(BORN.replace("C = 1", "C = -1"))
    assert any("C must be positive" in m for m in info.value.messages)


def test_all_errors_reported():
    text = BORN.replace("C = 1", "C = -1").replace("gamma = 1", "gamma = 0").replace("seed = 42", "")
    with pytest.raises(ValidationError) as info:
        parse_config(text)
    assert any("seed" in m for m in info.value.messages)
    text = BORN.replace("C = 1", "C = -1").replace("gamma = 1", "gamma = 0")
    with pytest.raises(ValidationError) as info:
        parse_config(text)
    msgs = " ".join(info.value.messages)
    assert "C must be positive" in msgs and "gamma must be positive" in msgs


def test_unknown_key_and_section():
    with pytest.raises(ValidationError) as info:
        parse_config(BORN + "\nbogus = 1\n[extra]\nx = 1\n")
    msgs = " ".join(info.value.messages)
    assert "detector.bogus: unknown key" in msgs and "[extra]" in msgs


def test_seed_is_mandatory():
    with pytest.raises(ValidationError, match="experiment.seed"):
        parse_config(BORN.replace("seed = 42", ""))


def test_mixed_non_orthonormal():
    text = BORN.replace("mode = 1, 1, 1, 1\nepsilon = 1.0",
                        "mode.0 = 1, 1, 1, 1\nmode.1 = 2, 0, 0, 0\nweights = 0.5, 0.5").replace(
        "kind = pure", "kind = mixed")
    with pytest.raises(ValidationError, match=r"modes \(0, 1\)"):
        parse_config(text)


def test_example_configs_validate():
    files = sorted(CONFIGS.glob("*.ini"))
    assert {f.stem for f in files} >= {"born", "calibration", "doubleclick", "observable",
                                      "partition", "nonlinearity", "ergodicity"}
    for f in files:
        cfg = parse_config(f.read_text())
        assert parse_config(render_config(cfg)) == cfg


def test_run_writes_reports(tmp_path, capsys):
    cfg = _write(tmp_path, BORN)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = (out / "born.csv").read_text().splitlines()
    assert len(rows) == 5
    payload = json.loads((out / "born.json").read_text())
    assert "tv" in payload["metrics"]
    assert (out / "born.timestamp").exists()
    line = capsys.readouterr().out.strip()
    assert line.startswith("born: total_clicks=") and "tv=" in line


def test_run_deterministic(tmp_path):
    cfg = _write(tmp_path, BORN)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")])
    assert (tmp_path / "a/born.json").read_bytes() == (tmp_path / "b/born.json").read_bytes()
    assert (tmp_path / "a/born.csv").read_bytes() == (tmp_path / "b/born.csv").read_bytes()


def test_seed_override(tmp_path):
    cfg = _write(tmp_path, BORN)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
    payload = json.loads((tmp_path / "a/born.json").read_text())
    assert payload["parameters"]["seed"] == 1


def test_overlapping_regions(tmp_path, capsys):
    text = (BORN.replace("name = born", "name = doubleclick")
            + "region_a = 0, 1, 2\nregion_b = 2, 3\n")
    cfg = _write(tmp_path, text)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert "[2]" in capsys.readouterr().err


def test_inconclusive_exit(tmp_path, capsys):
    cfg = _write(tmp_path, BORN.replace("T = 100000", "T = 10").replace("C = 1", "C = 100"))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_INCONCLUSIVE
    assert "inconclusive" in capsys.readouterr().err


def test_validate_command(tmp_path, capsys):
    cfg = _write(tmp_path, BORN)
    assert main(["validate", "--config", str(cfg)]) == EXIT_OK
    bad = _write(tmp_path, BORN.replace("T = 100000", "T = -5"), "bad.ini")
    assert main(["validate", "--config", str(bad)]) == EXIT_VALIDATION


finite = st.floats(0.01, 100, allow_nan=False, allow_infinity=False)


@st.composite
def configs(draw):
    m = draw(st.integers(1, 6))
    name = draw(st.sampled_from(["born", "calibration", "nonlinearity"]))
    cs = (draw(finite),) if name != "calibration" else tuple(draw(st.lists(finite, min_size=1, max_size=4)))
    alphas = None
    if name == "nonlinearity":
        alphas = tuple(sorted([0.0] + draw(st.lists(finite, max_size=3))))
    temporal = draw(st.sampled_from(["white", "ar1"]))
    return RunConfig(
        name=name, seed=draw(st.integers(0, 2**31)), cells=(m,), source_kind="pure",
        T=draw(st.integers(1, 10**6)), replicas=1, mode=tuple([complex(1.0)] * m), epsilon=draw(finite),
        temporal=temporal, kappa=draw(st.floats(0, 0.999)) if temporal == "ar1" else 0.0,
        C=cs, gamma=draw(finite), window=draw(st.integers(0, 5)), alphas=alphas,
        out=draw(st.sampled_from([".", "results", "out/dir"])), fmt=draw(st.sampled_from(["csv", "json", "both"])),
    )


@settings(max_examples=60)
@given(configs())
def test_round_trip(cfg):
    assert parse_config(render_config(cfg)) == cfg


def test_round_trip_complex_parts():
    cfg = parse_config((CONFIGS / "partition.ini").read_text())
    cfg = dataclasses.replace(cfg, mode=None)
    assert parse_config(render_config(cfg)) == cfg
