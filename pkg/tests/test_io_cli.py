import filecmp
import json
import shutil
from dataclasses import fields

import numpy as np
import pandas as pd
import pytest

from exoportrait import cli
from exoportrait.config import config_hash, default_config, load_config, ConfigError
from exoportrait.io import (FILES, MalformedHeaderError, MissingFileError,
                            NonMonotonicTimeError, RateMismatchError, ingest_trial,
                            read_frame, write_frame, write_trial)
from exoportrait.tables import read_table, write_table


def _array_fields():
    from exoportrait.sim.trial import GaitTrial
    return [f.name for f in fields(GaitTrial) if f.name not in ("meta", "events")]


def assert_same_trial(a, b):
    for name in _array_fields():
        x, y = getattr(a, name), getattr(b, name)
        if x is None or y is None:
            assert x is None and y is None, name
            continue
        np.testing.assert_array_equal(np.asarray(x, float), np.asarray(y, float), err_msg=name)
    assert a.events == b.events
    assert a.controller == b.controller and a.subject == b.subject


@pytest.fixture
def written(tmp_path, short_trials):
    d = write_trial(short_trials["AMTC"], tmp_path / "S1" / "AMTC")
    return d


# ------------------------------------------------------------------ trial files
def test_round_trip_is_bit_identical(tmp_path, short_trials):
    for c, trial in short_trials.items():
        d = write_trial(trial, tmp_path / c)
        back = ingest_trial(d)
        assert_same_trial(trial, back)


def test_rewrite_gives_identical_files(tmp_path, written):
    again = write_trial(ingest_trial(written), tmp_path / "again")
    for name in FILES.values():
        assert filecmp.cmp(written / name, again / name, shallow=False), name


def test_missing_file(written):
    (written / FILES["grf"]).unlink()
    with pytest.raises(MissingFileError) as exc:
        ingest_trial(written)
    assert exc.value.code == "missing-file"


def test_missing_metadata_file(written):
    (written / FILES["meta"]).unlink()
    with pytest.raises(MissingFileError):
        ingest_trial(written)


def test_malformed_header(written):
    path = written / FILES["vo2"]
    lines = path.read_text().splitlines(keepends=True)
    k = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    lines[k] = "t,oxygen\n"
    path.write_text("".join(lines))
    with pytest.raises(MalformedHeaderError) as exc:
        ingest_trial(written)
    assert exc.value.code == "malformed-header"


def test_metadata_without_rates_is_malformed(written):
    path = written / FILES["meta"]
    meta = json.loads(path.read_text())
    del meta["rates"]
    path.write_text(json.dumps(meta))
    with pytest.raises(MalformedHeaderError):
        ingest_trial(written)


def test_rate_mismatch(written):
    path = written / FILES["meta"]
    meta = json.loads(path.read_text())
    meta["rates"]["grf"] = 500.0
    path.write_text(json.dumps(meta))
    with pytest.raises(RateMismatchError) as exc:
        ingest_trial(written)
    assert exc.value.code == "rate-mismatch"


def test_shuffled_timestamps(written):
    tab = read_table(written / FILES["kinematics"])
    data = tab.data.copy()
    rows = np.random.default_rng(0).permutation(len(data))
    scales = [float(s) for s in tab.meta.pop("scale").split(",")]
    write_table(written / FILES["kinematics"], tab.columns, tab.units, data[rows],
                meta=tab.meta, scales=scales)
    with pytest.raises(NonMonotonicTimeError) as exc:
        ingest_trial(written)
    assert exc.value.code == "non-monotonic-time"


def test_no_emg_loads_without_emg_file(written):
    (written / FILES["emg"]).unlink()
    trial = ingest_trial(written, emg=False)
    assert trial.emg is None and not trial.has_emg
    with pytest.raises(MissingFileError):
        ingest_trial(written)


def test_interaction_torque_recomputed_when_absent(tmp_path, short_trials, model):
    from dataclasses import replace
    src = short_trials["TBC"]
    d = write_trial(replace(src, u_int=None), tmp_path / "bare")
    assert ingest_trial(d).u_int is None
    back = ingest_trial(d, model=model)
    # recomputed from quantised states, so equal to the stored value within storage steps
    np.testing.assert_allclose(back.u_int, src.u_int, atol=1e-3)


def test_result_table_fixed_point(tmp_path):
    frame = pd.DataFrame({"subject": ["S1", "S2"], "speed": [0.4, 0.6],
                          "tau_total": [1 / 3, 2.0e-17]})
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_frame(p1, frame, {"speed": "m/s"}, {"config_hash": "abc"})
    back = read_frame(p1)
    pd.testing.assert_frame_equal(back, frame)
    write_frame(p2, back, {"speed": "m/s"}, {"config_hash": "abc"})
    assert p1.read_bytes() == p2.read_bytes()
    assert read_table(p1).units == ["1", "m/s", "1"]


# ------------------------------------------------------------------ configuration
def test_config_hash_tracks_field_values():
    cfg = default_config()
    h = config_hash(cfg)
    assert config_hash(default_config()) == h
    reordered = json.loads(json.dumps(cfg, sort_keys=True))
    assert config_hash(reordered) == h
    cfg["controllers"]["htc"]["w"] = 0.25
    assert config_hash(cfg) != h
    cfg = default_config()
    cfg["model"]["exo"]["thigh_r"]["mass"] += 1e-9
    assert config_hash(cfg) != h


def test_config_file_overrides_and_rejects_unknown_keys(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"controllers": {"htc": {"w": 0.3}}}))
    assert load_config(p)["controllers"]["htc"]["w"] == 0.3
    p.write_text(json.dumps({"controllers": {"htx": {}}}))
    with pytest.raises(ConfigError):
        load_config(p)


# ------------------------------------------------------------------ command line
def test_unknown_flag_is_validation_error(tmp_path):
    assert cli.main(["simulate", "--bogus", "--out", str(tmp_path)]) == 2


def test_bad_schedule_is_validation_error(tmp_path):
    assert cli.main(["simulate", "--schedule", "fast", "--out", str(tmp_path)]) == 2
    assert cli.main(["simulate", "--schedule", "0.6:-1", "--out", str(tmp_path)]) == 2


def test_analysis_without_trials_is_validation_error(tmp_path):
    assert cli.main(["analyze", "--out", str(tmp_path)]) == 2


def test_parse_schedule():
    assert cli.parse_schedule("0.4:100,0.6:50") == ((0.4, 100.0), (0.6, 50.0))


@pytest.fixture(scope="module")
def sim_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    args = ["simulate", "--controllers", "TBC", "AMTC", "--schedule", "0.6:12",
            "--seed", "5"]
    assert cli.main(args + ["--out", str(root / "a")]) == 0
    assert cli.main(args + ["--out", str(root / "b")]) == 0
    return root


def test_simulate_twice_is_byte_identical(sim_root):
    a, b = sim_root / "a" / "trials", sim_root / "b" / "trials"
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert len(files) == 3 * len(FILES)  # TBC, AMTC and natural walking
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_output_directory_from_environment(sim_root, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(sim_root / "a"))
    assert cli.main(["analyze"]) == 0
    assert (sim_root / "a" / "blocks.csv").exists()


def test_stride_portrait_has_one_row_per_stride(sim_root):
    out = sim_root / "a"
    assert cli.main(["ip", "--pair", "TBC", "AMTC", "--level", "stride", "--out", str(out)]) == 0
    pts = read_frame(out / "ip_stride_TBC_AMTC.csv")
    assert cli.main(["analyze", "--out", str(out)]) == 0
    strides = read_frame(out / "strides.csv")
    n_amtc = int((strides["controller"] == "AMTC").sum())
    assert n_amtc > 5 and len(pts) == n_amtc
    assert np.all(pts["radius"] <= 1 + 1e-12)


def test_block_portrait_and_tables_carry_config_hash(sim_root):
    out = sim_root / "a"
    assert cli.main(["ip", "--out", str(out)]) == 0
    tab = read_table(out / "ip_block_TBC_AMTC.csv")
    assert tab.meta["config_hash"] == config_hash(default_config())
    assert len(tab.frame) == 1


def test_no_emg_refuses_effort_outputs(sim_root, tmp_path):
    trials = tmp_path / "trials"
    shutil.copytree(sim_root / "a" / "trials", trials)
    for p in trials.rglob(FILES["emg"]):
        p.unlink()
    base = ["--trials", str(trials), "--out", str(tmp_path)]
    assert cli.main(["analyze", "--no-emg"] + base) == 0
    blocks = read_frame(tmp_path / "blocks.csv")
    assert blocks["tau_total"].notna().all()
    assert cli.main(["ip", "--no-emg"] + base) == 2
    assert cli.main(["stats", "--no-emg"] + base) == 2
    assert cli.main(["analyze"] + base) == 2  # EMG expected but absent


def test_demo_report_emits_every_figure_quickly(tmp_path):
    import time
    from exoportrait.plotting import FIGURE_KINDS
    t0 = time.perf_counter()
    assert cli.main(["report", "--simulate", "demo", "--out", str(tmp_path)]) == 0
    assert time.perf_counter() - t0 < 60.0
    h = config_hash(default_config())
    for kind in FIGURE_KINDS:
        svg = (tmp_path / "figures" / f"{kind}.svg").read_text()
        assert f"config_hash={h}" in svg
    assert f"config_hash={h}" in (tmp_path / "report.txt").read_text()
