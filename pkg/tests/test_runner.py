import csv
import json

import numpy as np
import pytest

from manifold_ae.runner import artifacts
from manifold_ae.runner.cli import main
from manifold_ae.runner.config import ConfigError, circles_config, parse_config

SMALL = {
    "manifold": {"preset": "interlaced_circles"},
    "sampling": {"n_per_component": 40, "seed": 3},
    "architecture": {"encoder_widths": [3, 16, 16, 1], "decoder_widths": [1, 16, 16, 3]},
    "training": {"epochs": 3, "batch_size": 10, "seed": 4},
    "oracle": {"delta": 0.05, "n_random_protected": 10, "protected_seed": 7, "n_samples": 20000},
    "analysis": {"sup_grid": 2000, "refine_iters": 10, "n_samples": 2000},
}


def write_config(tmp_path, cfg=SMALL, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def artifact_bytes(out):
    # summary.json carries wall-clock time, so it is compared without that key
    res = {}
    for p in sorted(out.rglob("*")):
        if p.is_dir():
            continue
        if p.name == "summary.json":
            d = json.loads(p.read_text())
            d.pop("wall_clock_seconds")
            res[str(p.relative_to(out))] = json.dumps(d, sort_keys=True).encode()
        else:
            res[str(p.relative_to(out))] = p.read_bytes()
    return res


# -- config -------------------------------------------------------------------

def test_minimal_config_defaults():
    cfg = parse_config('{"manifold": {"preset": "unit_circle"}}')
    assert cfg.training.learning_rate == 1e-3
    assert cfg.analysis.slack == 0.1
    assert cfg.training.epochs == 2000 and cfg.training.batch_size == 20
    assert cfg.encoder_widths == [3, 128, 128, 128, 1]
    assert cfg.encoder_activations == ["relu", "relu", "relu", "linear"]
    assert cfg.oracle is None


def test_bottleneck_mismatch_names_both_paths():
    doc = {"manifold": {"preset": "unit_circle"},
           "architecture": {"encoder_widths": [3, 8, 1], "decoder_widths": [2, 8, 3]}}
    with pytest.raises(ConfigError) as e:
        parse_config(json.dumps(doc))
    msg = str(e.value)
    assert "$.architecture.encoder_widths" in msg and "$.architecture.decoder_widths" in msg


@pytest.mark.parametrize("text,where", [
    ('{"manifold": {"preset": "unit_circle"}, "manifold": {"preset": "unit_circle"}}', "duplicate"),
    ('{"manifold": {"preset": "unit_circle"}, "trainig": {}}', "trainig"),
    ('{"manifold": {"preset": "unit_circle"}, "training": {"epochs": 0}}', "$.training.epochs"),
    ('{"sampling": {}}', "$.manifold"),
    ('{"manifold": {"preset": "torus"}}', "$.manifold"),
    ('{"manifold": {"preset": "unit_circle"}, "oracle": {"delta": 0}}', "$.oracle.delta"),
    ('{"manifold": {"preset": "unit_circle"', "JSON"),
])
def test_config_errors(text, where):
    with pytest.raises(ConfigError, match=None) as e:
        parse_config(text)
    assert where in str(e.value)


def test_explicit_components():
    doc = {"manifold": {"components": [
        {"kind": "sphere2", "center": [0, 0, 0], "radius": 1.0},
        {"kind": "circle", "center": [5, 0, 0], "normal": [0, 0, 1], "radius": 2.0}]}}
    cfg = parse_config(json.dumps(doc))
    assert len(cfg.manifold) == 2


def test_config_hash_is_stable():
    a, b = circles_config(), circles_config()
    assert a.config_hash() == b.config_hash()
    assert circles_config(seed=1).config_hash() != a.config_hash()


def test_json_floats_round_trip(tmp_path):
    vals = [0.1, 1 / 3, np.pi, 1e-300, float("inf")]
    artifacts.write_json(tmp_path / "x.json", {"v": vals})
    back = json.loads((tmp_path / "x.json").read_text())["v"]
    assert back[:4] == vals[:4]
    assert back[4] == "inf"


# -- cli ----------------------------------------------------------------------

def test_usage_error_exits_one(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["reproduce-circles", "--out", "x", "--seed", "-1"])
    assert e.value.code == 1


def test_unwritable_outdir_exits_one(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["reproduce-circles", "--seed", "0", "--out", str(blocker / "sub"), "--epochs", "1"])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_missing_config_file_exits_one(tmp_path):
    assert main(["sample", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


def test_oracle_delta_zero_exits_one(tmp_path):
    cfg = dict(SMALL, oracle={"delta": 0})
    assert main(["oracle", "--config", str(write_config(tmp_path, cfg)),
                 "--out", str(tmp_path / "o")]) == 1


def test_oracle_command(tmp_path):
    out = tmp_path / "o"
    assert main(["oracle", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["max_off_badset_error"] <= 1e-9
    assert s["badset_hits_protected"] == 0
    assert s["schema_version"] == artifacts.SCHEMA_VERSION
    assert len(s["config_hash"]) == 64 and s["wall_clock_seconds"] >= 0
    assert (out / "oracle.json").exists()
    a = json.loads((out / "analysis.json").read_text())
    assert a["bound_satisfied"] and a["sup_error_estimate"] >= 0.5 * 0.99


def test_sample_command(tmp_path):
    out = tmp_path / "s"
    assert main(["sample", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    rows = read_csv(out / "points.csv")
    assert rows[0] == ["component_id", "param0", "param1", "x", "y", "z"]
    assert len(rows) == 81
    assert (out / "points.svg").read_text().lstrip().startswith("<?xml")


def test_train_then_analyze(tmp_path):
    cfgp = write_config(tmp_path)
    out = tmp_path / "t"
    code = main(["train", "--config", str(cfgp), "--out", str(out)])
    assert code in (0, 2)  # three epochs rarely converge
    for name in ("original.csv", "decoded.csv", "bottleneck.csv", "summary.json",
                 "decoded.svg", "bottleneck.svg", "encoder.json", "decoder.json"):
        assert (out / name).exists(), name
    rows = read_csv(out / "decoded.csv")
    assert rows[0] == ["component_id", "x", "y", "z", "x_hat", "y_hat", "z_hat", "err"]
    assert len(rows) == 81
    assert read_csv(out / "bottleneck.csv")[0] == ["component_id", "u"]
    rows = np.array(rows[1:], dtype=float)
    assert np.allclose(np.linalg.norm(rows[:, 4:7] - rows[:, 1:4], axis=1), rows[:, 7], atol=1e-15)

    an = tmp_path / "a"
    assert main(["analyze", "--config", str(cfgp), "--out", str(an), "--model", str(out)]) in (0, 2)
    s = json.loads((an / "summary.json").read_text())
    assert s["model"] == "neural"
    assert all(a >= b for a, b in zip(s["mu_hat"], s["mu_hat"][1:]))


def test_reproduce_circles_row_count(tmp_path):
    out = tmp_path / "r"
    main(["reproduce-circles", "--seed", "5", "--out", str(out), "--epochs", "1"])
    assert len(read_csv(out / "decoded.csv")) == 1001
    assert len(read_csv(out / "bottleneck.csv")) == 1001
    cid = [r[0] for r in read_csv(out / "decoded.csv")[1:]]
    assert cid.count("0") == 500 and cid.count("1") == 500


def test_rerun_is_bit_identical(tmp_path):
    cfgp = write_config(tmp_path)
    for cmd in ("train", "oracle", "sample"):
        a, b = tmp_path / f"{cmd}_a", tmp_path / f"{cmd}_b"
        main([cmd, "--config", str(cfgp), "--out", str(a)])
        main([cmd, "--config", str(cfgp), "--out", str(b)])
        assert artifact_bytes(a) == artifact_bytes(b), cmd


def test_sweep_order_and_errors(tmp_path):
    cfgp = write_config(tmp_path)
    out = tmp_path / "sw"
    code = main(["sweep", "--config", str(cfgp), "--out", str(out), "--seeds", "9,2,5", "--jobs", "2"])
    assert code in (0, 2)
    sweep = json.loads((out / "sweep.json").read_text())
    assert sweep["seeds"] == [9, 2, 5]
    assert [r["seed"] for r in sweep["runs"]] == [9, 2, 5]
    for s in (9, 2, 5):
        assert (out / f"seed_{s}" / "summary.json").exists()
    # serial and parallel runs agree
    out2 = tmp_path / "sw2"
    main(["sweep", "--config", str(cfgp), "--out", str(out2), "--seeds", "9,2,5"])
    assert json.loads((out2 / "sweep.json").read_text()) == sweep


def test_sweep_empty_seed_list(tmp_path):
    assert main(["sweep", "--config", str(write_config(tmp_path)), "--out", str(tmp_path / "e"),
                 "--seeds", ""]) == 1
