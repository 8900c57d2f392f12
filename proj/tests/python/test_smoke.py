import math
import pathlib

import pytest

import entlink

SCENARIOS = pathlib.Path(__file__).resolve().parents[2] / "scenarios"


def small_config(**overrides):
    cfg = {"pair_rate": 2000, "duration": 1.0, "jitter_sigma": 0.0, "seed": 3}
    cfg.update(overrides)
    return cfg


def test_version():
    assert entlink.__version__ == "0.3.0"


def test_polarization_closed_forms():
    assert entlink.joint_probability(1, 1, 0, 0, 1.0) == pytest.approx(0.0)
    assert entlink.joint_probability(1, -1, 0, 0, 1.0) == pytest.approx(0.5)
    assert entlink.correlation(0, 22.5, 1.0) == pytest.approx(-math.sqrt(0.5))
    assert entlink.chsh_value(0, 45, 22.5, 67.5, 1.0) == pytest.approx(2 * math.sqrt(2))
    assert entlink.qber_from_visibility(0.91) == pytest.approx(0.045)
    with pytest.raises(ValueError):
        entlink.correlation(0, 0, 1.5)


def test_table1_chsh():
    r = entlink.chsh([-0.681, 0.764, -0.421, -0.581], [0.040, 0.036, 0.052, 0.046])
    assert r["s"] == pytest.approx(2.447)
    assert r["sigma"] == pytest.approx(0.0878, abs=5e-4)
    assert abs(r["significance"] - 5.0) <= 0.1


def test_default_config_round_trips():
    cfg = entlink.default_link_config()
    assert cfg["window"] == pytest.approx(20e-9)
    run = entlink.simulate(dict(cfg, duration=0.1, seed=1))
    assert set(run) == {"alice", "bob", "truth"}


def test_simulate_is_deterministic_and_sorted():
    a = entlink.simulate(small_config())
    b = entlink.simulate(small_config())
    assert a == b
    times = [e[0] for e in a["alice"]]
    assert times == sorted(times)
    assert len(a["truth"]) == len(a["alice"])


def test_coincidences_recover_pairs():
    out = entlink.coincidences(small_config())
    assert len(out["records"]) == out["singles_alice"]


def test_bell_test_violates():
    r = entlink.bell_test(small_config(duration=5.0))
    assert r["s"] > 2.5
    assert abs(r["s"] - r["predicted_s"]) < 4 * r["sigma"]


def test_fringe_fit():
    angles = [k * 11.25 for k in range(16)]
    counts = [100 * (1 - 0.9 * math.cos(2 * math.radians(a - 30))) for a in angles]
    fit = entlink.fit_fringe(angles, counts)
    assert fit["visibility"] == pytest.approx(0.9)
    assert fit["phase_deg"] == pytest.approx(30.0)
    assert "error" in entlink.fit_fringe([0, 0, 0], [1, 2, 3])


def test_visibility_scan():
    curves = entlink.visibility_scan(small_config(), [0.0], [k * 11.25 for k in range(16)])
    assert curves[0]["label"] == "H"
    assert curves[0]["fit"]["visibility"] > 0.9


def test_cascade_and_privacy():
    alice = [i % 2 for i in range(1024)]
    bob = list(alice)
    bob[500] ^= 1
    corrected, leaked, corrections = entlink.cascade(alice, bob, 0.01, seed=4)
    assert corrected == alice
    assert corrections == 1
    assert leaked > 0
    assert entlink.final_key_length(1000, 0.0, 0, 1.0) == 1000
    assert len(entlink.toeplitz_hash(alice, 100, 9)) == 100
    assert entlink.binary_entropy(0.5) == pytest.approx(1.0)


def test_qkd_session_keys_match():
    cfg = small_config(duration=3.0, settings_bob={"basis_angles_deg": [0, 45], "splitter_ratio": 0.5})
    ledger = entlink.qkd_session(cfg, seed=5)
    assert ledger["abort"] is None
    assert ledger["keys_match"]
    assert ledger["alice_key"] == ledger["bob_key"]
    assert ledger["qber"] == 0.0


def test_scenario_run_and_verify(tmp_path):
    summary = entlink.run_scenario(SCENARIOS / "table1.scenario", report_dir=tmp_path / "t1")
    assert "chsh.json" in summary["files"]
    report = entlink.verify(tmp_path / "t1")
    assert report["passed"]
    assert report["experiment"] == "bell_test"


def test_bad_config_raises():
    with pytest.raises(ValueError):
        entlink.simulate(small_config(duration=0))
    with pytest.raises(ValueError):
        entlink.simulate(small_config(no_such_key=1))
