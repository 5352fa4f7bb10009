import json

import pytest

from hypflow.cli import build_parser, main

SUBCOMMANDS = [
    ["automaton", "validate"], ["automaton", "info"], ["automaton", "build-freeproduct"],
    ["automaton", "build-conetype"], ["growth"], ["components"], ["parry-sample"], ["pressure"],
    ["manhattan"], ["rate-function"], ["rep", "check"], ["rep", "domination"], ["rep", "multicone"],
    ["tau-ps"], ["tau-harmonic"], ["v-rho"], ["histogram"],
]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    data = json.loads(out.out) if out.out.strip() else None
    return code, data, out.err


def test_growth_octagon(capsys):
    code, data, _ = run(capsys, "growth", "--automaton", "octagon.aut")
    assert code == 0
    assert abs(data["growth_rate"] - 1.94303) <= 1e-4
    m = data["manifest"]
    assert m["command"] == "growth" and m["version"]
    assert set(m["inputs"]) == {"bundled:octagon.aut"}
    assert m["wall_clock_seconds"] >= 0


def test_growth_from_file_records_digest(capsys, tmp_path):
    from hypflow.words import bundled_text

    path = tmp_path / "g.aut"
    path.write_text(bundled_text("z4z6.aut"))
    code, data, _ = run(capsys, "growth", "--automaton", str(path))
    assert code == 0
    assert len(data["manifest"]["inputs"][str(path)]) == 64


def test_tau_ps_reference_settings(capsys, tmp_path):
    out = tmp_path / "tau.csv"
    code, data, _ = run(capsys, "tau-ps", "--rep", "octagon", "--n", "1000", "--samples", "10000",
                        "--seed", "7", "--out", str(out))
    assert code == 0
    assert abs(data["mean"] - 1.13837) <= 0.01
    assert data["manifest"]["seed"] == 7
    assert out.read_text().splitlines()[0] == "mean,stderr,n_samples,n_steps,seed"


def test_validate_z4z6_radius_8(capsys):
    code, data, _ = run(capsys, "automaton", "validate", "--automaton", "z4z6.aut", "--presentation",
                        "z4z6.grp", "--radius", "8")
    assert code == 0
    assert data["condition1_ok"] and data["condition2_ok"] and data["condition3_ok"]


def test_validation_failure_exit_code(capsys, tmp_path):
    # drop one edge: the language no longer covers the ball
    from hypflow.words import bundled_text

    lines = bundled_text("z4z6.aut").splitlines()
    edges = [i for i, ln in enumerate(lines) if ln.startswith("edge:")]
    del lines[edges[-1]]
    path = tmp_path / "broken.aut"
    path.write_text("\n".join(lines) + "\n")
    code, data, _ = run(capsys, "automaton", "validate", "--automaton", str(path), "--presentation", "z4z6",
                        "--radius", "5")
    assert code == 2 and data["ok"] is False


def test_csv_outputs_are_byte_identical(capsys, tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        code, _, _ = run(capsys, "histogram", "--bins", "16", "--n", "50", "--samples", "300", "--seed", "3",
                         "--workers", "1" if p.name == "a.csv" else "2", "--out", str(p))
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_seed_env_fallback(capsys, monkeypatch):
    monkeypatch.setenv("HYPFLOW_SEED", "123")
    code, data, _ = run(capsys, "tau-ps", "--n", "20", "--samples", "5")
    assert code == 0 and data["manifest"]["seed"] == 123


def test_manhattan_word_metric_mode(capsys, tmp_path):
    out = tmp_path / "curve.csv"
    code, data, _ = run(capsys, "manhattan", "--automaton", "z4z6", "--presentation", "z4z6",
                        "--extra-generator", "s1 s2", "--k", "3", "--s-grid=-1:1:5", "--out", str(out))
    assert code == 0
    assert data["mode"] == "word-metric" and data["convex"]
    assert 0 < data["tau"] < 1
    assert out.read_text().splitlines()[0] == "s,theta"


def test_manhattan_rep_pair_mode(capsys):
    code, data, _ = run(capsys, "manhattan", "--rep", "octagon", "--rep-star", "octagon", "--k", "2",
                        "--s-grid=-0.5:0.5:3")
    assert code == 0 and data["mode"] == "rep-pair"
    assert data["tau"] == pytest.approx(1.0, abs=1e-6)


def test_rate_function(capsys, tmp_path):
    out = tmp_path / "rate.csv"
    code, data, _ = run(capsys, "rate-function", "--automaton", "z4z6", "--presentation", "z4z6",
                        "--extra-generator", "s1 s2", "--k", "3", "--s-grid=-3:3:61",
                        "--t-grid", "0.7:0.84:15", "--out", str(out))
    assert code == 0
    assert abs(data["zero_location"] - data["tau"]) <= 0.01
    assert out.read_text().startswith("t,I\n")


def test_pressure_equilibrium(capsys):
    code, data, _ = run(capsys, "pressure", "--automaton", "z4z6", "--potential", "rep", "--rep", "z4z6",
                        "--u", "3", "--k", "2", "--scale", "-1", "--equilibrium")
    assert code == 0
    assert data["pressure"] == pytest.approx(data["entropy"] + data["mean_potential"], abs=1e-8)


def test_rep_commands(capsys):
    code, data, _ = run(capsys, "rep", "check", "--rep", "octagon", "--presentation", "octagon")
    assert code == 0 and data["ok"] and data["displacement_deviation"] <= 1e-6
    code, data, _ = run(capsys, "rep", "domination", "--rep", "z4z6", "--u", "0", "--presentation", "z4z6",
                        "--radius", "5")
    assert code == 2 and data["pass"] is False
    code, data, _ = run(capsys, "rep", "multicone", "--rep", "octagon", "--cones", "octagon")
    assert code == 0 and data["pass"] and data["min_margin"] > 0
    code, data, _ = run(capsys, "rep", "multicone", "--rep", "z4z6", "--u", "3", "--automaton", "z4z6")
    assert code == 2 and data["pass"] is False


def test_rep_from_json(capsys, tmp_path):
    from hypflow.replin import octagon_rep

    path = tmp_path / "rho.json"
    path.write_text(octagon_rep().to_json())
    code, data, _ = run(capsys, "rep", "check", "--rep", str(path), "--presentation", "octagon", "--words", "50")
    assert code == 0 and data["ok"]


def test_builders(capsys, tmp_path):
    out = tmp_path / "z.aut"
    code, data, _ = run(capsys, "automaton", "build-freeproduct", "--p", "4", "--q", "6", "--out", str(out))
    assert code == 0 and data["states"] == 9
    from hypflow.words import bundled_text

    assert out.read_text() == bundled_text("z4z6.aut")
    code, data, _ = run(capsys, "automaton", "info", "--automaton", "octagon")
    assert data["states"] == 37 and [c["states"] for c in data["components"]] == [36]


def test_components_and_parry_sample(capsys, tmp_path):
    code, data, _ = run(capsys, "components", "--automaton", "octagon")
    assert code == 0 and len(data["components"]) == 1
    out = tmp_path / "words.csv"
    code, data, _ = run(capsys, "parry-sample", "--n", "12", "--samples", "4", "--seed", "1", "--out", str(out))
    assert code == 0 and len(data["first_word"]) == 12
    assert len(out.read_text().splitlines()) == 5


def test_v_rho_and_harmonic(capsys):
    code, data, _ = run(capsys, "v-rho", "--radius", "6")
    assert code == 0 and 1.5 <= data["v_rho"] <= 2.6
    code, data, _ = run(capsys, "tau-harmonic", "--n", "100", "--samples", "20", "--seed", "2")
    assert code == 0 and data["n_samples"] == 20 and "resampled" in data


def test_errors_exit_one(capsys):
    code, _, err = run(capsys, "growth", "--automaton", "/does/not/exist.aut")
    assert code == 1 and err.count("\n") == 1
    code, _, err = run(capsys, "manhattan", "--automaton", "z4z6", "--rep", "z4z6", "--u", "2",
                       "--rep-star", "z4z6", "--k", "2", "--s-grid", "0")
    assert code == 1 and "NoBracketing" in err


@pytest.mark.parametrize("argv", [["bogus"], ["growth"], ["growth", "--automaton", "octagon", "--nope"],
                                  ["rep"], ["tau-ps", "--n", "abc"]])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1
    err = capsys.readouterr().err
    assert err.strip() and err.count("\n") == 1


@pytest.mark.parametrize("argv", SUBCOMMANDS)
def test_help_for_every_subcommand(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv + ["--help"])
    assert exc.value.code == 0
    assert "usage:" in capsys.readouterr().out


def test_parser_lists_every_subcommand():
    text = build_parser().format_help()
    for name in ("automaton", "growth", "components", "parry-sample", "pressure", "manhattan", "rate-function",
                 "rep", "tau-ps", "tau-harmonic", "v-rho", "histogram"):
        assert name in text
