import os

import pytest

from labshare.cli import main
from labshare.irlex import read_indices_csv


@pytest.fixture(scope="module")
def fixtures(tmp_path_factory):
    d = tmp_path_factory.mktemp("fx")
    assert main(["synth", "-o", str(d)]) == 0
    assert main(["derive", str(d / "unido.csv"), "-o", str(d / "derived.csv")]) == 0
    assert main(["index", str(d / "irlex_codes.csv"), "-o", str(d / "indices.csv")]) == 0
    return d


def test_missing_input_exits_2(tmp_path, capsys):
    missing = str(tmp_path / "nope.csv")
    assert main(["derive", missing, "-o", str(tmp_path / "out.csv")]) == 2
    err = capsys.readouterr().err
    assert "input file not found" in err and missing in err


def test_bad_alpha_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["derive", "x.csv", "-o", "y.csv", "--alpha", "1.5"])


def test_schema_error_exits_1(tmp_path, capsys):
    bad = tmp_path / "u.csv"
    bad.write_text("country,industry,year\nA,15,2000\n")
    assert main(["ingest", "--unido", str(bad)]) == 1
    assert "missing required column" in capsys.readouterr().err


def test_ingest_summary(fixtures, capsys):
    args = ["ingest", "--unido", str(fixtures / "unido.csv"), "--ilo", str(fixtures / "ilo.csv")]
    args += ["--codes", str(fixtures / "irlex_codes.csv"), "--c154", str(fixtures / "c154.csv")]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "unido:" in out and "c154:" in out


def test_derived_header(fixtures):
    with open(fixtures / "derived.csv") as f:
        head = [next(f) for _ in range(3)]
    assert head[1].startswith("# alpha: ")


def test_indices_within_bounds(fixtures):
    for vec in read_indices_csv(fixtures / "indices.csv").values():
        for v in vec.as_dict().values():
            assert 0.0 <= v <= 6.0


def test_estimate_twice_identical(fixtures, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["estimate", str(fixtures / "config.yaml"), "-o", str(a)]) == 0
    assert main(["estimate", str(fixtures / "config.yaml"), "-o", str(b), "--format", "csv"]) == 0
    assert main(["estimate", str(fixtures / "config.yaml"), "-o", str(b)]) == 0
    names = sorted(os.listdir(a))
    assert names == ["cross_section_indices.txt", "cross_section_quantitative.txt", "panel_all.txt", "panel_transition.txt"]
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    text = (a / "panel_all.txt").read_text()
    assert "# alpha: " in text and "sigma range" in text


def test_estimate_unicode_minus(fixtures, tmp_path):
    assert main(["estimate", str(fixtures / "config.yaml"), "-o", str(tmp_path), "--unicode-minus"]) == 0
    body = [ln for ln in (tmp_path / "panel_all.txt").read_text().splitlines() if ln.startswith("ln_k")]
    assert "−" in body[0] and "-" not in body[0]


def test_mc_command(capsys):
    assert main(["mc", "--estimator", "tsls", "--reps", "5", "--groups", "100", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "replications: 5" in out and "Hansen J rejection rate" in out
