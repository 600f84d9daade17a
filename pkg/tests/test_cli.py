import csv
import io
import json
import math
import os

import pytest

from nanomoments import cli
from nanomoments.cli import CSV_COLUMNS, load_config, main, parse_config_text
from nanomoments.theory import ValidityError

GOLDEN = os.path.join(os.path.dirname(__file__), "data", "moments_header.csv")


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sample_command(capsys):
    code, out, _ = run(["sample", "--ensemble", "u", "--n", "4", "--count", "2", "--seed", "7"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert [int(r[0]) for r in rows] == [0, 1]
    for r in rows:
        th = [float(x) for x in r[1:]]
        assert len(th) == 4
        assert th == sorted(th)
        assert all(-math.pi < t <= math.pi for t in th)
        assert all(len(x.replace("-", "").replace(".", "").lstrip("0")) <= 17 for x in r[1:])


def test_sample_is_repeatable(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["sample", "--ensemble", "so-odd", "--n", "5", "--count", "3", "--seed", "2", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_sample_usp_dense_is_usage_error(capsys):
    code, _, err = run(["sample", "--ensemble", "usp", "--n", "4", "--backend", "dense"], capsys)
    assert code == 2
    assert "dense" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, _ = run(["moments", "--bogus"], capsys)
    assert code == 2


def test_csv_header_matches_golden_file(capsys):
    code, out, _ = run(["moments", "--ensemble", "u", "--n", "8", "--a", "0.2", "--k", "2.5", "--samples", "200",
                        "--seed", "1"], capsys)
    assert code == 0
    with open(GOLDEN, encoding="utf-8") as fh:
        golden = fh.read().strip()
    header, row = out.strip().splitlines()
    assert header == golden == ",".join(CSV_COLUMNS)
    fields = dict(zip(CSV_COLUMNS, row.split(",")))
    assert fields["ensemble"] == "u" and fields["N"] == "8" and fields["samples"] == "200"
    assert fields["seed"] == "1" and fields["backend"] == "dense"
    assert float(fields["ratio"]) == pytest.approx(float(fields["estimate"]) / float(fields["prediction"]))


def test_numbers_round_trip(capsys):
    _, out, _ = run(["moments", "--ensemble", "so-even", "--n", "8", "--a", "0.1", "--k", "2", "--samples", "200",
                     "--seed", "3", "--format", "json"], capsys)
    rec = json.loads(out)
    _, out2, _ = run(["moments", "--ensemble", "so-even", "--n", "8", "--a", "0.1", "--k", "2", "--samples", "200",
                      "--seed", "3"], capsys)
    row = dict(zip(CSV_COLUMNS, out2.strip().splitlines()[1].split(",")))
    assert float(row["estimate"]) == rec["results"][0]["estimate"]


def test_json_record_fields(capsys):
    code, out, _ = run(["moments", "--ensemble", "usp", "--n", "8", "--a", "0.2", "--a", "0.1", "--k", "4",
                        "--samples", "300", "--seed", "5", "--format", "json"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert {"timestamp", "command", "config", "results", "version", "seed"} <= rec.keys()
    assert rec["seed"] == 5 and rec["config"]["a"] == [0.2, 0.1]
    assert [set(r) for r in rec["results"]] == [set(CSV_COLUMNS)] * 2


def test_validity_error_names_threshold(capsys):
    code, _, err = run(["moments", "--ensemble", "usp", "--n", "8", "--a", "0.1", "--k", "2"], capsys)
    assert code == 2
    assert "K>3" in err
    code, _, err = run(["moments", "--ensemble", "u", "--n", "8", "--a", "0.1", "--k", "1"], capsys)
    assert code == 2 and "K>1" in err


def test_scan_has_trend_line(capsys):
    code, out, _ = run(["scan", "--ensemble", "usp", "--n", "16", "--a", "0.2", "--a", "0.1", "--k", "4",
                        "--samples", "500", "--seed", "1"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 4
    assert lines[-1].startswith("# trend ")
    assert [float(l.split(",")[2]) for l in lines[1:3]] == [0.2, 0.1]


def test_scan_single_a_is_usage_error(capsys):
    code, _, _ = run(["scan", "--ensemble", "u", "--n", "8", "--a", "0.2", "--k", "2"], capsys)
    assert code == 2


def test_decompose_columns(capsys):
    code, out, _ = run(["decompose", "--ensemble", "u", "--n", "16", "--a", "0.05", "--k", "2.5", "--samples", "200",
                        "--seed", "1"], capsys)
    assert code == 0
    header, row = out.strip().splitlines()
    cols = header.split(",")
    assert tuple(cols[:12]) == CSV_COLUMNS
    assert "ratio_E_over_M" in cols
    assert len(row.split(",")) == len(cols)


def test_seed_env_fallback(capsys, monkeypatch):
    monkeypatch.setenv("RMT_SEED", "99")
    _, out, _ = run(["moments", "--ensemble", "u", "--n", "4", "--a", "0.2", "--k", "2", "--samples", "100"], capsys)
    assert out.strip().splitlines()[1].split(",")[10] == "99"
    monkeypatch.setenv("RMT_SEED", "abc")
    code, _, _ = run(["moments", "--ensemble", "u", "--n", "4", "--a", "0.2", "--k", "2", "--samples", "100"], capsys)
    assert code == 2


def test_workers_give_identical_csv(tmp_path):
    outs = []
    for w in (1, 4):
        p = tmp_path / f"w{w}.csv"
        assert main(["moments", "--ensemble", "so-even", "--n", "10", "--a", "0.1", "--k", "2.5", "--samples", "1000",
                     "--seed", "11", "--workers", str(w), "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


# --- config files ---


def test_load_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# desk-scale unitary run\nensemble=u\nn=64\na=0.05\nk=2.5\n")
    c = load_config(p)
    assert c.family.value == "u" and c.n == 64 and c.a_list == (0.05,) and c.k == 2.5
    assert c.samples == 20_000


def test_config_unknown_key(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("ensemble=u\nalpha=3\nbeta=1\n")
    with pytest.raises(cli.ConfigError, match="alpha"):
        load_config(p)


def test_config_parse_error_has_line_number():
    with pytest.raises(cli.ConfigError, match=":2:"):
        parse_config_text("ensemble=u\nn 64\n")
    with pytest.raises(cli.ConfigError, match=":1:"):
        parse_config_text("n=sixty\n")


def test_config_validity(tmp_path):
    p = tmp_path / "k.cfg"
    p.write_text("ensemble=u\nn=64\na=0.05\nk=0.5\n")
    with pytest.raises(ValidityError):
        load_config(p)


def test_flags_override_config(tmp_path, capsys):
    p = tmp_path / "run.cfg"
    p.write_text("ensemble=u\nn=8\na=0.2,0.1\nk=2.5\nsamples=150\nseed=4\n")
    code, out, _ = run(["moments", "--config", str(p), "--seed", "6"], capsys)
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert len(rows) == 2
    assert all(r.split(",")[10] == "6" for r in rows)


def test_verify_quick(capsys):
    code, out, _ = run(["verify", "--quick"], capsys)
    assert code == 0
    assert "PASS gamma_integral" in out and "FAIL" not in out


def test_verify_reports_failure(capsys, monkeypatch):
    from nanomoments import verification

    monkeypatch.setattr(verification, "QUICK", (verification.check_integer_moments,))
    monkeypatch.setattr(verification, "check_integer_moments", verification.check_integer_moments)
    monkeypatch.setattr(cli, "__version__", cli.__version__)
    # a mutated unitary Gamma ratio makes the Gamma/integral check fail
    import nanomoments.theory as theory
    monkeypatch.setattr(theory, "_unitary_gamma_ratio", lambda k: math.gamma((k - 1) / 2) / math.gamma(k))
    monkeypatch.setattr(verification, "QUICK", (verification.check_gamma_integral,))
    code, out, _ = run(["verify", "--quick"], capsys)
    assert code == 1
    assert out.startswith("FAIL gamma_integral")
