import csv
import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from hullconc.cli import main
from hullconc.errors import ConfigError
from hullconc.io import (
    config_from_mapping,
    config_hash,
    format_value,
    parse_config,
    parse_grid,
    verify_manifest,
    write_report,
)

MINIMAL = '''experiment = "theorem1"
model = "gaussian:I2"
n = [1000]
epsilon = [0.4]
'''


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_minimal_config_gets_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, "a.toml", MINIMAL))
    assert cfg.kind == "theorem1" and cfg.models == ["gaussian:I2"]
    assert (cfg.trials, cfg.seed, cfg.mode, cfg.m_dirs, cfg.threads) == (100, 0, "analytic", 10_000, 1)


def test_epsilon_out_of_range_cites_domain(tmp_path):
    p = write(tmp_path, "a.toml", MINIMAL.replace("[0.4]", "[0.6]"))
    with pytest.raises(ConfigError, match=r"ε ∈ \(0,1/2\)") as exc:
        parse_config(p)
    assert exc.value.key == "epsilon[0]"


@pytest.mark.parametrize(
    "text,key",
    [
        ('experiment = "theorem1"\nmodel = "gaussian:I2"\nepsilon = [0.4]\n', "n"),
        (MINIMAL + "colour = 3\n", "colour"),
        (MINIMAL + "[output]\ncsv = 'a.csv'\nformat = 'x'\n", "output.format"),
        ('experiment = "strong_law"\nmodel = "gaussian:I1"\n[schedule]\nk_min = 4\n', "schedule.k_max"),
        ('experiment = "strong_law"\nmodel = "gaussian:I1"\n[schedule]\nk_min = 1\nk_max = 5\n', "n[0]"),
        ('experiment = "lemma4"\nlaws = ["normal"]\nn = [11]\nt_grid = [0.5]\n', "n[0]"),
        ('experiment = "theorem1"\nmodel = "gaussian:I3"\nn = [3]\nepsilon = [0.4]\n', "n[0]"),
        ('experiment = "corollary2"\nmodel = "laplace:1"\nn = [12]\n', "models[0]"),
        ('experiment = "inclusion"\nmodel = "gaussian:I1"\nn = [100]\ndraws = 10\n', "draws"),
        ('experiment = "bogus"\n', "experiment"),
        ('experiment = "theorem1"\nmodel = "gaussian:diag=1,-1"\nn=[10]\nepsilon=[0.3]\n', "model"),
    ],
)
def test_config_errors_carry_key_path(tmp_path, text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, "c.toml", text))
    assert exc.value.key == key
    assert key in str(exc.value)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(tmp_path / "nope.toml")
    with pytest.raises(ConfigError, match="malformed"):
        parse_config(write(tmp_path, "bad.toml", "experiment = \n"))


def test_config_hash_stable_under_reordering(tmp_path):
    a = parse_config(write(tmp_path, "a.toml", MINIMAL + "seed = 5\ntrials = 3\n"))
    b = parse_config(write(tmp_path, "b.toml", 'trials = 3\nseed = 5\nepsilon = [0.4]\nn = [1000]\nmodel = "gaussian:I2"\nexperiment = "theorem1"\n'))
    assert config_hash(a) == config_hash(b)
    c = parse_config(write(tmp_path, "c.toml", MINIMAL + "seed = 6\ntrials = 3\n"))
    assert config_hash(a) != config_hash(c)


def test_schedule_and_grid():
    cfg = config_from_mapping({"experiment": "strong_law", "model": "gaussian:I1", "schedule": {"k_min": 4, "k_max": 6}})
    assert cfg.n == [16, 32, 64]
    assert parse_grid("0.05:1.0:0.05") == [round(0.05 * i, 12) for i in range(1, 21)]
    assert parse_grid("0.1,0.2") == [0.1, 0.2]


def test_format_value():
    assert format_value(True) == "true" and format_value(False) == "false"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(3) == "3"
    assert format_value(math.nan) == "nan" and format_value(-math.inf) == "-inf"


@given(st.floats(allow_nan=False, allow_infinity=False))
@settings(max_examples=200)
def test_real_formatting_round_trips(x):
    assert float(format_value(x)) == x


def test_empty_report_is_header_only(tmp_path):
    p = tmp_path / "e.csv"
    entry = write_report([], p, "csv", ["a", "b"])
    assert p.read_bytes() == b"a,b\n"
    assert len(entry["sha256"]) == 64


def test_reports_byte_identical(tmp_path):
    rows = [{"x": 0.1, "ok": True, "s": "é"}, {"x": 1e-300, "ok": False, "s": "a,b"}]
    a = write_report(rows, tmp_path / "a.csv", "csv", ["s", "x", "ok"])
    b = write_report(rows, tmp_path / "b.csv", "csv", ["s", "x", "ok"])
    assert a["sha256"] == b["sha256"]
    text = (tmp_path / "a.csv").read_text(encoding="utf-8")
    assert text.endswith("\n") and text.splitlines()[0] == "s,x,ok"
    assert list(csv.reader(text.splitlines()))[2] == ["a,b", "1e-300", "false"]


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-(2**53), 2**53) | st.floats(allow_nan=False) | st.text(),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=5), inner, max_size=4),
    max_leaves=20,
)


@given(json_values)
@settings(max_examples=100, deadline=None)
def test_json_round_trip(tmp_path_factory, value):
    p = tmp_path_factory.mktemp("j") / "x.json"
    write_report(value, p, "json")
    raw = p.read_bytes()
    assert raw.endswith(b"\n")
    assert json.loads(raw.decode("utf-8")) == value


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_report([], blocker / "sub" / "a.csv", "csv", ["a"])


# ------------------------------------------------------------------- CLI


LEMMA_CFG = '''experiment = "lemma4"
laws = ["uniform", "normal"]
n = [12, 100]
t_grid = "0.25:1.0:0.25"
'''


def test_cli_lemma4_manifest_and_reproduce(tmp_path, capsys):
    cfg = write(tmp_path, "l.toml", LEMMA_CFG)
    out = tmp_path / "l.csv"
    assert main(["lemma4", str(cfg), "--out", str(out)]) == 0
    man_path = tmp_path / "l.csv.manifest.json"
    man = json.loads(man_path.read_text())
    assert set(man["outputs"]) == {"l.csv", "l.summary.json"}
    assert man["master_seed"] == 0 and len(man["config_hash"]) == 64
    assert all(verify_manifest(man_path).values())
    summary = json.loads((tmp_path / "l.summary.json").read_text())
    assert summary["schema_version"] == 1 and summary["failures"] == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 * 2 * 4
    assert main(["reproduce", str(man_path)]) == 0
    assert "DIFFERS" not in capsys.readouterr().out
    out.write_text("tampered\n")
    assert main(["verify", str(man_path)]) == 2


def test_cli_order_stats(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["order-stats", "--law", "normal", "--n", "12,1000", "--t-grid", "0.5,1.0", "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[:10] == ["law", "n", "t", "e_max", "p_right", "bound_right", "p_left", "bound_left",
                           "holds_right", "holds_left"]


def test_cli_net(tmp_path):
    out = tmp_path / "net.json"
    assert main(["net", "--body", "square", "--epsilon", "0.5", "--seed", "1", "--budget", "2000", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["size"] == len(data["points"]) <= 36
    assert data["probe_coverage"]["uncovered"] == 0


def test_cli_sandwich_certificate(tmp_path):
    out = tmp_path / "s.csv"
    rc = main(["sandwich", "--model", "gaussian:I1", "--n", "1000", "--epsilon", "0.4", "--trials", "5",
               "--m-dirs", "1000", "--out", str(out)])
    assert rc == 0
    cert = json.loads((tmp_path / "s.certificate.json").read_text())["configs"][0]
    for key in ("net_size", "delta", "clamped", "min_ratio", "max_ratio"):
        assert key in cert


def test_cli_exit_codes(tmp_path, monkeypatch):
    bad = write(tmp_path, "bad.toml", MINIMAL.replace("[0.4]", "[0.6]"))
    assert main(["theorem1", str(bad)]) == 1
    good = write(tmp_path, "l.toml", LEMMA_CFG)
    assert main(["theorem1", str(good)]) == 1  # wrong subcommand for the config
    with pytest.raises(SystemExit) as exc:
        main(["net", "--body", "circle", "--epsilon", "0.3", "--out", "x"])
    assert exc.value.code == 1
    monkeypatch.setenv("HULLCONC_THREADS", "zero")
    assert main(["lemma4", str(good), "--out", str(tmp_path / "x.csv")]) == 1


def test_cli_soundness_exit_code(tmp_path, monkeypatch):
    from hullconc import experiments
    from hullconc.errors import SoundnessError

    def broken(cfg):
        raise SoundnessError("certified trial with defect above epsilon")

    monkeypatch.setitem(experiments.RUNNERS, "lemma4", broken)
    cfg = write(tmp_path, "l.toml", LEMMA_CFG)
    assert main(["lemma4", str(cfg), "--out", str(tmp_path / "x.csv")]) == 3


def test_cli_thread_env_override(tmp_path, monkeypatch):
    cfg = write(tmp_path, "l.toml", LEMMA_CFG)
    monkeypatch.setenv("HULLCONC_THREADS", "4")
    assert main(["lemma4", str(cfg), "--out", str(tmp_path / "a.csv")]) == 0
    man = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert man["config"]["threads"] == 4
    monkeypatch.delenv("HULLCONC_THREADS")
    assert main(["lemma4", str(cfg), "--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
