import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import pytest

from cwsc.errors import ConfigError, IoError
from cwsc.harness import checks, cli, experiments, runner
from cwsc.harness.config import load_config, make_config, parse_config
from cwsc.harness.rng import derive_seed, make_rng
from cwsc.harness.svg import emit_svg

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# small instances of every experiment, shared with the determinism checks
SMALL = {
    "figure1": dict(N_grid=[40], replicas=3, n_points=201),
    "decay_correlations": dict(beta=[0.5, 1.5], N_grid=[100, 1000], ell=[1, 2]),
    "domination": dict(beta=[0.0, 1.0], N_grid=[16, 32], replicas=3, n_E=4),
    "simultaneous": dict(N_grid=[16, 32], replicas=2, max_points=500),
    "intervals": dict(N_grid=[32, 64], replicas=2),
    "kernel": dict(N_grid=[32, 64], replicas=2),
    "ldp": dict(N_grid=[16], replicas=2, indices=4),
    "perturbation": dict(beta=[1.0, 1.5], N_grid=[16], replicas=2, rank=[1, 2], eta=[0.5]),
    "cwtype_check": dict(beta=[0.5], N_grid=[100, 1000], p=[2]),
}


def small_config(name, seed=11):
    return make_config(name, master_seed=seed, **SMALL[name])


class TestConfig:
    def test_parse_and_defaults(self):
        cfg = parse_config("experiment = domination\n# comment\nbeta = 0.0, 1.0  # trailing\nN_grid = 64\n")
        assert cfg["beta"] == [0.0, 1.0] and cfg["N_grid"] == [64]
        assert cfg["epsilon"] == 0.2 and cfg.master_seed == 0

    @pytest.mark.parametrize("text", [
        "beta = 0.5",
        "experiment = nonsense",
        "experiment = domination\nbeta = -1",
        "experiment = domination\ntau = 1.0",
        "experiment = domination\nwhatever = 3",
        "experiment = domination\nreplicas = 2\nreplicas = 3",
        "experiment = domination\nN_grid = 8192",
        "experiment = domination\nstatistic = median",
        "experiment = domination\nN_grid =",
        "experiment = domination\nno equals sign",
        "experiment = domination\nmaster_seed = -4",
    ])
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_spin_count_experiments_allow_large_N(self):
        assert parse_config("experiment = decay_correlations\nN_grid = 100000")["N_grid"] == [100000]

    def test_hash_ignores_output_dir(self):
        a = make_config("kernel", master_seed=3, N_grid=[64])
        b = make_config("kernel", master_seed=3, output_dir="elsewhere", N_grid=[64])
        c = make_config("kernel", master_seed=4, N_grid=[64])
        assert a.config_hash == b.config_hash != c.config_hash

    def test_output_dir_resolution(self, monkeypatch):
        monkeypatch.setenv("CWSC_OUTPUT_DIR", "/tmp/x")
        assert str(make_config("kernel").resolved_output_dir()) == "/tmp/x"
        assert str(make_config("kernel", output_dir="y").resolved_output_dir()) == "y"
        monkeypatch.delenv("CWSC_OUTPUT_DIR")
        assert str(make_config("kernel").resolved_output_dir()) == "cwsc_output"

    def test_shipped_configs_parse(self):
        names = {load_config(p).experiment for p in CONFIGS.glob("*.cfg")}
        assert names == set(SMALL)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_config(tmp_path / "absent.cfg")


class TestSeeds:
    def test_derivation(self):
        payload = struct.pack("<QQQ", 7, 128, 3) + b"domination"
        expected = int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")
        assert derive_seed(7, "domination", 128, 3) == expected

    def test_frozen_value(self):
        assert derive_seed(0, "figure1", 100, 0) == 15444634194107687212

    def test_distinct(self):
        seeds = {derive_seed(1, e, N, r) for e in ("a", "b") for N in (8, 16) for r in range(50)}
        assert len(seeds) == 200

    def test_stream_reproducible(self):
        assert np.array_equal(make_rng(5).random(10), make_rng(5).random(10))
        assert not np.array_equal(make_rng(5).random(10), make_rng(6).random(10))


def _read(path):
    return Path(path).read_bytes()


class TestRunner:
    def test_vacuous_run(self, tmp_path):
        cfg = make_config("domination", replicas=0, N_grid=[16])
        man = runner.run(cfg, outdir=tmp_path)
        rows = list(csv.reader(open(tmp_path / "domination.csv")))
        assert rows == [list(runner.CSV_COLUMNS)]
        assert man["seeds"] == [] and runner.validate_manifest(tmp_path / "domination.manifest.json")

    def test_rerun_byte_identical(self, tmp_path):
        cfg = small_config("domination")
        runner.run(cfg, outdir=tmp_path / "a")
        runner.run(cfg, outdir=tmp_path / "b")
        assert _read(tmp_path / "a/domination.csv") == _read(tmp_path / "b/domination.csv")

    @pytest.mark.parametrize("name", ["domination", "intervals", "perturbation"])
    def test_workers_do_not_matter(self, tmp_path, name):
        cfg = small_config(name)
        runner.run(cfg, workers=1, outdir=tmp_path / "w1")
        runner.run(cfg, workers=2, outdir=tmp_path / "w2")
        assert _read(tmp_path / f"w1/{name}.csv") == _read(tmp_path / f"w2/{name}.csv")

    def test_resume(self, tmp_path):
        cfg = small_config("kernel")
        runner.run(cfg, outdir=tmp_path / "full")
        # keep only the first two completed cells, plus a torn line
        part = tmp_path / "part"
        part.mkdir()
        lines = (tmp_path / "full/kernel.progress").read_text().splitlines()
        (part / "kernel.progress").write_text("\n".join(lines[:2]) + "\n{\"torn")
        man = runner.run(cfg, resume=True, outdir=part)
        assert man["resumed_cells"] == 2
        assert _read(part / "kernel.csv") == _read(tmp_path / "full/kernel.csv")

    def test_resume_ignores_other_configs(self, tmp_path):
        runner.run(small_config("kernel", seed=1), outdir=tmp_path)
        man = runner.run(small_config("kernel", seed=2), resume=True, outdir=tmp_path)
        assert man["resumed_cells"] == 0

    def test_manifest(self, tmp_path):
        cfg = small_config("intervals")
        man = runner.run(cfg, outdir=tmp_path)
        path = tmp_path / "intervals.manifest.json"
        assert json.loads(path.read_text()) == man
        assert man["config_hash"] == cfg.config_hash and len(man["seeds"]) == 4
        assert man["seeds"][0]["seed"] == derive_seed(11, "intervals", 32, 0)
        assert runner.validate_manifest(path)
        with open(tmp_path / "intervals.csv", "a") as fh:
            fh.write("tampered\n")
        assert not runner.validate_manifest(path)

    def test_csv_schema(self, tmp_path):
        runner.run(small_config("ldp"), outdir=tmp_path)
        rows = list(csv.DictReader(open(tmp_path / "ldp.csv")))
        assert list(rows[0]) == list(runner.CSV_COLUMNS)
        res = [float(r["value"]) for r in rows if r["statistic"] == "schur_residual_max"]
        assert max(res) < 1e-10

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(IoError):
            runner.run(small_config("kernel"), outdir=blocker / "sub")

    def test_figure1_outputs(self, tmp_path):
        cfg = small_config("figure1")
        man = runner.run(cfg, outdir=tmp_path)
        names = sorted(f["path"] for f in man["files"])
        assert names == ["figure1.csv", "figure1.svg", "figure1_eta0.01.csv", "figure1_eta0.1.csv"]
        curve = list(csv.reader(open(tmp_path / "figure1_eta0.1.csv")))
        assert curve[0] == ["E", "smoothed", "semicircle"] and len(curve) == 202
        assert man["summary"]["replicas"] == 3

    def test_perturbation_summary(self, tmp_path):
        man = runner.run(small_config("perturbation"), outdir=tmp_path)
        assert man["summary"]["violations"] == 0 and man["summary"]["trials"] > 0

    def test_cell_order(self):
        cfg = small_config("domination")
        assert experiments.cells(cfg)[:4] == [(0.0, 16, 0), (0.0, 16, 1), (0.0, 16, 2), (0.0, 32, 0)]


class TestSvg:
    def test_empty(self):
        doc = emit_svg([])
        assert doc.startswith("<svg") and "<polyline" not in doc and "<line" in doc

    def test_constant_curve(self):
        doc = emit_svg([("flat", [0, 1, 2], [0.5, 0.5, 0.5])])
        assert doc.count("<polyline") == 1
        pts = doc.split('points="')[1].split('"')[0].split()
        assert len({p.split(",")[1] for p in pts}) == 1

    def test_deterministic(self, tmp_path):
        curves = [("a", np.linspace(-2, 2, 50), np.sin(np.linspace(-2, 2, 50)))]
        emit_svg(curves, tmp_path / "1.svg", reference_density=True)
        emit_svg(curves, tmp_path / "2.svg", reference_density=True)
        assert _read(tmp_path / "1.svg") == _read(tmp_path / "2.svg")


class TestCli:
    def test_run_and_plot(self, tmp_path, capsys):
        cfg = tmp_path / "k.cfg"
        cfg.write_text("experiment = kernel\nN_grid = 16, 32\nreplicas = 2\n")
        assert cli.main(["run", str(cfg), "--output", str(tmp_path / "out")]) == cli.EXIT_OK
        assert "kernel.csv" in capsys.readouterr().out
        svg = tmp_path / "k.svg"
        assert cli.main(["plot", str(tmp_path / "out/kernel.csv"), "-o", str(svg)]) == cli.EXIT_OK
        assert svg.read_text().count("<polyline") == 1

    def test_env_output_dir(self, tmp_path, monkeypatch):
        cfg = tmp_path / "k.cfg"
        cfg.write_text("experiment = kernel\nN_grid = 16\nreplicas = 1\n")
        monkeypatch.setenv("CWSC_OUTPUT_DIR", str(tmp_path / "env"))
        assert cli.main(["run", str(cfg)]) == cli.EXIT_OK
        assert (tmp_path / "env/kernel.csv").exists()

    def test_config_error(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("experiment = kernel\ntau = 7\n")
        assert cli.main(["run", str(cfg)]) == cli.EXIT_CONFIG
        assert "error" in capsys.readouterr().err
        assert cli.main(["run", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
        assert cli.main(["plot", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "x.svg")]) == cli.EXIT_CONFIG

    def test_check_suite(self, capsys):
        assert cli.main(["check", "schur"]) == cli.EXIT_OK
        assert capsys.readouterr().out.startswith("PASS")

    def test_check_failure_exit_code(self, monkeypatch):
        failing = checks.CheckResult("forced", 1.0, 0.0, False)
        monkeypatch.setitem(checks.SUITES, "schur", [lambda: failing])
        assert cli.main(["check", "schur"]) == cli.EXIT_CHECK

    def test_plot_curve_csv(self, tmp_path):
        src = tmp_path / "c.csv"
        src.write_text("E,a,b\n0,1,2\n1,2,3\n")
        out = tmp_path / "c.svg"
        assert cli.main(["plot", str(src), "-o", str(out)]) == cli.EXIT_OK
        assert out.read_text().count("<polyline") == 2
