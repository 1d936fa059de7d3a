import csv
import io
import subprocess
import sys

import pytest

from jcm import autodiff as ad
from jcm import cli, runner
from jcm.config import ConfigError, parse_config
from jcm.datagen import load_dataset
from jcm.metrics import ShapingReport

BASE = """
scheme = qam
M = 4
n = 4
samples_per_class = 12
epochs = 1
enc_hidden = 8
sem_hidden = 8
src_hidden = 8
lr0 = 5e-3
eval_draws = 1
output_dir = out
"""


def _write(tmp_path, extra, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(BASE + extra)
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_unknown_key_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, "learning_rate = 3\n")
    assert cli.main(["run", str(cfg)]) == 2
    assert "learning_rate" in capsys.readouterr().err


@pytest.mark.parametrize("line,key", [("lambda = nan\n", "lambda"), ("M = 8\n", "order"),
                                      ("snr_db = 3\n", "lambda"), ("methods = jcm, magic\n", "methods"),
                                      ("epochs = two\n", "epochs")])
def test_invalid_values_name_the_field(tmp_path, capsys, line, key):
    cfg = _write(tmp_path, line)
    assert cli.main(["run", str(cfg)]) == 2
    assert key in capsys.readouterr().err


def test_minimal_config_one_row_per_method(tmp_path):
    cfg = _write(tmp_path, "snr_db = 6\nmethods = jcm, analog, uniform, nn, hardsoft\n")
    assert cli.main(["run", str(cfg)]) == 0
    rows = _rows(tmp_path / "out" / "results.csv")
    assert sorted(r["method"] for r in rows) == ["analog", "hardsoft", "jcm", "nn", "uniform"]
    assert list(rows[0]) == list(runner.RESULT_COLUMNS)
    r = rows[0]
    assert float(r["rate"]) == 0.25 and float(r["lambda"]) == 250.0
    shaping = ShapingReport.from_json((tmp_path / "out" / "shaping_6.json").read_text())
    assert shaping.snr_db == 6.0 and len(shaping.pmf) == 4
    ckpt = ad.load_checkpoint(tmp_path / "out" / "ckpt_jcm_6dB_seed0.jcmp")
    assert "enc.0.W" in ckpt
    assert "quant.levels" in ad.load_checkpoint(tmp_path / "out" / "ckpt_nn_6dB_seed0.jcmp")


def test_sweep_rows_sorted(tmp_path):
    cfg = _write(tmp_path, "snr_db = 12, -6, 0\nmethods = jcm, analog\n")
    assert cli.main(["run", str(cfg)]) == 0
    rows = _rows(tmp_path / "out" / "results.csv")
    keys = [(r["method"], float(r["snr_db"])) for r in rows]
    assert len(rows) == 6 and keys == sorted(keys)


def test_results_are_byte_identical_across_runs_and_workers(tmp_path):
    extra = "snr_db = 0, 6\nnum_seeds = 2\nmethods = jcm, uniform\n"
    outputs = []
    for i, workers in enumerate((1, 1, 2)):
        d = tmp_path / f"run{i}"
        d.mkdir()
        cfg = _write(d, extra + f"workers = {workers}\n")
        assert cli.main(["run", str(cfg)]) == 0
        outputs.append((d / "out" / "results.csv").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    parsed = list(csv.reader(io.StringIO(outputs[0].decode())))
    assert parsed[0] == list(runner.RESULT_COLUMNS) and len(parsed) == 9


def test_seed_override(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "snr_db = 6\n")
    monkeypatch.setenv("JCM_SEED", "17")
    assert cli.main(["run", str(cfg)]) == 0
    assert _rows(tmp_path / "out" / "results.csv")[0]["seed"] == "17"
    assert parse_config("seed = 2\n").seed == 17
    monkeypatch.setenv("JCM_SEED", "x")
    with pytest.raises(ConfigError):
        parse_config("")


def test_dataset_files(tmp_path):
    cfg = _write(tmp_path, "snr_db = 6\nsave_dataset = true\ndataset = images\nimage_side = 8\n")
    assert cli.main(["run", str(cfg)]) == 0
    ds = load_dataset(tmp_path / "out" / "train.jcmd")
    assert ds.k == 64 and len(ds) > 0


def test_divergence_exit_3(tmp_path, monkeypatch, capsys):
    def explode(model, *a, **kw):
        raise runner.pl.TrainingDiverged("non-finite loss at epoch 1", model.store.copy(), 0)
    monkeypatch.setattr(runner.pl, "train", explode)
    cfg = _write(tmp_path, "snr_db = 6\n")
    assert cli.main(["run", str(cfg)]) == 3
    assert "diverged" in capsys.readouterr().err


def test_check_commands(capsys):
    assert cli.main(["gradcheck", "--seed", "11"]) == 0
    assert cli.main(["sample-dist", "--order", "16", "--draws", "100000"]) == 0
    assert cli.main(["oraclecheck"]) == 0
    out = capsys.readouterr().out
    assert "mix_uniform gap" in out and "FAIL" not in out


def test_check_failure_exit_1():
    assert cli.main(["sample-dist", "--order", "4", "--draws", "50", "--pmfs", "3",
                     "--tol", "1e-9"]) == 1


def test_shaping_command(tmp_path, capsys):
    cfg = _write(tmp_path, "snr_db = -6, 18\nM = 16\nepochs = 2\n")
    code = cli.main(["shaping", str(cfg)])
    out = capsys.readouterr().out
    assert code in (0, 1) and "fitted nu" in out
    assert (tmp_path / "out" / "shaping_-6.json").exists()


def test_console_script(tmp_path):
    cfg = _write(tmp_path, "foo = 1\n")
    proc = subprocess.run([sys.executable, "-m", "jcm.cli", "run", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "foo" in proc.stderr
