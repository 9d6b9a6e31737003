import json

import pytest

from urbanav.cli import main
from urbanav.corpus import load_corpus
from urbanav.worldmap import save_map

from conftest import plus_map

TINY_SYNTH = """\
n_maps = 2
paragraphs_per_map = 4
grid_size = 18
rows = 3
cols = 3
"""

TINY_MODEL = """\
embed_dim = 8
encoder_hidden = 8
decoder_hidden = 8
epochs = 1
beam_width = 2
"""


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    cfg = root / "synth.cfg"
    cfg.write_text(TINY_SYNTH)
    assert main(["synth", "--out", str(root), "--seed", "3", "--config", str(cfg)]) == 0
    return root


def test_synth_writes_maps_and_corpus(data_dir):
    assert (data_dir / "corpus.txt").exists()
    maps = sorted(p.name for p in data_dir.glob("*.map"))
    assert maps == ["synth-1.map", "synth-2.map"]
    corpus = load_corpus(data_dir / "corpus.txt")
    assert len(corpus.paragraphs) == 8


def test_synth_is_seed_deterministic(tmp_path, data_dir):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text(TINY_SYNTH)
    out = tmp_path / "again"
    assert main(["synth", "--out", str(out), "--seed", "3", "--config", str(cfg)]) == 0
    assert (out / "corpus.txt").read_bytes() == (data_dir / "corpus.txt").read_bytes()


def test_stats_prints_table(data_dir, capsys):
    assert main(["stats", "--data", str(data_dir)]) == 0
    out = capsys.readouterr().out
    assert "instructions:" in out and "avg_tokens_per_instruction:" in out


def test_simulate_end_only(tmp_path, capsys):
    path = tmp_path / "plus.map"
    save_map(plus_map(), path)
    code = main(["simulate", "--map", str(path), "--start", "(1,2,+1)", "--actions", "END"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "(3,2)"


def test_simulate_walks(tmp_path, capsys):
    path = tmp_path / "plus.map"
    save_map(plus_map(), path)
    code = main(["simulate", "--map", str(path), "--start", "(2,0,+1)",
                 "--actions", "WALK WALK END"])
    assert code == 0
    assert capsys.readouterr().out.splitlines()[0] == "(0,3);(1,3);(2,3)"


def test_simulate_reports_failures(tmp_path, capsys):
    path = tmp_path / "plus.map"
    save_map(plus_map(), path)
    code = main(["simulate", "--map", str(path), "--start", "(1,0,-1)",
                 "--actions", "WALK END"])
    assert code == 1
    err = capsys.readouterr().err
    assert "failed" in err


def test_abstract_command(tmp_path, capsys):
    path = tmp_path / "plus.map"
    save_map(plus_map(), path)
    code = main(["abstract", "--map", str(path),
                 "--text", "Walk from Macy's to 7th street"])
    assert code == 0
    out = capsys.readouterr().out
    assert "<SHOP_1>" in out and "<STREET_1>" in out


def test_usage_error_exits_nonzero(data_dir, capsys):
    code = main(["evaluate", "--data", str(data_dir), "--policy", "bogus"])
    assert code == 1
    assert "bogus" in capsys.readouterr().err


def test_unknown_config_key_rejected(data_dir, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not_a_real_key = 3\n")
    code = main(["synth", "--out", str(tmp_path / "x"), "--config", str(cfg)])
    assert code == 1
    assert "not_a_real_key" in capsys.readouterr().err


def test_evaluate_no_move_writes_reports(data_dir, capsys):
    report_dir = data_dir / "reports" / "no-move"
    code = main(["evaluate", "--data", str(data_dir), "--policy", "no-move",
                 "--seeds", "0"])
    assert code == 0
    payload = json.loads((report_dir / "report.json").read_text())
    assert payload["format"] == "urbanav-report"
    assert payload["policy"] == "no-move"
    assert len(payload["folds"]) == 2
    csv_text = (report_dir / "report.csv").read_text()
    assert csv_text.startswith("policy,variant,fold")


def test_baseline_alias(data_dir, tmp_path):
    out = tmp_path / "rep"
    code = main(["baseline", "--data", str(data_dir), "--kind", "random",
                 "--seeds", "1", "--report-dir", str(out)])
    assert code == 0
    assert (out / "report.json").exists()


def test_train_and_evaluate_model(data_dir, tmp_path, capsys):
    cfg = tmp_path / "model.cfg"
    cfg.write_text(TINY_MODEL)
    ckpt = tmp_path / "model.npz"
    log = tmp_path / "log.csv"
    code = main(["train", "--data", str(data_dir), "--variant", "cgaew",
                 "--out", str(ckpt), "--log", str(log), "--seed", "0",
                 "--config", str(cfg)])
    assert code == 0
    assert ckpt.exists()
    lines = log.read_text().splitlines()
    assert lines[0] == "epoch,train_nll,val_accuracy"
    assert len(lines) == 2  # one epoch

    from urbanav.model import NavigationModel

    model = NavigationModel.load(ckpt)
    assert model.config.variant == "CGAEW"


def test_gradcheck_exits_zero(capsys):
    assert main(["gradcheck", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert "max relative gradient error" in out


def test_evaluate_reports_are_byte_identical(data_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        code = main(["evaluate", "--data", str(data_dir), "--policy", "no-move",
                     "--seeds", "0,1", "--report-dir", str(out)])
        assert code == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()
