import json

import pytest

from random_anc.cli import main
from random_anc.keygen import generate_pool
from random_anc.modelfile import save_model

from conftest import hand_built_model


@pytest.fixture
def model_path(tmp_path):
    path = tmp_path / "m.ranc"
    save_model(hand_built_model(), path, include_eve=True)
    return path


def test_unknown_subcommand_prints_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_keygen(tmp_path, capsys):
    out = tmp_path / "keys.txt"
    assert main(["keygen", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 70
    assert main(["keygen", "--psl-tolerance", "0"]) == 0


def test_keygen_bad_width(capsys):
    assert main(["keygen", "--bits", "7"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and len(err.strip().splitlines()) == 1


def test_config_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bits": 7}))
    assert main(["keygen", "--config", str(cfg)]) == 1  # config value is used
    capsys.readouterr()
    assert main(["keygen", "--config", str(cfg), "--bits", "6", "--psl-tolerance", "2"]) == 0  # flag wins
    assert capsys.readouterr().out.split() == [k.hex for k in generate_pool(6, 2).keys]


def test_eval_uniqueness_crosstab_inspect(model_path, tmp_path, capsys):
    assert main(["eval", str(model_path), "--report", str(tmp_path / "e.csv")]) == 0
    out = capsys.readouterr().out
    assert "Bob bit recovery: 1.000000" in out and "Eve bit recovery" in out
    assert main(["uniqueness", str(model_path), "--out", str(tmp_path / "u.csv")]) == 0
    assert "mean uniqueness: 100.0000%" in capsys.readouterr().out
    assert (tmp_path / "u.png").stat().st_size > 0
    assert main(["crosstab", str(model_path)]) == 0
    assert "distinct ciphertexts: yes" in capsys.readouterr().out
    assert main(["inspect", str(model_path)]) == 0
    assert "converged:   yes" in capsys.readouterr().out


def test_encrypt_decrypt_files(model_path, tmp_path):
    plain = tmp_path / "p.bin"
    plain.write_bytes(b"attack at dawn")
    enc, dec = tmp_path / "c.bin", tmp_path / "d.bin"
    assert main(["encrypt", str(model_path), "--key", "1D", "--in", str(plain), "--out", str(enc),
                 "--with-header"]) == 0
    assert enc.stat().st_size == plain.stat().st_size
    assert "key=1D bytes=14" in (tmp_path / "c.bin.header").read_text()
    assert main(["decrypt", str(model_path), "--key", "1D", "--in", str(enc), "--out", str(dec)]) == 0
    assert dec.read_bytes() == plain.read_bytes()


def test_encrypt_with_foreign_key(model_path, tmp_path, capsys):
    plain = tmp_path / "p.bin"
    plain.write_bytes(b"x")
    assert main(["encrypt", str(model_path), "--key", "FF", "--in", str(plain), "--out", str(tmp_path / "c")]) == 1
    assert "not in the pool" in capsys.readouterr().err


def test_corrupt_model(tmp_path, capsys):
    bad = tmp_path / "bad.ranc"
    bad.write_bytes(b"garbage")
    assert main(["inspect", str(bad)]) == 1
    assert "bad magic" in capsys.readouterr().err


def test_bench_report(model_path, tmp_path):
    rep = tmp_path / "b.csv"
    assert main(["bench", str(model_path), "--sizes", "16,32", "--reps", "3", "--warmup", "0",
                 "--report", str(rep)]) == 0
    assert len(rep.read_text().splitlines()) == 3
    assert (tmp_path / "b.png").exists()


def test_train_small(tmp_path, capsys):
    rep = tmp_path / "t.csv"
    code = main(["train", "--bits", "4", "--psl-tolerance", "1", "--proj", "4", "--max-epochs", "1",
                 "--realizations", "1", "--report", str(rep), "--out", str(tmp_path / "m.ranc")])
    assert code in (0, 1)
    assert rep.read_text().startswith("iteration,loss_alice")
    assert (tmp_path / "t.png").exists()


def test_global_seed_before_subcommand():
    from random_anc.cli import build_parser

    parser = build_parser()
    assert parser.parse_args(["--seed", "5", "keygen"]).seed == 5
    assert parser.parse_args(["keygen", "--seed", "6"]).seed == 6
    assert parser.parse_args(["keygen"]).seed is None
