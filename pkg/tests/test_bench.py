import csv

import numpy as np
import pytest

from random_anc.bench import bench_throughput, write_bench_csv


def test_rows_are_consistent(xnor_model, pool, tmp_path):
    res = bench_throughput(xnor_model, pool.find("0F"), sizes=(16, 64), repetitions=5, warmup=1)
    assert [r.message_bytes for r in res] == [16, 64]
    for r in res:
        assert r.t_alice > 0 and r.t_bob > 0
        assert r.throughput == pytest.approx(r.message_bytes / (r.t_alice + r.t_bob))
        assert r.cipher_bits.size == 8 * r.message_bytes
    path = tmp_path / "b.csv"
    write_bench_csv(res, path)
    rows = list(csv.DictReader(path.open()))
    for row in rows:
        tau = int(row["size_bytes"]) / (float(row["t_alice_s"]) + float(row["t_bob_s"]))
        assert float(row["throughput_Bps"]) == pytest.approx(tau, rel=1e-6)


def test_bench_ciphertext_matches_stream(xnor_model, pool):
    from random_anc.cipher import encrypt_stream

    r = bench_throughput(xnor_model, pool.find("17"), sizes=(32,), repetitions=3, warmup=0, seed=4)[0]
    np.testing.assert_array_equal(r.cipher_bits, encrypt_stream(xnor_model, "17", r.plaintext).bits)


def test_bench_argument_checks(xnor_model, pool):
    with pytest.raises(ValueError):
        bench_throughput(xnor_model, pool.keys[0], sizes=())
    with pytest.raises(ValueError):
        bench_throughput(xnor_model, pool.keys[0], repetitions=2)
