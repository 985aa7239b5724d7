import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from random_anc.errors import KeyPoolError
from random_anc.keygen import (bits_to_int, generate_pool, int_to_bits, parse_hex, pool_from_values, psl, read_keys,
                               to_hex, write_keys)


def brute_psl(bits):
    n = len(bits)
    return max(sum(bits[i] * bits[(i + s) % n] for i in range(n)) for s in range(1, n))


def brute_pool(n_bits, tol):
    out = []
    for bits in itertools.product((0, 1), repeat=n_bits):
        if sum(bits) == n_bits // 2 and brute_psl(bits) <= tol:
            out.append(int("".join(map(str, bits)), 2))
    return out


def test_pool_8_5_has_70_keys(pool):
    assert len(pool) == 70
    for v in (0x0F, 0x17, 0x1B, 0x1D):
        assert v in pool.values()


@pytest.mark.parametrize("n_bits,tol", [(4, 1), (6, 2), (8, 3), (8, 5), (10, 3)])
def test_pool_matches_brute_force(n_bits, tol):
    assert generate_pool(n_bits, tol).values() == brute_pool(n_bits, tol)


def test_pool_is_sorted_and_unique(pool):
    vals = pool.values()
    assert vals == sorted(set(vals))


@given(st.lists(st.integers(0, 1), min_size=2, max_size=16))
@settings(max_examples=200, deadline=None)
def test_psl_matches_brute_force(bits):
    assert psl(bits) == brute_psl(bits)


@given(st.integers(0, 2**12 - 1))
def test_bit_int_round_trip(v):
    assert bits_to_int(int_to_bits(v, 12)) == v
    assert int(to_hex(int_to_bits(v, 12)), 16) == v


def test_msb_first():
    assert list(int_to_bits(0x0F, 8)) == [0, 0, 0, 0, 1, 1, 1, 1]
    assert list(parse_hex("17")) == [0, 0, 0, 1, 0, 1, 1, 1]


@pytest.mark.parametrize("n_bits,tol", [(7, 5), (1, 0), (26, 5), (8, -1)])
def test_bad_arguments(n_bits, tol):
    with pytest.raises(KeyPoolError):
        generate_pool(n_bits, tol)


def test_tight_tolerance_can_empty_the_pool():
    assert len(generate_pool(8, 0)) == 0


def test_key_file_round_trip(tmp_path, pool):
    path = tmp_path / "keys.txt"
    write_keys(pool, path)
    text = path.read_bytes()
    assert text.startswith(b"0F\n") and b"\r" not in text
    assert text.decode().splitlines() == [k.hex for k in pool.keys]
    assert read_keys(path).values() == pool.values()


def test_read_empty_key_file(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# nothing\n")
    with pytest.raises(KeyPoolError):
        read_keys(path)


def test_find(pool):
    k = pool.find("1b")
    assert k.value == 0x1B and pool.find(0x1B) is k and pool.find(k.as_array()) is k
    with pytest.raises(KeyPoolError):
        pool.find(0xFF)


def test_pool_from_values_records_psl():
    p = pool_from_values([0x1D, 0x0F])
    assert p.values() == [0x0F, 0x1D]
    assert all(k.psl == psl(k.bits) for k in p.keys)


def test_generation_is_fast():
    import time

    t = time.perf_counter()
    generate_pool(8, 5)
    assert time.perf_counter() - t < 1.0
