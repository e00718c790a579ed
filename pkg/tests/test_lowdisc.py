from math import comb

import numpy as np
import pytest

from sepprob.lowdisc import (INDEX_CAP, QmcStream, StreamExhausted, digit_layout, equidistribution_check,
                             is_prime, smallest_prime_at_least)


def faure_reference(index, dim, base):
    """Plain Faure point by textbook digit arithmetic on Python ints."""
    digits = []
    n = index
    while n:
        n, d = divmod(n, base)
        digits.append(d)
    out = []
    for j in range(dim):
        x = 0.0
        for r in range(len(digits)):
            y = sum(comb(c, r) * j ** (c - r) * digits[c] for c in range(r, len(digits))) % base
            x += y / base ** (r + 1)
        out.append(x)
    return np.array(out)


def test_van_der_corput_base2():
    s = QmcStream(1, base=2)
    assert s.points(1, 1)[0, 0] == 0.5
    assert s.points(3, 1)[0, 0] == 0.75


@pytest.mark.parametrize("dim,base", [(3, 3), (5, 5), (9, 11)])
def test_unscrambled_matches_reference(dim, base, backend):
    s = QmcStream(dim, base=base)
    pts = s.points(0, 200)
    ref = np.array([faure_reference(i, dim, base) for i in range(200)])
    assert np.allclose(pts, ref, atol=1e-15, rtol=0)


def test_range_contract(backend):
    s = QmcStream(9, scramble_seed=7)
    pts = s.points(1, 5000)
    assert pts.shape == (5000, 9)
    assert np.all((pts >= 0.0) & (pts < 1.0))


def test_skip_to_zero_is_fresh():
    a = QmcStream(4, scramble_seed=3)
    b = QmcStream(4, scramble_seed=3)
    b.next_points(10)
    b.skip_to(0)
    assert np.array_equal(a.next_point(), b.next_point())


@pytest.mark.parametrize("k", [1, 17, 1000])
def test_skip_matches_sequential(k):
    seq = QmcStream(6, scramble_seed=11)
    for _ in range(k):
        seq.next_point()
    jump = QmcStream(6, scramble_seed=11)
    jump.skip_to(k)
    assert np.array_equal(seq.next_point(), jump.next_point())


def test_replay_after_million():
    a = QmcStream(5, scramble_seed=99)
    a.skip_to(10**6)
    b = QmcStream(5, scramble_seed=99)
    for _ in range(100):
        b.next_points(10**4)
    assert np.array_equal(a.next_point(), b.next_point())


def test_chunking_is_invisible(backend):
    s = QmcStream(7, scramble_seed=5)
    whole = s.points(100, 3000)
    parts = np.vstack([s.points(100 + i, 500) for i in range(0, 3000, 500)])
    assert np.array_equal(whole, parts)


def test_seeds_differ_and_repeat():
    a = QmcStream(4, scramble_seed=1).points(1, 50)
    b = QmcStream(4, scramble_seed=1).points(1, 50)
    c = QmcStream(4, scramble_seed=2).points(1, 50)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_spawn_positions_copy():
    s = QmcStream(3, scramble_seed=4)
    t = s.spawn(42)
    assert t.cursor == 42 and s.cursor == 0
    assert np.array_equal(t.next_point(), s.points(42, 1)[0])


@pytest.mark.parametrize("order,target", [(1, 0.5), (2, 1 / 3)])
def test_equidistribution_moments(order, target):
    rep = equidistribution_check(QmcStream(9, scramble_seed=0), 10**5, order)
    assert rep.deviations.shape == (9,)
    assert rep.max_deviation < 0.01


def test_equidistribution_shape_dim35():
    rep = equidistribution_check(QmcStream(35, scramble_seed=0), 1000, 1)
    assert rep.deviations.shape == (35,)


def test_equidistribution_rejects_small_n():
    with pytest.raises(ValueError):
        equidistribution_check(QmcStream(2), 999, 1)


def test_stream_bounds():
    s = QmcStream(2)
    with pytest.raises(StreamExhausted):
        s.skip_to(INDEX_CAP)
    with pytest.raises(StreamExhausted):
        s.points(INDEX_CAP - 1, 2)
    with pytest.raises(ValueError):
        QmcStream(0)
    with pytest.raises(ValueError):
        QmcStream(5, base=4)
    with pytest.raises(ValueError):
        QmcStream(5, base=3)


def test_primes_and_layout():
    assert [p for p in range(20) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert smallest_prime_at_least(32) == 37
    k_in, m_out = digit_layout(37)
    assert 37**k_in >= INDEX_CAP and 37**m_out <= 2**53 < 37 ** (m_out + 1)
