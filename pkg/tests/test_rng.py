"""Deterministic counter-based random streams."""

import numpy as np
import pytest

from flowlab.rng import Rng, stream_key


def test_same_seed_same_sequence():
    a = Rng(42, 0).standard_normal((1000,))
    b = Rng(42, 0).standard_normal((1000,))
    np.testing.assert_array_equal(a, b)


def test_different_seeds_differ():
    a = Rng(1, 0).standard_normal((100,))
    b = Rng(2, 0).standard_normal((100,))
    assert not np.array_equal(a, b)


def test_streams_are_independent():
    n = 100_000
    a = Rng(7, 1).standard_normal((n,), np.float64)
    b = Rng(7, 2).standard_normal((n,), np.float64)
    corr = float(np.corrcoef(a, b)[0, 1])
    assert abs(corr) < 0.02


def test_normal_moments():
    draws = Rng(3, 0).standard_normal((100_000,), np.float64)
    assert abs(draws.mean()) < 0.02
    assert abs(draws.var() - 1.0) < 0.02


def test_derive_matches_fresh_stream():
    a = Rng(5, 0).derive(9).standard_normal((16,))
    b = Rng(5, 9).standard_normal((16,))
    np.testing.assert_array_equal(a, b)


def test_stream_key_packs_purpose_and_step():
    assert stream_key(0, 0) == 0
    assert stream_key(1, 0) == 1 << 48
    assert stream_key(1, 5) == (1 << 48) | 5
    assert stream_key(2, 5) != stream_key(1, 5)


def test_stream_key_range_checks():
    with pytest.raises(ValueError):
        stream_key(-1, 0)
    with pytest.raises(ValueError):
        stream_key(0, 2**48)


def test_integers_bounds_and_determinism():
    draws = Rng(11, 4).integers(10, (10_000,))
    assert draws.min() >= 0 and draws.max() < 10
    np.testing.assert_array_equal(draws, Rng(11, 4).integers(10, (10_000,)))


def test_orthogonal_rows_and_columns():
    wide = Rng(1, 0).orthogonal(4, 8)
    np.testing.assert_allclose(wide @ wide.T, np.eye(4), atol=1e-5)
    tall = Rng(1, 0).orthogonal(8, 4)
    np.testing.assert_allclose(tall.T @ tall, np.eye(4), atol=1e-5)
