# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Tests for utility functions."""
from hypothesis import given, strategies as st
import pytest

from omrsim.utils import (clip, keyed_uniform, parse_seed_range, stable_hash,
                          to_canonical_json)


def test_clip():
    x = 10
    assert clip(x, 12, 20) == 12
    assert clip(x, 1, 8) == 8
    with pytest.raises(ValueError) as e:
        clip(1, 2, 0)


def test_to_canonical_json():
    assert to_canonical_json({'b': 1, 'a': [1, 2]}) == '{"a":[1,2],"b":1}'
    assert (to_canonical_json({'a': 1, 'b': 2}) ==
            to_canonical_json({'b': 2, 'a': 1}))


def test_stable_hash():
    h = stable_hash({'seed': 1, 'protocol': 'omr-ff'})
    assert len(h) == 64
    assert h == stable_hash({'protocol': 'omr-ff', 'seed': 1})
    assert h != stable_hash({'protocol': 'omr-pf', 'seed': 1})


def test_keyed_uniform():
    # Pure function of its arguments.
    assert keyed_uniform(7, 1, 2, 3) == keyed_uniform(7, 1, 2, 3)

    # Different seeds and keys give different draws.
    assert keyed_uniform(7, 1, 2, 3) != keyed_uniform(8, 1, 2, 3)
    assert keyed_uniform(7, 1, 2, 3) != keyed_uniform(7, 1, 2, 4)


@given(st.integers(0, 2**32 - 1),
       st.lists(st.integers(0, 2**16), min_size=1, max_size=6))
def test_keyed_uniform_range(seed, key):
    u = keyed_uniform(seed, *key)
    assert 0 <= u < 1


def test_parse_seed_range():
    assert parse_seed_range(5) == [5]
    assert parse_seed_range('5') == [5]
    assert parse_seed_range('1..100') == list(range(1, 101))
    assert parse_seed_range(' 3..3 ') == [3]

    # Malformed.
    for value in ['a..b', '1..', 'seven', True]:
        with pytest.raises(ValueError) as excinfo:
            parse_seed_range(value)
        assert 'seed' in str(excinfo.value)

    # Empty range.
    with pytest.raises(ValueError) as excinfo:
        parse_seed_range('5..1')
    assert 'Empty seed range' in str(excinfo.value)
