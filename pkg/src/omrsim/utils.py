# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Miscellaneous utility functions shared by the simulator modules."""
import dataclasses
import hashlib
import json

import numpy as np

__all__ = ['add_dataclass_slots', 'clip', 'keyed_uniform', 'parse_seed_range',
           'stable_hash', 'to_canonical_json']


def clip(x, lb, ub):
    """Clip `x` to interval [`lb`, `ub`]."""
    if ub < lb:
        raise ValueError(f'Invalid clipping interval: [{lb}, {ub}].')
    return max(lb, min(x, ub))


def add_dataclass_slots(cls):
    """Add `__slots__` to a data class.

    Used for the small records the simulator creates by the hundred thousand
    (intervals, fragments).

    Notes
    -----
    https://github.com/ericvsmith/dataclasses/blob/master/dataclass_tools.py
    """
    # Need to create a new class, since we can't set __slots__
    #  after a class has been created.
    if '__slots__' in cls.__dict__:
        raise TypeError(f'{cls.__name__} already specifies __slots__')
    cls_dict = dict(cls.__dict__)
    field_names = tuple(f.name for f in dataclasses.fields(cls))
    cls_dict['__slots__'] = field_names
    for field_name in field_names:
        cls_dict.pop(field_name, None)
    cls_dict.pop('__dict__', None)
    qualname = getattr(cls, '__qualname__', None)
    cls = type(cls)(cls.__name__, cls.__bases__, cls_dict)
    if qualname is not None:
        cls.__qualname__ = qualname
    return cls


def to_canonical_json(obj):
    """Serialize `obj` to JSON with sorted keys and no insignificant
    whitespace.

    Two documents that compare equal always serialize to the same string,
    which makes the result suitable for hashing.
    """
    return json.dumps(obj, sort_keys=True, separators=(',', ':'))


def stable_hash(obj):
    """Return hex SHA-256 digest of the canonical JSON form of `obj`."""
    return hashlib.sha256(to_canonical_json(obj).encode('utf-8')).hexdigest()


def keyed_uniform(seed, *key):
    """Return a uniform draw on [0, 1) determined by `seed` and `key`.

    The draw depends only on its arguments, never on how many other draws
    were made before it, so two runs that disagree on event order still agree
    on the draw attached to a given key.

    Parameters
    ----------
    seed : int
        Run seed.

    key : int
        Non-negative integers identifying the draw.

    Returns
    -------
    float
    """
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(k) for k in key))
    state = ss.generate_state(2, dtype=np.uint32)
    # 53-bit mantissa from two 32-bit words.
    val = (int(state[0]) >> 5) * 67108864 + (int(state[1]) >> 6)
    return val / 9007199254740992.0


def parse_seed_range(value):
    """Parse a seed or seed range.

    Accepts an integer, a string holding one integer, or an inclusive range
    ``"a..b"``.

    Returns
    -------
    list of int
        Seeds in ascending order.

    Raises
    ------
    ValueError
        If `value` is malformed or the range is empty.
    """
    if isinstance(value, bool):
        raise ValueError(f'Invalid seed: {value!r}')
    if isinstance(value, int):
        return [value]
    text = str(value).strip()
    if '..' in text:
        lo, _, hi = text.partition('..')
        try:
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise ValueError(f'Invalid seed range: {value!r}') from None
        if hi < lo:
            raise ValueError(f'Empty seed range: {value!r}')
        return list(range(lo, hi + 1))
    try:
        return [int(text)]
    except ValueError:
        raise ValueError(f'Invalid seed: {value!r}') from None
