# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Half-open spans.

:class:`Interval` is used for two things: the bit range a fragment carries
within its message, and the time a signal occupies the medium at a receiver.
"""
from dataclasses import dataclass

from .utils import add_dataclass_slots

__all__ = ['Interval', 'merge_intervals', 'total_length']


@add_dataclass_slots
@dataclass(frozen=True, order=True)
class Interval:
    """Half-open span ``[start, end)``.

    Parameters
    ----------
    start : int or float
        First covered point (bit offset or time in seconds).

    end : int or float
        One past the last covered point.
    """
    start: float
    end: float

    @property
    def length(self):
        return self.end - self.start

    def contains(self, point):
        """True if `point` lies in ``[start, end)``."""
        return self.start <= point < self.end

    def overlaps(self, other):
        """True if the spans share a point; touching ends do not count."""
        return self.start < other.end and other.start < self.end

    def __bool__(self):
        return self.length > 0


def merge_intervals(intervals):
    """Merge overlapping and adjacent intervals.

    Empty intervals are dropped.

    Returns
    -------
    list of Interval
        Disjoint, non-adjacent intervals in ascending order.
    """
    merged = []
    for ivl in sorted(ivl for ivl in intervals if ivl):
        if merged and ivl.start <= merged[-1].end:
            if ivl.end > merged[-1].end:
                merged[-1] = Interval(merged[-1].start, ivl.end)
        else:
            merged.append(ivl)
    return merged


def total_length(intervals):
    """Return the length covered by the union of `intervals`."""
    return sum(ivl.length for ivl in merge_intervals(intervals))
