# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Named topologies.

- ``fig1``: six-node fair-share example; sink 6
- ``diamond``: four nodes, two disjoint routes from node 1 to sink 4
- ``chain-<k>``: ``k`` nodes in a line, sink ``k``
- ``paper-random``: random 10-node scenario drawn per seed
"""
import re

from .topology import (DEFAULT_TECHNOLOGIES, GenerationParams, Link, NodeSpec,
                       TopologyError, TopologyGraph, sample_connected_topology)

__all__ = ['PRESETS', 'UnknownPresetError', 'is_preset', 'list_presets',
           'preset']


PRESETS = ('fig1', 'diamond', 'chain-<k>', 'paper-random')

_CHAIN_RE = re.compile(r'^chain-(\d+)$')


class UnknownPresetError(TopologyError):
    """No preset with the requested name."""


def _fig1():
    pos = {1: (400., 0., 50.), 2: (100., 120., 50.), 3: (100., 0., 50.),
           4: (300., 160., 50.), 5: (200., 60., 50.), 6: (0., 0., 50.)}
    techs = {1: {'LF'}, 2: {'LF', 'MF'}, 3: {'LF', 'MF'}, 4: {'LF'},
             5: {'LF', 'MF'}, 6: {'LF', 'MF'}}
    nodes = [NodeSpec(n, pos[n], techs[n]) for n in sorted(pos)]
    links = [Link.make(1, 5, 'LF'), Link.make(4, 5, 'LF'),
             Link.make(4, 2, 'LF'), Link.make(5, 2, 'MF'),
             Link.make(5, 3, 'LF'), Link.make(5, 3, 'MF'),
             Link.make(3, 6, 'LF'), Link.make(3, 6, 'MF'),
             Link.make(2, 6, 'LF')]
    upstream = {1: (5,), 2: (6,), 3: (6,), 4: (2, 5), 5: (2, 3), 6: ()}
    return TopologyGraph.build(nodes, DEFAULT_TECHNOLOGIES, links, sink=6,
                               upstream=upstream)


def _diamond():
    pos = {1: (0., 0., 10.), 2: (100., 100., 10.), 3: (100., -100., 10.),
           4: (200., 0., 10.)}
    nodes = [NodeSpec(n, pos[n], {'LF'}) for n in sorted(pos)]
    links = [Link.make(1, 2, 'LF'), Link.make(1, 3, 'LF'),
             Link.make(2, 4, 'LF'), Link.make(3, 4, 'LF')]
    return TopologyGraph.build(nodes, DEFAULT_TECHNOLOGIES, links, sink=4)


def _chain(k):
    if k < 2:
        raise UnknownPresetError('chain-<k> needs k >= 2.')
    nodes = [NodeSpec(n, (100. * (n - 1), 0., 10.), {'LF', 'MF'})
             for n in range(1, k + 1)]
    links = []
    for n in range(1, k):
        links.extend([Link.make(n, n + 1, 'LF'), Link.make(n, n + 1, 'MF')])
    return TopologyGraph.build(nodes, DEFAULT_TECHNOLOGIES, links, sink=k)


def is_preset(name):
    """True if `name` names a preset."""
    return name in ('fig1', 'diamond', 'paper-random') or bool(
        _CHAIN_RE.match(str(name)))


def list_presets():
    return list(PRESETS)


def preset(name, seed=0):
    """Return preset topology `name`.

    Parameters
    ----------
    name : str
        Preset name.

    seed : int, optional
        Seed for ``paper-random``; ignored by the fixed presets.
        (Default: 0)

    Returns
    -------
    TopologyGraph

    Raises
    ------
    UnknownPresetError
        If `name` is not a preset.
    """
    if name == 'fig1':
        return _fig1()
    if name == 'diamond':
        return _diamond()
    if name == 'paper-random':
        return sample_connected_topology(GenerationParams(), seed)
    m = _CHAIN_RE.match(str(name))
    if m:
        return _chain(int(m.group(1)))
    raise UnknownPresetError(
        f'Unknown preset "{name}". Valid presets: {", ".join(PRESETS)}')
