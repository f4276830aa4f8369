# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Functions for reading/writing YAML topology documents.

A topology document looks like::

    sink: 4
    technologies:
    - {id: LF, bit_rate: 1000.0, max_range: 3000.0, ...}
    nodes:
    - {id: 1, position: [0.0, 0.0, 10.0], technologies: [LF]}
    - ...
    links:            # optional; derived from positions if absent
    - [1, 2, LF]
    upstream:         # optional; derived from hop counts if absent
      1: [2, 3]
    obstacles:        # optional
    - {a: [..], b: [..], orientation: horizontal}
"""
from dataclasses import asdict

import yaml

from ..topology import (DEFAULT_TECHNOLOGIES, Link, NodeSpec, ObstacleField,
                        ObstacleSegment, TechnologyClass, TopologyError,
                        TopologyGraph, derive_links)

__all__ = ['graph_from_document', 'graph_to_document',
           'load_topology_document', 'write_topology_document']


def graph_to_document(graph, include_upstream=True):
    """Convert `graph` to a plain dict suitable for YAML output.

    Parameters
    ----------
    graph : TopologyGraph
        Graph to convert.

    include_upstream : bool, optional
        If True, record upstream sets explicitly.
        (Default: True)

    Returns
    -------
    dict
    """
    doc = {
        'sink': graph.sink,
        'technologies': [asdict(t) for t in sorted(
            graph.technologies.values(), key=lambda t: t.bit_rate)],
        'nodes': [{'id': n.id, 'position': [float(c) for c in n.position],
                   'technologies': sorted(n.technologies)}
                  for n in graph.nodes],
        'links': [[l.a, l.b, l.tech] for l in sorted(graph.links)],
    }
    if include_upstream:
        doc['upstream'] = {n: list(ups) for n, ups in graph.upstream.items()}
    if len(graph.obstacles):
        doc['obstacles'] = [
            {'a': list(s.a), 'b': list(s.b), 'orientation': s.orientation}
            for s in graph.obstacles.segments]
    return doc


def _require(doc, key, path):
    if key not in doc:
        raise TopologyError(f'{path}: missing required key "{key}".')
    return doc[key]


def graph_from_document(doc, path='graph'):
    """Build :class:`TopologyGraph` from topology document `doc`.

    Parameters
    ----------
    doc : dict
        Parsed document.

    path : str, optional
        Dotted location of `doc`, used in error messages.
        (Default: 'graph')

    Returns
    -------
    TopologyGraph

    Raises
    ------
    TopologyError
        If the document is malformed or describes an invalid graph.
    """
    if not isinstance(doc, dict):
        raise TopologyError(f'{path}: expected a mapping.')
    allowed = {'sink', 'technologies', 'nodes', 'links', 'upstream',
               'obstacles'}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise TopologyError(f'{path}.{unknown[0]}: unknown key.')
    techs = DEFAULT_TECHNOLOGIES
    if 'technologies' in doc:
        try:
            techs = tuple(TechnologyClass(**t) for t in doc['technologies'])
        except TypeError as e:
            raise TopologyError(f'{path}.technologies: {e}') from e
    nodes = []
    for k, entry in enumerate(_require(doc, 'nodes', path)):
        try:
            nodes.append(NodeSpec(entry['id'], tuple(entry['position']),
                                  frozenset(entry['technologies'])))
        except (KeyError, TypeError) as e:
            raise TopologyError(
                f'{path}.nodes[{k}]: malformed node ({e}).') from e
    sink = _require(doc, 'sink', path)
    obstacles = ObstacleField(tuple(
        ObstacleSegment(tuple(o['a']), tuple(o['b']),
                        o.get('orientation', 'horizontal'))
        for o in doc.get('obstacles', ())))
    if 'links' in doc:
        links = []
        for k, entry in enumerate(doc['links']):
            try:
                a, b, t = entry
            except (TypeError, ValueError) as e:
                raise TopologyError(
                    f'{path}.links[{k}]: expected [a, b, technology].') from e
            links.append(Link.make(int(a), int(b), str(t)))
    else:
        links = derive_links(nodes, techs, obstacles)
    upstream = None
    if 'upstream' in doc:
        upstream = {int(n): tuple(ups) for n, ups in doc['upstream'].items()}
    return TopologyGraph.build(nodes, techs, links, sink, upstream=upstream,
                               obstacles=obstacles)


def write_topology_document(fpath, graph, include_upstream=True):
    """Write `graph` to YAML file `fpath`."""
    with open(fpath, 'w', encoding='utf-8') as f:
        yaml.safe_dump(graph_to_document(graph, include_upstream), f,
                       sort_keys=False)


def load_topology_document(fpath):
    """Load :class:`TopologyGraph` from YAML file `fpath`."""
    with open(fpath, 'r', encoding='utf-8') as f:
        doc = yaml.safe_load(f)
    return graph_from_document(doc, path=str(fpath))
