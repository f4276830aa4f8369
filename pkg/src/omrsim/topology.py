# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Multi-modal network graphs.

A network is a set of nodes, each carrying one or more physical-layer
technologies, joined by per-technology links. Traffic converges on a single
sink. Every node routes only towards its *upstream* neighbors, which are
derived from a hop-count flood started at the sink, so that the resulting
routing relation is acyclic.
"""
from dataclasses import dataclass, field, replace
import itertools
import math
from typing import Dict, FrozenSet, Mapping, Optional, Tuple

import networkx as nx
from networkx.algorithms.flow import edmonds_karp
import numpy as np

from .logging import getLogger
from .utils import clip

__all__ = ['DEFAULT_TECHNOLOGIES', 'DisconnectedTopologyError',
           'GenerationParams', 'GenerationResult', 'Link', 'NodeSpec',
           'ObstacleField', 'ObstacleSegment', 'RouteDiscoveryError',
           'TechnologyClass', 'TopologyError', 'TopologyGraph',
           'count_disjoint_routes_full', 'derive_links', 'discover_routes',
           'disjoint_route_table', 'estimate_disjoint_routes_onehop',
           'generate_random_topology', 'max_flow', 'sample_connected_topology',
           'segments_intersect']


logger = getLogger()

# Spawn-key stream used for topology draws; see ``simkernel`` for the others.
TOPOLOGY_STREAM = 1

# Radius in meters of vertical (pole) obstacles.
POLE_RADIUS = 1.


class TopologyError(Exception):
    """Invalid network graph."""


class RouteDiscoveryError(TopologyError):
    """A node has no route to the sink.

    Parameters
    ----------
    node : int
        Unreachable node.
    """
    def __init__(self, node):
        super().__init__(f'Node {node} has no route to the sink.')
        self.node = node


class DisconnectedTopologyError(TopologyError):
    """Random generation failed to produce a connected network."""


@dataclass(frozen=True)
class TechnologyClass:
    """Physical-layer technology.

    Parameters
    ----------
    id : str
        Label, unique within a scenario (e.g., ``'LF'``).

    bit_rate : float
        Bit rate in bits/second.

    max_range : float
        Nominal communication range in meters.

    noise_level_db : float
        Ambient noise power spectral density in dB re 1 uPa^2/Hz.

    source_level_db : float
        Transmit source level in dB re 1 uPa at 1 m.

    bandwidth_hz : float
        Signal bandwidth in Hz.

    max_payload_bits : int
        Largest payload a single datagram may carry on this technology.
    """
    id: str
    bit_rate: float
    max_range: float
    noise_level_db: float = 40.0
    source_level_db: float = 170.0
    bandwidth_hz: float = 16000.0
    max_payload_bits: int = 9600

    def __post_init__(self):
        if not self.bit_rate > 0:
            raise TopologyError(
                f'Technology {self.id}: bit rate must be positive.')
        if not self.max_range > 0:
            raise TopologyError(
                f'Technology {self.id}: max range must be positive.')
        if not self.max_payload_bits > 0:
            raise TopologyError(
                f'Technology {self.id}: max payload must be positive.')


# Low/mid/high-frequency acoustic modems.
DEFAULT_TECHNOLOGIES = (
    TechnologyClass('LF', 1000., 3000., noise_level_db=40.,
                    bandwidth_hz=16000., max_payload_bits=9600),
    TechnologyClass('MF', 32000., 300., noise_level_db=30.,
                    bandwidth_hz=30000., max_payload_bits=30000),
    TechnologyClass('HF', 64000., 100., noise_level_db=10.,
                    bandwidth_hz=80000., max_payload_bits=30000),
)


@dataclass(frozen=True)
class NodeSpec:
    """Network node.

    Parameters
    ----------
    id : int
        Node identifier.

    position : tuple of float
        ``(x, y, z)`` coordinates in meters; ``z`` is depth.

    technologies : frozenset of str
        Ids of the technologies carried by the node.
    """
    id: int
    position: Tuple[float, float, float]
    technologies: FrozenSet[str]

    def __post_init__(self):
        object.__setattr__(
            self, 'position', tuple(float(c) for c in self.position))
        object.__setattr__(
            self, 'technologies', frozenset(self.technologies))
        if len(self.position) != 3:
            raise TopologyError(f'Node {self.id}: position must be 3-D.')
        if not self.technologies:
            raise TopologyError(f'Node {self.id} carries no technology.')


@dataclass(frozen=True)
class ObstacleSegment:
    """Straight obstacle blocking line of sight.

    A horizontal obstacle is a wall spanning the water column; it blocks a
    link whose x-y trace crosses it. A vertical obstacle is a pole at
    ``(x, y)`` between two depths; it blocks a link that passes within
    :data:`POLE_RADIUS` of the pole axis at a depth inside its z-range.
    """
    a: Tuple[float, float, float]
    b: Tuple[float, float, float]
    orientation: str = 'horizontal'

    def __post_init__(self):
        object.__setattr__(self, 'a', tuple(float(c) for c in self.a))
        object.__setattr__(self, 'b', tuple(float(c) for c in self.b))
        if self.orientation not in ('horizontal', 'vertical'):
            raise TopologyError(
                f'Unknown obstacle orientation: {self.orientation}')
        if not self.length > 0:
            raise TopologyError('Obstacle segment has zero length.')
        if self.orientation == 'vertical' and self.a[:2] != self.b[:2]:
            raise TopologyError(
                'Vertical obstacle endpoints must share x and y.')

    @property
    def length(self):
        return math.dist(self.a, self.b)

    def blocks(self, p, q):
        """Return True if the straight path from `p` to `q` crosses the
        obstacle."""
        if self.orientation == 'horizontal':
            return segments_intersect(p[:2], q[:2], self.a[:2], self.b[:2])
        return self._blocks_pole(p, q)

    def _blocks_pole(self, p, q):
        cx, cy = self.a[0], self.a[1]
        dx, dy = q[0] - p[0], q[1] - p[1]
        norm2 = dx * dx + dy * dy
        # Closest point of the x-y trace to the pole axis.
        s = 0.
        if norm2 > 0:
            s = clip(((cx - p[0]) * dx + (cy - p[1]) * dy) / norm2, 0., 1.)
        if math.hypot(p[0] + s * dx - cx, p[1] + s * dy - cy) > POLE_RADIUS:
            return False
        z = p[2] + s * (q[2] - p[2])
        z0, z1 = sorted((self.a[2], self.b[2]))
        return z0 <= z <= z1


@dataclass(frozen=True)
class ObstacleField:
    """Collection of obstacles placed in the scenario volume."""
    segments: Tuple[ObstacleSegment, ...] = ()

    def blocks(self, p, q):
        return any(seg.blocks(p, q) for seg in self.segments)

    def __len__(self):
        return len(self.segments)


@dataclass(frozen=True, order=True)
class Link:
    """Undirected link between nodes `a` < `b` over technology `tech`."""
    a: int
    b: int
    tech: str

    @staticmethod
    def make(a, b, tech):
        """Return link with endpoints in canonical order."""
        if a == b:
            raise TopologyError(f'Self link at node {a}.')
        return Link(min(a, b), max(a, b), tech)


def _orientation(p, q, r):
    val = (q[1] - p[1]) * (r[0] - q[0]) - (q[0] - p[0]) * (r[1] - q[1])
    if abs(val) < 1e-12:
        return 0
    return 1 if val > 0 else 2


def _on_segment(p, q, r):
    return (min(p[0], r[0]) - 1e-12 <= q[0] <= max(p[0], r[0]) + 1e-12 and
            min(p[1], r[1]) - 1e-12 <= q[1] <= max(p[1], r[1]) + 1e-12)


def segments_intersect(p1, q1, p2, q2):
    """Return True if 2-D segments ``p1-q1`` and ``p2-q2`` intersect.

    Touching endpoints and collinear overlaps count as intersections.
    """
    o1 = _orientation(p1, q1, p2)
    o2 = _orientation(p1, q1, q2)
    o3 = _orientation(p2, q2, p1)
    o4 = _orientation(p2, q2, q1)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(p1, p2, q1):
        return True
    if o2 == 0 and _on_segment(p1, q2, q1):
        return True
    if o3 == 0 and _on_segment(p2, p1, q2):
        return True
    if o4 == 0 and _on_segment(p2, q1, q2):
        return True
    return False


def derive_links(nodes, technologies, obstacles=None):
    """Derive the links implied by node positions and technology ranges.

    A link ``(a, b, t)`` exists iff both nodes carry `t`, their Euclidean
    distance is at most the range of `t`, and no obstacle crosses the line of
    sight between them.

    Parameters
    ----------
    nodes : Iterable[NodeSpec]
        Network nodes.

    technologies : Mapping[str, TechnologyClass] or Iterable[TechnologyClass]
        Technology catalog.

    obstacles : ObstacleField, optional
        Obstacles. If None, line of sight is never blocked.
        (Default: None)

    Returns
    -------
    frozenset of Link
    """
    techs = _tech_map(technologies)
    if obstacles is None:
        obstacles = ObstacleField()
    nodes = sorted(nodes, key=lambda n: n.id)
    links = set()
    for na, nb in itertools.combinations(nodes, 2):
        common = na.technologies & nb.technologies
        if not common:
            continue
        dist = math.dist(na.position, nb.position)
        in_range = [t for t in common if dist <= techs[t].max_range]
        if not in_range:
            continue
        if obstacles.blocks(na.position, nb.position):
            continue
        for t in in_range:
            links.add(Link.make(na.id, nb.id, t))
    return frozenset(links)


def _tech_map(technologies):
    if isinstance(technologies, Mapping):
        return dict(technologies)
    return {t.id: t for t in technologies}


def _neighbor_map(node_ids, links):
    neighbors = {n: set() for n in node_ids}
    for link in links:
        neighbors[link.a].add(link.b)
        neighbors[link.b].add(link.a)
    return {n: frozenset(nbrs) for n, nbrs in neighbors.items()}


def _hop_counts(node_ids, all_neighbors, sink):
    g = nx.Graph()
    g.add_nodes_from(node_ids)
    for n, nbrs in all_neighbors.items():
        g.add_edges_from((n, m) for m in nbrs)
    return nx.single_source_shortest_path_length(g, sink)


def _discover(node_ids, all_neighbors, sink):
    hops = _hop_counts(node_ids, all_neighbors, sink)
    for n in sorted(node_ids):
        if n not in hops:
            raise RouteDiscoveryError(n)
    upstream = {}
    for i in sorted(node_ids):
        if i == sink:
            upstream[i] = ()
            continue
        ups = [j for j in all_neighbors[i]
               if hops[j] < hops[i] or (hops[j] == hops[i] and j > i)]
        upstream[i] = tuple(sorted(ups))
    return upstream


@dataclass(frozen=True, eq=False)
class TopologyGraph:
    """Multi-modal network graph oriented towards a sink.

    Instances are immutable once built; use :meth:`build` rather than the
    constructor so that neighbor and upstream sets are derived and checked.

    Parameters
    ----------
    nodes : tuple of NodeSpec
        Nodes in ascending id order.

    technologies : dict
        Mapping from technology id to :class:`TechnologyClass`.

    links : frozenset of Link
        Undirected per-technology links.

    sink : int
        Destination of all traffic.

    upstream : dict
        Mapping from node id to the ascending tuple of its upstream
        neighbors.

    all_neighbors : dict
        Mapping from node id to the set of all its one-hop neighbors.

    obstacles : ObstacleField
        Obstacles the links were derived under.
    """
    nodes: Tuple[NodeSpec, ...]
    technologies: Dict[str, TechnologyClass]
    links: FrozenSet[Link]
    sink: int
    upstream: Dict[int, Tuple[int, ...]]
    all_neighbors: Dict[int, FrozenSet[int]]
    obstacles: ObstacleField = field(default_factory=ObstacleField)

    @classmethod
    def build(cls, nodes, technologies, links, sink, upstream=None,
              obstacles=None):
        """Construct graph, deriving neighbor sets and, unless given
        explicitly, upstream sets.

        Raises
        ------
        TopologyError
            If the inputs violate a graph invariant.
        RouteDiscoveryError
            If upstream sets are derived and some node cannot reach the sink.
        """
        nodes = tuple(sorted(nodes, key=lambda n: n.id))
        techs = _tech_map(technologies)
        links = frozenset(links)
        node_ids = [n.id for n in nodes]
        all_neighbors = _neighbor_map(node_ids, links)
        if upstream is None:
            upstream = _discover(node_ids, all_neighbors, sink)
        else:
            upstream = {n: tuple(sorted(upstream.get(n, ())))
                        for n in node_ids}
        graph = cls(nodes, techs, links, sink, upstream, all_neighbors,
                    obstacles if obstacles is not None else ObstacleField())
        graph.validate()
        return graph

    def validate(self):
        """Check graph invariants.

        If all checks pass, return the graph. Otherwise, raises
        :class:`TopologyError`.
        """
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise TopologyError('Duplicate node ids.')
        if self.sink not in ids:
            raise TopologyError(f'Sink {self.sink} is not a node.')
        for node in self.nodes:
            unknown = node.technologies - set(self.technologies)
            if unknown:
                raise TopologyError(
                    f'Node {node.id} carries unknown technologies: '
                    f'{sorted(unknown)}')
        by_id = {n.id: n for n in self.nodes}
        for link in self.links:
            for end in (link.a, link.b):
                if end not in by_id:
                    raise TopologyError(f'Link {link} names unknown node.')
                if link.tech not in by_id[end].technologies:
                    raise TopologyError(
                        f'Link {link}: node {end} lacks {link.tech}.')
        if self.upstream[self.sink]:
            raise TopologyError('Sink must have an empty upstream set.')
        for n, ups in self.upstream.items():
            stray = set(ups) - self.all_neighbors[n]
            if stray:
                raise TopologyError(
                    f'Upstream set of node {n} holds non-neighbors '
                    f'{sorted(stray)}.')
        if not nx.is_directed_acyclic_graph(self.routing_digraph()):
            raise TopologyError('Upstream sets contain a routing cycle.')
        return self

    @property
    def node_ids(self):
        """Node ids in ascending order."""
        return tuple(n.id for n in self.nodes)

    @property
    def sources(self):
        """Ids of all nodes other than the sink."""
        return tuple(n for n in self.node_ids if n != self.sink)

    def node(self, node_id):
        """Return :class:`NodeSpec` with id `node_id`."""
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def distance(self, a, b):
        """Euclidean distance in meters between nodes `a` and `b`."""
        return math.dist(self.node(a).position, self.node(b).position)

    def techs_between(self, a, b):
        """Return ids of technologies linking `a` and `b`, fastest first."""
        lo, hi = min(a, b), max(a, b)
        techs = [l.tech for l in self.links if l.a == lo and l.b == hi]
        return tuple(sorted(
            techs, key=lambda t: (-self.technologies[t].bit_rate, t)))

    def neighbors_on(self, node_id, tech):
        """Return ascending ids of nodes linked to `node_id` over `tech`."""
        nbrs = set()
        for link in self.links:
            if link.tech != tech:
                continue
            if link.a == node_id:
                nbrs.add(link.b)
            elif link.b == node_id:
                nbrs.add(link.a)
        return tuple(sorted(nbrs))

    def downstream(self, j):
        """Return ascending ids of nodes that hold `j` as upstream
        neighbor."""
        return tuple(n for n in self.node_ids if j in self.upstream[n])

    def node_technologies(self, node_id):
        """Technologies of `node_id`, fastest first."""
        return tuple(sorted(
            self.node(node_id).technologies,
            key=lambda t: (-self.technologies[t].bit_rate, t)))

    def routing_digraph(self):
        """Return :class:`networkx.DiGraph` with an edge ``i -> j`` for
        every ``j`` upstream of ``i``."""
        g = nx.DiGraph()
        g.add_nodes_from(self.node_ids)
        for i, ups in self.upstream.items():
            g.add_edges_from((i, j) for j in ups)
        return g

    def with_technologies(self, technologies):
        """Return copy with the technology catalog replaced (e.g., to apply
        configured payload limits)."""
        return replace(self, technologies=_tech_map(technologies))


def discover_routes(graph, sink=None):
    """Derive upstream-neighbor sets from hop counts towards `sink`.

    ``hop(n)`` is the unweighted shortest-path hop count to the sink over the
    union of all technology links. Node ``j`` is upstream of neighbor ``i`` if
    ``hop(j) < hop(i)``, or if ``hop(j) == hop(i)`` and ``j > i``.

    Parameters
    ----------
    graph : TopologyGraph
        Network graph. Only its nodes and links are used.

    sink : int, optional
        Destination. If None, use ``graph.sink``.
        (Default: None)

    Returns
    -------
    dict
        Mapping from node id to ascending tuple of upstream neighbors.

    Raises
    ------
    RouteDiscoveryError
        If some node cannot reach the sink.
    """
    sink = graph.sink if sink is None else sink
    return _discover(graph.node_ids, graph.all_neighbors, sink)


def max_flow(nodes, edges, source, target):
    """Return the maximum `source`-`target` flow value.

    Parameters
    ----------
    nodes : Iterable
        Node labels, in the order they should be added to the flow network.

    edges : Iterable[tuple]
        Directed ``(u, v, capacity)`` triples; parallel edges add up.

    source, target
        Flow endpoints.

    Returns
    -------
    int

    Raises
    ------
    ValueError
        If `source` equals `target` or a capacity is negative.
    """
    if source == target:
        raise ValueError('Flow source and target must differ.')
    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    for u, v, cap in edges:
        if cap < 0:
            raise ValueError(f'Negative capacity on edge ({u}, {v}).')
        if g.has_edge(u, v):
            g[u][v]['capacity'] += cap
        else:
            g.add_edge(u, v, capacity=cap)
    for n in (source, target):
        if n not in g:
            g.add_node(n)
    value, _ = nx.maximum_flow(
        g, source, target, capacity='capacity', flow_func=edmonds_karp)
    return int(round(value))


def count_disjoint_routes_full(graph, i, sink=None):
    """Count node-disjoint upstream routes from `i` to the sink.

    Every node ``n`` is split into ``n_in -> n_out`` with unit capacity and
    every routing edge ``l -> m`` (``m`` upstream of ``l``) becomes
    ``l_out -> m_in`` with unit capacity. The maximum flow from ``i_out`` to
    ``sink_in`` is the number of node-disjoint routes.

    Parameters
    ----------
    graph : TopologyGraph
        Network graph.

    i : int
        Source node.

    sink : int, optional
        Destination. If None, use ``graph.sink``.
        (Default: None)

    Returns
    -------
    int
    """
    sink = graph.sink if sink is None else sink
    if i == sink:
        raise ValueError('Route count is undefined at the sink.')
    if not graph.upstream[i]:
        return 0
    split_nodes = []
    edges = []
    for n in graph.node_ids:
        split_nodes.extend([(n, 'in'), (n, 'out')])
        edges.append(((n, 'in'), (n, 'out'), 1))
    for ell in graph.node_ids:
        for m in graph.upstream[ell]:
            edges.append(((ell, 'out'), (m, 'in'), 1))
    return max_flow(split_nodes, edges, (i, 'out'), (sink, 'in'))


def disjoint_route_table(graph):
    """Return ``{node: count_disjoint_routes_full(graph, node)}`` for every
    non-sink node."""
    return {n: count_disjoint_routes_full(graph, n) for n in graph.sources}


def estimate_disjoint_routes_onehop(i, j, upstream_j, neighbors_i,
                                    upstream_sets, sink=None):
    """Estimate disjoint routes of `i` via relay `j` from one-hop knowledge.

    ``L = |Y_j| - #{w in Ytilde_i | Y_j : Y_w in ({i, j}, {i}, {j})}``,
    clamped below at 0.

    Parameters
    ----------
    i, j : int
        Downstream node and its candidate relay.

    upstream_j : Iterable[int]
        Upstream set of `j`.

    neighbors_i : Iterable[int]
        All one-hop neighbors of `i`.

    upstream_sets : Mapping[int, Iterable[int]]
        Upstream sets of every ``w`` in ``neighbors_i | upstream_j``.

    sink : int, optional
        Destination. The estimate is not defined when the sink is upstream of
        `j`.

    Returns
    -------
    int

    Raises
    ------
    ValueError
        If `sink` is upstream of `j`.
    """
    upstream_j = frozenset(upstream_j)
    if sink is not None and sink in upstream_j:
        raise ValueError(
            f'Sink is upstream of {j}; use the sink-adjacent rule.')
    bad = (frozenset((i, j)), frozenset((i,)), frozenset((j,)))
    count = 0
    for w in sorted(frozenset(neighbors_i) | upstream_j):
        if frozenset(upstream_sets.get(w, ())) in bad:
            count += 1
    return max(0, len(upstream_j) - count)


@dataclass(frozen=True)
class GenerationParams:
    """Parameters of the random scenario generator.

    Parameters
    ----------
    node_count : int
        Number of nodes, sink included. The sink is the last node.

    area : tuple of float
        Horizontal extent ``(width, length)`` in meters.

    depth : float
        Water depth in meters.

    horizontal_obstacles, vertical_obstacles : int
        Obstacle counts.

    obstacle_length : tuple of float
        Range ``(lo, hi)`` of uniformly drawn obstacle lengths in meters.

    technologies : tuple of TechnologyClass
        Technology catalog.

    assignment : str
        ``'random-subset'``: each non-sink node draws a uniformly random
        non-empty subset of the catalog; ``'all'``: every node carries every
        technology. The sink always carries the full catalog.

    max_attempts : int
        Resampling budget of :func:`sample_connected_topology`.
    """
    node_count: int = 10
    area: Tuple[float, float] = (500., 500.)
    depth: float = 100.
    horizontal_obstacles: int = 4
    vertical_obstacles: int = 1
    obstacle_length: Tuple[float, float] = (10., 50.)
    technologies: Tuple[TechnologyClass, ...] = DEFAULT_TECHNOLOGIES
    assignment: str = 'random-subset'
    max_attempts: int = 20

    def __post_init__(self):
        if self.node_count < 2:
            raise TopologyError('Need at least 2 nodes.')
        if min(self.area) <= 0 or self.depth <= 0:
            raise TopologyError('Area and depth must be positive.')
        lo, hi = self.obstacle_length
        if lo <= 0 or hi < lo:
            raise TopologyError(
                f'Invalid obstacle length range: [{lo}, {hi}]')
        if self.assignment not in ('random-subset', 'all'):
            raise TopologyError(
                f'Unknown technology assignment rule: {self.assignment}')
        ids = [t.id for t in self.technologies]
        if not ids or len(set(ids)) != len(ids):
            raise TopologyError('Technology ids must be non-empty and unique.')


@dataclass
class GenerationResult:
    """Outcome of one generation attempt.

    ``graph`` is None and ``diagnostic`` explains why when the drawn scenario
    leaves some node without a route to the sink.
    """
    graph: Optional[TopologyGraph]
    nodes: Tuple[NodeSpec, ...]
    links: FrozenSet[Link]
    obstacles: ObstacleField
    diagnostic: Optional[str] = None

    @property
    def ok(self):
        return self.graph is not None


def _draw_obstacles(rng, params):
    width, length = params.area
    lo, hi = params.obstacle_length
    segs = []
    for _ in range(params.horizontal_obstacles):
        cx, cy = rng.uniform(0, width), rng.uniform(0, length)
        cz = rng.uniform(0, params.depth)
        theta = rng.uniform(0, math.pi)
        half = rng.uniform(lo, hi) / 2
        dx, dy = half * math.cos(theta), half * math.sin(theta)
        segs.append(ObstacleSegment(
            (cx - dx, cy - dy, cz), (cx + dx, cy + dy, cz), 'horizontal'))
    for _ in range(params.vertical_obstacles):
        cx, cy = rng.uniform(0, width), rng.uniform(0, length)
        cz = rng.uniform(0, params.depth)
        half = rng.uniform(lo, hi) / 2
        z0, z1 = max(0., cz - half), min(params.depth, cz + half)
        if z1 - z0 <= 0:
            z0, z1 = 0., min(params.depth, 2 * half)
        segs.append(ObstacleSegment((cx, cy, z0), (cx, cy, z1), 'vertical'))
    return ObstacleField(tuple(segs))


def _draw_technologies(rng, params, is_sink):
    catalog = [t.id for t in params.technologies]
    if is_sink or params.assignment == 'all':
        return frozenset(catalog)
    # Uniform over the non-empty subsets.
    mask = int(rng.integers(1, 2 ** len(catalog)))
    return frozenset(t for k, t in enumerate(catalog) if mask >> k & 1)


def generate_random_topology(params, seed, attempt=0):
    """Draw one random scenario.

    Nodes are placed uniformly in the ``area x depth`` volume, obstacles are
    placed uniformly with uniformly drawn lengths, links follow from
    :func:`derive_links`, and the last node is the sink. The result is a pure
    function of ``(params, seed, attempt)``.

    Parameters
    ----------
    params : GenerationParams
        Scenario parameters.

    seed : int
        Run seed.

    attempt : int, optional
        Resampling index; each attempt draws from an independent stream.
        (Default: 0)

    Returns
    -------
    GenerationResult
        On failure ``graph`` is None and ``diagnostic`` names the
        unreachable node.
    """
    ss = np.random.SeedSequence(
        entropy=int(seed), spawn_key=(TOPOLOGY_STREAM, int(attempt)))
    rng = np.random.default_rng(ss)
    width, length = params.area
    n = params.node_count
    nodes = []
    for node_id in range(1, n + 1):
        pos = (rng.uniform(0, width), rng.uniform(0, length),
               rng.uniform(0, params.depth))
        techs = _draw_technologies(rng, params, is_sink=node_id == n)
        nodes.append(NodeSpec(node_id, pos, techs))
    obstacles = _draw_obstacles(rng, params)
    links = derive_links(nodes, params.technologies, obstacles)
    try:
        graph = TopologyGraph.build(
            nodes, params.technologies, links, sink=n, obstacles=obstacles)
    except RouteDiscoveryError as e:
        return GenerationResult(None, tuple(nodes), links, obstacles,
                                diagnostic=str(e))
    return GenerationResult(graph, tuple(nodes), links, obstacles)


def sample_connected_topology(params, seed):
    """Draw random scenarios until one is connected.

    Returns
    -------
    TopologyGraph

    Raises
    ------
    DisconnectedTopologyError
        If ``params.max_attempts`` attempts all fail.
    """
    diagnostic = None
    for attempt in range(params.max_attempts):
        result = generate_random_topology(params, seed, attempt)
        if result.ok:
            if attempt:
                logger.debug(
                    f'Seed {seed}: connected topology after {attempt + 1} '
                    f'attempts.')
            return result.graph
        diagnostic = result.diagnostic
        logger.debug(f'Seed {seed}, attempt {attempt}: {diagnostic} '
                     f'Resampling.')
    raise DisconnectedTopologyError(
        f'No connected topology for seed {seed} after {params.max_attempts} '
        f'attempts. Last diagnostic: {diagnostic}')
