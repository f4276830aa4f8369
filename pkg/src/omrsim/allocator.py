# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Resource allocation for multi-modal routing.

Every scheduling decision at node ``i`` solves a small linear program:
maximize the number of bits handed to upstream neighbors, subject to

- the total not exceeding the node's backlog ``P_i``;
- the bits handed to neighbor ``j`` not exceeding ``j``'s residual upstream
  capacity ``delta_j``;
- the bits sent to ``j`` over technology ``t`` not exceeding the node's
  capacity ``C_i(t, u)`` scaled by its fair share ``F_j(i)``.

``delta_j`` is itself derived from an estimate of what ``j`` will send
(the same program from ``j``'s point of view, without the ``delta``
constraint). All quantities are bits; allocations are quantized to whole
bytes by default.
"""
from dataclasses import dataclass, field
import math
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from .logging import getLogger
from .topology import disjoint_route_table, estimate_disjoint_routes_onehop

__all__ = ['Allocation', 'AllocationError', 'CapacityTable', 'FairShareTable',
           'LinearProgram', 'LPSolution', 'NeighborView',
           'UnboundedProgramError', 'compute_delta', 'compute_fair_share',
           'control_overhead_bits', 'estimate_neighbor_allocation',
           'fair_share_table', 'route_counter', 'solve_allocation', 'solve_lp',
           'update_neighbor_backlog']


logger = getLogger()

MODES = ('ff', 'pf')

# Relative tolerance used when checking constraints on float inputs.
TOL = 1e-9


class AllocationError(Exception):
    """Allocation violates a constraint or a program could not be solved."""


class UnboundedProgramError(AllocationError):
    """Linear program has no finite optimum."""


def _floor_to(x, granularity):
    """Round `x` down to a multiple of `granularity`; infinities pass."""
    if math.isinf(x):
        return x
    x = max(0., float(x))
    if not granularity:
        return x
    return float(granularity * math.floor(x / granularity + TOL))


@dataclass(frozen=True)
class CapacityTable:
    """Bits each node can push over each technology in one period.

    Parameters
    ----------
    entries : dict
        Mapping from ``(node, technology)`` to capacity in bits.

    period_u : float
        Capacity period in seconds.
    """
    entries: Dict[Tuple[int, str], float]
    period_u: float

    def __post_init__(self):
        if not self.period_u > 0:
            raise ValueError('Capacity period must be positive.')
        for key, cap in self.entries.items():
            if cap < 0:
                raise ValueError(f'Negative capacity for {key}.')

    @classmethod
    def from_graph(cls, graph, period_u, granularity=8):
        """Tabulate ``C = bit_rate * u`` for every node technology."""
        entries = {}
        for node in graph.nodes:
            for t in node.technologies:
                cap = graph.technologies[t].bit_rate * period_u
                entries[(node.id, t)] = _floor_to(cap, granularity)
        return cls(entries, period_u)

    def capacity(self, node, tech):
        """Return ``C_node(tech, u)``; 0 if `node` lacks `tech`."""
        return self.entries.get((node, tech), 0.)


@dataclass
class FairShareTable:
    """Fair shares ``F_j(i)`` keyed by ``(relay j, downstream node i)``."""
    entries: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def get(self, j, i, default=0.):
        return self.entries.get((j, i), default)

    def set(self, j, i, value):
        if not 0 <= value <= 1:
            raise ValueError(f'Fair share F_{j}({i}) = {value} outside [0, 1].')
        self.entries[(j, i)] = value


@dataclass
class NeighborView:
    """What a node knows about one of its upstream neighbors ``j``.

    Parameters
    ----------
    node : int
        Neighbor id ``j``.

    reported_backlog : float
        Last backlog ``P_j`` reported by ``j``, in bits.

    report_time : float
        Simulated time the report was made.

    upstream : tuple of int
        ``Y_j``.

    fair_shares : dict
        ``{k: F_k(j)}`` for ``k`` in ``Y_j``.

    capacities : dict
        ``{t: C_j(t, u)}`` for every technology of ``j``.

    technologies : dict
        ``{k: T_j(k)}``: technologies linking ``j`` to each ``k`` in ``Y_j``.
    """
    node: int
    reported_backlog: float = 0.
    report_time: float = 0.
    upstream: Tuple[int, ...] = ()
    fair_shares: Dict[int, float] = field(default_factory=dict)
    capacities: Dict[str, float] = field(default_factory=dict)
    technologies: Dict[int, Tuple[str, ...]] = field(default_factory=dict)

    def validate(self, now=None):
        if self.reported_backlog < 0:
            raise ValueError(
                f'Neighbor {self.node}: negative reported backlog.')
        if now is not None and self.report_time > now + TOL:
            raise ValueError(
                f'Neighbor {self.node}: report time {self.report_time} is in '
                f'the future (now={now}).')
        return self


@dataclass
class Allocation:
    """Bits per ``(neighbor, technology)`` for one scheduling decision.

    ``entries`` holds every variable of the program, in tie-break order,
    including those that received nothing.
    """
    node: int
    entries: Dict[Tuple[int, str], float]
    timestamp: float = 0.

    @property
    def total(self):
        return float(sum(self.entries.values()))

    def by_neighbor(self, j):
        """Return total bits allocated to neighbor `j`."""
        return float(sum(v for (jj, _), v in self.entries.items() if jj == j))

    def nonzero(self):
        """Return ``[(j, t, bits)]`` for positive entries, in tie-break
        order."""
        return [(j, t, v) for (j, t), v in self.entries.items() if v > 0]

    def is_empty(self):
        return not self.nonzero()

    def to_record(self):
        return [[j, t, v] for (j, t), v in self.entries.items()]


@dataclass
class LinearProgram:
    """``max c.x  s.t.  A x <= b,  x >= 0``.

    Parameters
    ----------
    objective : ndarray, (n_vars,)
        Objective coefficients.

    A_ub : ndarray, (n_rows, n_vars)
        Constraint coefficients.

    b_ub : ndarray, (n_rows,)
        Constraint upper bounds; must be non-negative.

    labels : tuple, optional
        Variable labels, in column order.
    """
    objective: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    labels: Tuple = ()

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        n_vars = self.objective.size
        self.b_ub = np.asarray(self.b_ub, dtype=np.float64).reshape(-1)
        A = np.atleast_2d(np.asarray(self.A_ub, dtype=np.float64))
        if A.size == 0:
            A = np.zeros((self.b_ub.size, n_vars))
        self.A_ub = A
        if A.shape[1] != n_vars:
            raise ValueError(
                f'Constraint matrix has {A.shape[1]} columns for {n_vars} '
                f'variables.')
        if self.A_ub.shape[0] != self.b_ub.size:
            raise ValueError(
                f'Constraint matrix has {self.A_ub.shape[0]} rows but '
                f'{self.b_ub.size} bounds were given.')
        if (self.b_ub < 0).any():
            raise ValueError('Program is not feasible at the origin.')

    @property
    def n_vars(self):
        return self.objective.size

    def is_greedy_solvable(self):
        """True if the program is a laminar polymatroid with uniform
        objective, for which filling variables in any order is optimal."""
        c = self.objective
        if c.size == 0:
            return True
        if not (c > 0).all() or not np.allclose(c, c[0]):
            return False
        A = self.A_ub
        if not np.isin(A, (0., 1.)).all():
            return False
        rows = [frozenset(np.flatnonzero(row)) for row in A]
        for a_idx, a in enumerate(rows):
            for b in rows[a_idx + 1:]:
                if a & b and not (a <= b or b <= a):
                    return False
        return True


@dataclass
class LPSolution:
    x: np.ndarray
    objective: float


def _solve_greedy(lp):
    x = np.zeros(lp.n_vars)
    residual = lp.b_ub.copy()
    for v in range(lp.n_vars):
        rows = lp.A_ub[:, v] > 0
        if not rows.any():
            raise UnboundedProgramError(
                f'Variable {lp.labels[v] if lp.labels else v} has no upper '
                f'bound.')
        amount = max(0., residual[rows].min())
        x[v] = amount
        residual[rows] -= amount
    return LPSolution(x, float(lp.objective @ x))


def solve_lp(lp):
    """Solve bounded maximization program `lp`.

    Laminar programs with a uniform objective (every allocation program
    built here) are solved by filling variables in column order, which
    makes the column order the tie-break among optima. Anything else goes to
    the HiGHS solver.

    Parameters
    ----------
    lp : LinearProgram
        Program to solve.

    Returns
    -------
    LPSolution

    Raises
    ------
    UnboundedProgramError
        If the objective is unbounded.
    AllocationError
        If the solver fails for any other reason.
    """
    if lp.n_vars == 0:
        return LPSolution(np.zeros(0), 0.)
    if lp.is_greedy_solvable():
        return _solve_greedy(lp)
    res = linprog(
        -lp.objective, A_ub=lp.A_ub if lp.A_ub.size else None,
        b_ub=lp.b_ub if lp.b_ub.size else None,
        bounds=[(0, None)] * lp.n_vars, method='highs')
    if res.status == 3:
        raise UnboundedProgramError('Linear program is unbounded.')
    if res.status != 0:
        raise AllocationError(f'Linear program failed: {res.message}')
    x = np.clip(res.x, 0, None)
    return LPSolution(x, float(lp.objective @ x))


def _variable_order(node, upstream, technologies, capacities):
    # Fastest technology first, then ascending neighbor id.
    variables = []
    for j in sorted(upstream):
        for t in technologies.get(j, ()):
            variables.append((j, t))
    return sorted(variables, key=lambda v: (
        -capacities.capacity(node, v[1]), v[0], v[1]))


def _allocate(node, backlog, variables, var_caps, group_caps, timestamp,
              granularity):
    n = len(variables)
    if not n:
        return Allocation(node, {}, timestamp)
    rows, bounds = [], []
    # Queue limit.
    rows.append(np.ones(n))
    bounds.append(_floor_to(backlog, granularity))
    # Per-neighbor limits; infinite limits are dropped.
    for j, cap in sorted(group_caps.items()):
        if math.isinf(cap):
            continue
        rows.append(np.array([1. if v[0] == j else 0. for v in variables]))
        bounds.append(_floor_to(cap, granularity))
    # Per-variable caps.
    for k, cap in enumerate(var_caps):
        row = np.zeros(n)
        row[k] = 1.
        rows.append(row)
        bounds.append(_floor_to(cap, granularity))
    lp = LinearProgram(np.ones(n), np.vstack(rows), np.array(bounds),
                       labels=tuple(variables))
    sol = solve_lp(lp)
    entries = {}
    for v, amount in zip(variables, sol.x):
        entries[v] = _floor_to(amount, granularity)
    return Allocation(node, entries, timestamp)


def _check(alloc, backlog, group_caps, var_caps):
    total = alloc.total
    if total > backlog * (1 + TOL) + TOL:
        raise AllocationError(
            f'Node {alloc.node}: allocated {total} bits with backlog '
            f'{backlog}.')
    for j, cap in group_caps.items():
        got = alloc.by_neighbor(j)
        if got > cap * (1 + TOL) + TOL:
            raise AllocationError(
                f'Node {alloc.node}: allocated {got} bits to {j} with '
                f'residual capacity {cap}.')
    for (v, amount), cap in zip(alloc.entries.items(), var_caps):
        if amount < 0 or amount > cap * (1 + TOL) + TOL:
            raise AllocationError(
                f'Node {alloc.node}: allocation {amount} for {v} outside '
                f'[0, {cap}].')


def solve_allocation(i, backlog, upstream, technologies, capacities,
                     fair_shares, deltas, timestamp=0., granularity=8):
    """Allocate node `i`'s backlog over its upstream links.

    Maximizes the bits handed to upstream neighbors subject to the queue
    limit, each neighbor's residual capacity and each link's fair-share cap.
    Among optima, variables are filled in descending technology bit rate,
    then ascending neighbor id.

    Parameters
    ----------
    i : int
        Deciding node.

    backlog : float
        Queued bits ``P_i``.

    upstream : Iterable[int]
        Upstream neighbors ``Y_i``.

    technologies : Mapping[int, Iterable[str]]
        Technologies ``T_i(j)`` usable towards each ``j``.

    capacities : CapacityTable
        Per-period capacities.

    fair_shares : Mapping[int, float]
        ``{j: F_j(i)}``.

    deltas : Mapping[int, float]
        ``{j: delta_j}``; ``math.inf`` for neighbors that never back-pressure.

    timestamp : float, optional
        Decision time.
        (Default: 0.)

    granularity : int, optional
        Allocation quantum in bits; inputs and outputs are floored to it.
        (Default: 8)

    Returns
    -------
    Allocation

    Raises
    ------
    AllocationError
        If the solution violates a constraint.
    """
    variables = _variable_order(i, upstream, technologies, capacities)
    var_caps = [capacities.capacity(i, t) * fair_shares.get(j, 0.)
                for j, t in variables]
    group_caps = {j: deltas.get(j, math.inf) for j in upstream}
    alloc = _allocate(i, backlog, variables, var_caps, group_caps, timestamp,
                      granularity)
    _check(alloc, backlog, group_caps, var_caps)
    return alloc


def estimate_neighbor_allocation(view, timestamp=None, granularity=8,
                                 backlog=None):
    """Estimate what neighbor ``j`` will send to each of its upstream nodes.

    Same program as :func:`solve_allocation` from ``j``'s point of view,
    without residual-capacity limits.

    Parameters
    ----------
    view : NeighborView
        Knowledge about ``j``.

    timestamp : float, optional
        Estimate time. If None, use ``view.report_time``.

    granularity : int, optional
        Allocation quantum in bits.
        (Default: 8)

    backlog : float, optional
        Backlog to plan against. If None, use ``view.reported_backlog``.

    Returns
    -------
    Allocation
    """
    j = view.node
    backlog = view.reported_backlog if backlog is None else backlog
    timestamp = view.report_time if timestamp is None else timestamp
    caps = CapacityTable(
        {(j, t): c for t, c in view.capacities.items()}, 1.)
    variables = _variable_order(j, view.upstream, view.technologies, caps)
    var_caps = [caps.capacity(j, t) * view.fair_shares.get(k, 0.)
                for k, t in variables]
    alloc = _allocate(j, backlog, variables, var_caps, {}, timestamp,
                      granularity)
    _check(alloc, backlog, {}, var_caps)
    return alloc


def compute_delta(j, estimated, capacities, upstream, technologies):
    """Residual upstream capacity of `j` after its estimated allocation.

    ``delta_j = sum_k sum_t (C_j(t, u) - R_j(k, t))``. Infinite for a node
    without upstream neighbors (the sink).

    Parameters
    ----------
    j : int
        Relay.

    estimated : Allocation
        Output of :func:`estimate_neighbor_allocation` for `j`.

    capacities : CapacityTable or Mapping[str, float]
        Capacities of `j`, either as a table or ``{t: C_j(t, u)}``.

    upstream : Iterable[int]
        ``Y_j``.

    technologies : Mapping[int, Iterable[str]]
        ``{k: T_j(k)}``.

    Returns
    -------
    float
    """
    upstream = tuple(upstream)
    if not upstream:
        return math.inf
    if isinstance(capacities, CapacityTable):
        cap = lambda t: capacities.capacity(j, t)
    else:
        cap = lambda t: capacities.get(t, 0.)
    delta = 0.
    for k in upstream:
        for t in technologies.get(k, ()):
            delta += max(0., cap(t) - estimated.entries.get((k, t), 0.))
    return delta


def update_neighbor_backlog(reported, estimated_sends):
    """Return ``max(0, reported - estimated_sends)``."""
    return max(0., float(reported) - float(estimated_sends))


def route_counter(graph, mode, route_table=None):
    """Return callable ``(l, j) -> L_{l,j}`` for fair-share computation.

    In ``'ff'`` mode the count is the exact number of node-disjoint routes
    from ``l`` to the sink (independent of ``j``), looked up in
    `route_table`, which defaults to
    :func:`~omrsim.topology.disjoint_route_table`. In ``'pf'`` mode it is
    the one-hop estimate; when the sink is upstream of ``j`` every count is 1.
    """
    if mode not in MODES:
        raise ValueError(f'Unknown routing mode: {mode}')
    if mode == 'ff':
        table = (disjoint_route_table(graph) if route_table is None
                 else route_table)
        return lambda ell, j: table[ell]
    sink = graph.sink
    def estimate(ell, j):
        up_j = graph.upstream[j]
        if sink in up_j:
            return 1
        nbrs = graph.all_neighbors[ell]
        return estimate_disjoint_routes_onehop(
            ell, j, up_j, nbrs, graph.upstream, sink)
    return estimate


def compute_fair_share(upstream, j, i, route_count, traffic_flags,
                       sum_over='downstream'):
    """Compute ``F_j(i)``: the share of relay `j`'s upstream capacity that
    downstream node `i` may claim.

    Nodes with fewer disjoint routes get larger shares. With ``Down(j)`` the
    downstream neighbors of `j` that have traffic:

    - ``F = 0`` if `i` has no traffic or ``Down(j)`` is empty;
    - ``F = 1`` if `j` is `i`'s only upstream neighbor, or if
      ``Lt_i = sum_{l in Down(j)} L_{l,j} - L_{i,j}`` is 0;
    - ``F = Lt_i / sum_{l in Down(j)} Lt_l`` otherwise.

    Parameters
    ----------
    upstream : Mapping[int, Iterable[int]]
        Upstream sets ``Y`` of every node.

    j, i : int
        Relay and downstream node.

    route_count : callable
        ``(l, j) -> L_{l,j}``; see :func:`route_counter`.

    traffic_flags : Container[int]
        Nodes with pending traffic.

    sum_over : str, optional
        ``'downstream'`` sums over ``Down(j)``; ``'upstream'`` sums over the
        members of ``Y_j`` with traffic.
        (Default: 'downstream')

    Returns
    -------
    float
    """
    if i not in traffic_flags:
        return 0.
    y_i = tuple(upstream[i])
    if j not in y_i:
        raise ValueError(f'{j} is not upstream of {i}.')
    if y_i == (j,):
        return 1.
    if sum_over == 'downstream':
        group = [ell for ell in sorted(upstream)
                 if j in upstream[ell] and ell in traffic_flags]
    elif sum_over == 'upstream':
        group = [ell for ell in sorted(upstream[j]) if ell in traffic_flags]
    else:
        raise ValueError(f'Unknown fair-share summation: {sum_over}')
    if not group:
        return 0.
    counts = {ell: route_count(ell, j) for ell in group}
    l_i = counts[i] if i in counts else route_count(i, j)
    total = sum(counts.values())
    lt_i = total - l_i
    if lt_i <= 0:
        return 1.
    denom = sum(total - counts[ell] for ell in group)
    if denom <= 0:
        return 1.
    return min(1., max(0., lt_i / denom))


def fair_share_table(graph, route_count, traffic_flags, relays=None,
                     sum_over='downstream'):
    """Tabulate ``F_j(i)`` for every routing edge ``i -> j`` whose relay is
    in `relays` (default: every node)."""
    relays = graph.node_ids if relays is None else relays
    table = FairShareTable()
    for j in relays:
        for i in graph.downstream(j):
            table.set(j, i, compute_fair_share(
                graph.upstream, j, i, route_count, traffic_flags, sum_over))
    return table


def control_overhead_bits(mode, n_nodes):
    """Control bits exchanged per decision round.

    ``'pf'``: ``8N``; ``'ff'``: ``N^2 + N^2 log2(N) + 8N``.
    """
    if n_nodes < 2:
        raise ValueError('Need at least 2 nodes.')
    if mode == 'pf':
        return 8. * n_nodes
    if mode == 'ff':
        n2 = n_nodes ** 2
        return n2 + n2 * math.log2(n_nodes) + 8. * n_nodes
    raise ValueError(f'Unknown routing mode: {mode}')
