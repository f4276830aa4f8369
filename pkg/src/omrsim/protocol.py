# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Per-node routing behavior.

Three policies are supported:

- ``omr-ff``: optimal multi-modal routing with full topology knowledge; fair
  shares are computed locally from exact disjoint-route counts;
- ``omr-pf``: the same allocation with one-hop knowledge; relays compute fair
  shares from one-hop route estimates and piggyback them on data;
- ``flooding``: every packet is re-broadcast on every technology, suppressed
  only by its path history.

Messages are queued as *units*: contiguous bit ranges of a message held by the
node. Serving a node slices units head-first into :class:`Fragment` objects
which travel in :class:`Datagram` objects, one datagram per (neighbor,
technology). The node that holds a unit is always the last entry of its
path history.
"""
from collections import deque
from dataclasses import dataclass, field
import math
from typing import Dict, List, Optional, Tuple

from .allocator import (CapacityTable, NeighborView, compute_delta,
                        compute_fair_share, estimate_neighbor_allocation,
                        route_counter, solve_allocation,
                        update_neighbor_backlog)
from .interval import Interval, merge_intervals
from .logging import getLogger
from .utils import add_dataclass_slots

__all__ = ['PROTOCOLS', 'Datagram', 'Fragment', 'Message', 'MessageReassembly',
           'NeighborRecord', 'NodeQueue', 'NodeState', 'Piggyback',
           'ProtocolContext', 'QueueUnit', 'ReassemblyBuffer',
           'ReassemblyError', 'ReceiveResult', 'ServeResult',
           'consume_piggyback', 'dequantize_backlog', 'dequantize_share',
           'flooding_serve', 'omr_serve', 'on_ack', 'on_ack_timeout',
           'on_receive', 'originate', 'quantize_backlog', 'quantize_share',
           'reassemble']


logger = getLogger()

PROTOCOLS = ('omr-ff', 'omr-pf', 'flooding')

# origin, msg_id, offset, length, total_length, path_len, piggyback flags
FIXED_HEADER_BITS = 8 + 16 + 32 + 32 + 32 + 8 + 8

# Backlog codes span 2**0 .. 2**BACKLOG_LOG2_MAX bits on a log2 scale.
BACKLOG_LOG2_MAX = 24
BACKLOG_CODES = 256


class ReassemblyError(Exception):
    """Fragments of one message disagree on its total length."""


def quantize_backlog(bits):
    """Map backlog to an 8-bit code.

    Code 0 is an empty queue; codes 1..255 cover ``1 .. 2**24`` bits on a
    logarithmic scale. Larger backlogs saturate at 255.
    """
    if bits < 1:
        return 0
    scale = (BACKLOG_CODES - 2) / BACKLOG_LOG2_MAX
    code = 1 + round(math.log2(bits) * scale)
    return int(min(BACKLOG_CODES - 1, max(1, code)))


def dequantize_backlog(code):
    """Inverse of :func:`quantize_backlog`."""
    if not 0 <= code < BACKLOG_CODES:
        raise ValueError(f'Invalid backlog code: {code}')
    if code == 0:
        return 0.
    return 2. ** ((code - 1) * BACKLOG_LOG2_MAX / (BACKLOG_CODES - 2))


def quantize_share(share):
    """Map fair share in [0, 1] to an 8-bit fixed-point code."""
    if not 0 <= share <= 1:
        raise ValueError(f'Fair share {share} outside [0, 1].')
    return int(round(share * 255))


def dequantize_share(code):
    return code / 255.


@dataclass(frozen=True)
class Message:
    """Network-layer message.

    Parameters
    ----------
    origin : int
        Generating node.

    msg_id : int
        Identifier, increasing per origin.

    payload_size : int
        Size in bits.

    created_at : float
        Arrival time at the origin's network layer.
    """
    origin: int
    msg_id: int
    payload_size: int
    created_at: float

    def __post_init__(self):
        if self.payload_size <= 0:
            raise ValueError(
                f'Message ({self.origin}, {self.msg_id}) has non-positive '
                f'size.')


@dataclass(frozen=True)
class Piggyback:
    """Protocol state piggybacked on a datagram.

    Parameters
    ----------
    backlog : float, optional
        Sender's quantized backlog ``P``.

    granted : tuple, optional
        ``((i, F_sender(i)), ...)``: shares the sender grants to its
        downstream neighbors.

    upstream_shares : tuple, optional
        ``((k, F_k(sender)), ...)``: shares the sender holds at its upstream
        neighbors.

    upstream : tuple of int, optional
        Sender's upstream set ``Y``.
    """
    backlog: Optional[float] = None
    granted: Optional[Tuple[Tuple[int, float], ...]] = None
    upstream_shares: Optional[Tuple[Tuple[int, float], ...]] = None
    upstream: Optional[Tuple[int, ...]] = None

    @property
    def bits(self):
        """Size on the wire, excluding the flags byte."""
        n = 0
        if self.backlog is not None:
            n += 8
        if self.granted is not None:
            n += 8 + 16 * len(self.granted)
        if self.upstream_shares is not None:
            n += 8 + 16 * len(self.upstream_shares)
        if self.upstream is not None:
            n += 8 + 8 * len(self.upstream)
        return n

    def to_record(self):
        return {'P': self.backlog,
                'F': None if self.granted is None else
                [list(e) for e in self.granted],
                'Fu': None if self.upstream_shares is None else
                [list(e) for e in self.upstream_shares],
                'Y': None if self.upstream is None else list(self.upstream)}


@add_dataclass_slots
@dataclass(frozen=True)
class Fragment:
    """Slice ``[offset, offset + length)`` of a message on the wire.

    ``path`` lists every node the slice has traversed, starting with the
    origin and ending with the transmitter.
    """
    origin: int
    msg_id: int
    offset: int
    length: int
    total_length: int
    path: Tuple[int, ...]
    piggyback: Optional[Piggyback] = None

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f'Fragment {self.key} has non-positive length.')
        if self.offset < 0 or self.offset + self.length > self.total_length:
            raise ValueError(
                f'Fragment {self.key} exceeds message length '
                f'{self.total_length}.')
        if not self.path or self.path[0] != self.origin:
            raise ValueError(
                f'Fragment {self.key}: path must start at the origin.')

    @property
    def key(self):
        return (self.origin, self.msg_id, self.offset, self.length)

    @property
    def interval(self):
        return Interval(self.offset, self.offset + self.length)

    @property
    def header_bits(self):
        bits = FIXED_HEADER_BITS + 8 * len(self.path)
        if self.piggyback is not None:
            bits += self.piggyback.bits
        return bits

    @property
    def wire_bits(self):
        return self.header_bits + self.length

    def to_record(self):
        return [self.origin, self.msg_id, self.offset, self.length,
                self.total_length, list(self.path), self.header_bits]


@dataclass(frozen=True)
class Datagram:
    """One physical-layer transmission of data.

    ``receiver`` is None for broadcasts. Piggybacked state rides on the first
    fragment.
    """
    datagram_id: int
    sender: int
    receiver: Optional[int]
    tech: str
    fragments: Tuple[Fragment, ...]
    sent_at: float = 0.

    @property
    def bits(self):
        return sum(f.wire_bits for f in self.fragments)

    @property
    def payload_bits(self):
        return sum(f.length for f in self.fragments)

    @property
    def piggyback(self):
        return self.fragments[0].piggyback if self.fragments else None

    @property
    def is_broadcast(self):
        return self.receiver is None


@dataclass
class QueueUnit:
    """Contiguous range of a message held by a node."""
    origin: int
    msg_id: int
    offset: int
    length: int
    total_length: int
    path: Tuple[int, ...]
    retries: int = 0


class NodeQueue:
    """FIFO of queue units plus the bits awaiting acknowledgment.

    ``total_backlog`` counts pending and in-flight bits; ``pending_bits``
    counts only what can still be scheduled.
    """
    def __init__(self):
        self.fifo = deque()
        self.pending_bits = 0
        self.in_flight = {}
        self.in_flight_bits = 0

    @property
    def total_backlog(self):
        return self.pending_bits + self.in_flight_bits

    def __len__(self):
        return len(self.fifo)

    def push(self, unit):
        """Append `unit` at the tail."""
        if unit.length <= 0:
            raise ValueError('Queue unit has non-positive length.')
        self.fifo.append(unit)
        self.pending_bits += unit.length

    def slice(self, budget):
        """Cut up to `budget` bits off the head of the FIFO.

        Returns
        -------
        list of tuple
            ``(fragment, retries)`` pairs in FIFO order.
        """
        out = []
        while self.fifo and budget > 0:
            unit = self.fifo[0]
            take = min(unit.length, int(budget))
            frag = Fragment(unit.origin, unit.msg_id, unit.offset, take,
                            unit.total_length, unit.path)
            out.append((frag, unit.retries))
            unit.offset += take
            unit.length -= take
            budget -= take
            self.pending_bits -= take
            if unit.length == 0:
                self.fifo.popleft()
        return out

    def hold(self, datagram_id, entries):
        """Mark ``(fragment, retries)`` `entries` as awaiting ack."""
        self.in_flight[datagram_id] = list(entries)
        self.in_flight_bits += sum(f.length for f, _ in entries)

    def release(self, datagram_id):
        """Forget in-flight datagram; return its entries or None."""
        entries = self.in_flight.pop(datagram_id, None)
        if entries is not None:
            self.in_flight_bits -= sum(f.length for f, _ in entries)
        return entries


@dataclass
class MessageReassembly:
    """Reception state of one message at the sink."""
    total_length: int
    intervals: List[Interval] = field(default_factory=list)
    received_bits: int = 0
    completed_at: Optional[float] = None

    @property
    def covered_bits(self):
        return sum(ivl.length for ivl in self.intervals)

    @property
    def duplicate_bits(self):
        return self.received_bits - self.covered_bits

    @property
    def complete(self):
        return self.covered_bits >= self.total_length


@dataclass
class ReassemblyStatus:
    complete: bool
    received_bits: int
    completed_at: Optional[float] = None


class ReassemblyBuffer:
    """Interval bookkeeping for messages arriving at the sink."""
    def __init__(self):
        self.messages = {}

    def add(self, fragment, now):
        """Record `fragment`.

        Returns
        -------
        newly_complete : bool
            True if this fragment completed its message.

        duplicate_bits : int
            Bits of `fragment` already covered.

        Raises
        ------
        ReassemblyError
            If the fragment's total length disagrees with earlier fragments.
        """
        key = (fragment.origin, fragment.msg_id)
        entry = self.messages.get(key)
        if entry is None:
            entry = self.messages[key] = MessageReassembly(
                fragment.total_length)
        elif entry.total_length != fragment.total_length:
            raise ReassemblyError(
                f'Message {key}: total length {fragment.total_length} '
                f'conflicts with {entry.total_length}.')
        before = entry.covered_bits
        was_complete = entry.complete
        entry.intervals = merge_intervals(
            entry.intervals + [fragment.interval])
        entry.received_bits += fragment.length
        duplicate_bits = fragment.length - (entry.covered_bits - before)
        newly_complete = entry.complete and not was_complete
        if newly_complete:
            entry.completed_at = now
        return newly_complete, duplicate_bits


def reassemble(buffer, origin, msg_id):
    """Return reassembly status of message (`origin`, `msg_id`).

    ``received_bits`` counts every received bit, duplicates included.
    """
    entry = buffer.messages.get((origin, msg_id))
    if entry is None:
        return ReassemblyStatus(False, 0)
    return ReassemblyStatus(entry.complete, entry.received_bits,
                            entry.completed_at)


@dataclass
class NeighborRecord:
    """State learned about one neighbor from its piggybacks."""
    reported_backlog: float = 0.
    report_time: float = 0.
    upstream: Optional[Tuple[int, ...]] = None
    upstream_shares: Dict[int, float] = field(default_factory=dict)
    heard: bool = False


@dataclass
class ProtocolContext:
    """Run-wide protocol parameters shared by every node.

    Parameters
    ----------
    graph : TopologyGraph
        Network.

    protocol : str
        One of ``PROTOCOLS``.

    capacities : CapacityTable
        Per-period capacities.

    max_payload : dict
        Maximum datagram payload in bits per technology.

    route_count : callable, optional
        ``(l, j) -> L_{l,j}``. Derived from `protocol` if None.

    sum_over : str, optional
        Fair-share summation set; see :func:`compute_fair_share`.

    retry_cap : int, optional
        Retransmissions allowed per unit; None for unlimited.

    granularity : int, optional
        Allocation quantum in bits.
    """
    graph: object
    protocol: str
    capacities: CapacityTable
    max_payload: Dict[str, int]
    route_count: Optional[object] = None
    sum_over: str = 'downstream'
    retry_cap: Optional[int] = None
    granularity: int = 8

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(
                f'Unknown protocol "{self.protocol}". Valid protocols: '
                f'{", ".join(PROTOCOLS)}')
        if self.route_count is None and self.protocol != 'flooding':
            self.route_count = route_counter(self.graph, self.mode)

    @property
    def mode(self):
        return {'omr-ff': 'ff', 'omr-pf': 'pf'}.get(self.protocol)

    @property
    def period_u(self):
        return self.capacities.period_u


class NodeState:
    """Mutable protocol state of one node."""
    def __init__(self, node_id, ctx):
        self.node_id = node_id
        self.queue = NodeQueue()
        self.tech_queues = {}
        if ctx.protocol == 'flooding':
            self.tech_queues = {
                t: NodeQueue() for t in ctx.graph.node_technologies(node_id)}
        self.reassembly = ReassemblyBuffer()
        self.neighbors = {}
        self.granted_shares = {}
        self.last_piggyback = None
        self.next_datagram_id = 0

    @property
    def total_backlog(self):
        return self.queue.total_backlog + sum(
            q.total_backlog for q in self.tech_queues.values())

    def has_pending(self, tech=None):
        if tech is not None:
            return self.tech_queues[tech].pending_bits > 0
        if self.tech_queues:
            return any(q.pending_bits for q in self.tech_queues.values())
        return self.queue.pending_bits > 0

    def neighbor(self, j):
        if j not in self.neighbors:
            self.neighbors[j] = NeighborRecord()
        return self.neighbors[j]

    def new_datagram_id(self):
        self.next_datagram_id += 1
        return self.next_datagram_id


@dataclass
class ServeResult:
    """Output of one serve step.

    ``estimates`` and ``allocation`` are kept for the trace audit.
    """
    datagrams: List[Datagram] = field(default_factory=list)
    allocation: Optional[object] = None
    backlog: float = 0.
    fair_shares: Dict[int, float] = field(default_factory=dict)
    deltas: Dict[int, float] = field(default_factory=dict)
    caps: Dict[Tuple[int, str], float] = field(default_factory=dict)
    estimates: List[dict] = field(default_factory=list)


@dataclass
class ReceiveResult:
    enqueued: List[Fragment] = field(default_factory=list)
    completed: List[Tuple[int, int]] = field(default_factory=list)
    duplicate_bits: int = 0
    dropped: List[Tuple[Fragment, str]] = field(default_factory=list)


def originate(node, message, ctx):
    """Queue locally generated `message` at `node`."""
    if message.origin != node.node_id:
        raise ValueError(
            f'Node {node.node_id} cannot originate message of node '
            f'{message.origin}.')
    if node.node_id == ctx.graph.sink:
        return
    unit = QueueUnit(message.origin, message.msg_id, 0, message.payload_size,
                     message.payload_size, (message.origin,))
    if ctx.protocol == 'flooding':
        for q in node.tech_queues.values():
            q.push(QueueUnit(**vars(unit)))
    else:
        node.queue.push(unit)


def _default_share(upstream):
    return 1. / len(upstream) if upstream else 0.


def _fair_shares_at(node, ctx, traffic_flags):
    """``{j: F_j(i)}`` for the deciding node ``i``."""
    graph = ctx.graph
    i = node.node_id
    ups = graph.upstream[i]
    if ctx.mode == 'ff':
        flags = set(traffic_flags) | {i}
        return {j: compute_fair_share(graph.upstream, j, i, ctx.route_count,
                                      flags, ctx.sum_over)
                for j in ups}
    return {j: node.granted_shares.get(j, _default_share(ups)) for j in ups}


def _neighbor_view(node, j, ctx, traffic_flags):
    graph = ctx.graph
    rec = node.neighbor(j)
    ups_j = graph.upstream[j]
    if ctx.mode == 'pf' and rec.upstream is not None:
        ups_j = rec.upstream
    if ctx.mode == 'ff':
        flags = set(traffic_flags) | {j}
        shares = {k: compute_fair_share(graph.upstream, k, j,
                                        ctx.route_count, flags, ctx.sum_over)
                  for k in ups_j}
    else:
        shares = {k: rec.upstream_shares.get(k, _default_share(ups_j))
                  for k in ups_j}
    caps = {t: ctx.capacities.capacity(j, t)
            for t in graph.node_technologies(j)}
    techs = {k: graph.techs_between(j, k) for k in ups_j}
    return NeighborView(j, rec.reported_backlog, rec.report_time,
                        tuple(ups_j), shares, caps, techs)


def _estimate_delta(node, j, now, ctx, traffic_flags):
    """Residual capacity of `j` as seen from `node`, plus an audit record."""
    graph = ctx.graph
    if j == graph.sink or not graph.upstream[j]:
        return math.inf, None
    view = _neighbor_view(node, j, ctx, traffic_flags).validate(now)
    at_report = estimate_neighbor_allocation(
        view, granularity=ctx.granularity)
    elapsed = max(0., now - view.report_time)
    sends = at_report.total * min(1., elapsed / ctx.period_u)
    backlog = update_neighbor_backlog(view.reported_backlog, sends)
    estimate = estimate_neighbor_allocation(
        view, timestamp=now, granularity=ctx.granularity, backlog=backlog)
    delta = compute_delta(j, estimate, view.capacities, view.upstream,
                          view.technologies)
    audit = {
        'node': node.node_id, 'neighbor': j,
        'reported': view.reported_backlog, 'report_time': view.report_time,
        'backlog': backlog,
        'shares': [[k, f] for k, f in sorted(view.fair_shares.items())],
        'caps': [[k, t, view.capacities.get(t, 0.) * view.fair_shares[k]]
                 for (k, t) in estimate.entries],
        'alloc': estimate.to_record(), 'delta': delta}
    return delta, audit


def _current_piggyback(node, ctx, traffic_flags):
    graph = ctx.graph
    i = node.node_id
    backlog = dequantize_backlog(quantize_backlog(node.queue.pending_bits))
    if ctx.mode != 'pf':
        return Piggyback(backlog=backlog)
    flags = set(traffic_flags) | {i}
    granted = []
    for ell in graph.downstream(i):
        share = compute_fair_share(graph.upstream, i, ell, ctx.route_count,
                                   flags, ctx.sum_over)
        granted.append((ell, dequantize_share(quantize_share(share))))
    ups = graph.upstream[i]
    upstream_shares = tuple(
        (k, dequantize_share(quantize_share(
            node.granted_shares.get(k, _default_share(ups)))))
        for k in ups)
    return Piggyback(backlog=backlog, granted=tuple(granted),
                     upstream_shares=upstream_shares, upstream=tuple(ups))


def omr_serve(node, now, ctx, traffic_flags=()):
    """Solve the allocation at `node` and cut the resulting datagrams.

    One datagram is built per ``(neighbor, technology)`` with positive
    allocation, filled head-first from the FIFO up to the smaller of the
    allocation and the technology's maximum payload. Sliced fragments stay
    in flight until acknowledged.

    Parameters
    ----------
    node : NodeState
        Deciding node.

    now : float
        Decision time.

    ctx : ProtocolContext
        Run parameters.

    traffic_flags : Iterable[int], optional
        Nodes currently holding traffic.

    Returns
    -------
    ServeResult
    """
    graph = ctx.graph
    i = node.node_id
    result = ServeResult(backlog=node.queue.pending_bits)
    if not node.queue.pending_bits or not graph.upstream[i]:
        return result
    ups = graph.upstream[i]
    techs = {j: graph.techs_between(i, j) for j in ups}
    shares = _fair_shares_at(node, ctx, traffic_flags)
    deltas = {}
    for j in ups:
        deltas[j], audit = _estimate_delta(node, j, now, ctx, traffic_flags)
        if audit is not None:
            result.estimates.append(audit)
    alloc = solve_allocation(
        i, node.queue.pending_bits, ups, techs, ctx.capacities, shares,
        deltas, timestamp=now, granularity=ctx.granularity)
    result.allocation = alloc
    result.fair_shares = shares
    result.deltas = deltas
    result.caps = {(j, t): ctx.capacities.capacity(i, t) * shares[j]
                   for j, t in alloc.entries}
    # Reported state is the one the allocation was made against.
    piggyback = _current_piggyback(node, ctx, traffic_flags)
    if piggyback == node.last_piggyback:
        piggyback = None
    for j, t, bits in alloc.nonzero():
        budget = min(bits, ctx.max_payload[t])
        entries = node.queue.slice(budget)
        if not entries:
            break
        if piggyback is not None:
            node.last_piggyback = piggyback
            first, retries = entries[0]
            entries[0] = (Fragment(
                first.origin, first.msg_id, first.offset, first.length,
                first.total_length, first.path, piggyback), retries)
        datagram = Datagram(node.new_datagram_id(), i, j, t,
                            tuple(f for f, _ in entries), sent_at=now)
        node.queue.hold(datagram.datagram_id, entries)
        result.datagrams.append(datagram)
    if result.datagrams:
        logger.debug(
            f'Node {i}: allocated {alloc.total:.0f} of '
            f'{result.backlog} bits; sending {len(result.datagrams)} '
            f'datagram(s).')
    return result


def flooding_serve(node, tech, now, ctx):
    """Broadcast the head of `node`'s queue for `tech`.

    Returns
    -------
    ServeResult
        At most one datagram, carrying up to the technology's maximum payload.
    """
    result = ServeResult()
    queue = node.tech_queues.get(tech)
    if queue is None or not queue.pending_bits:
        return result
    result.backlog = queue.pending_bits
    entries = queue.slice(ctx.max_payload[tech])
    datagram = Datagram(node.new_datagram_id(), node.node_id, None, tech,
                        tuple(f for f, _ in entries), sent_at=now)
    result.datagrams.append(datagram)
    return result


def consume_piggyback(node, sender, piggyback, sent_at):
    """Overwrite what `node` knows about `sender` with `piggyback`."""
    if piggyback is None:
        return
    rec = node.neighbor(sender)
    rec.heard = True
    if piggyback.backlog is not None:
        rec.reported_backlog = piggyback.backlog
        rec.report_time = sent_at
    if piggyback.granted is not None:
        for i, share in piggyback.granted:
            if i == node.node_id:
                node.granted_shares[sender] = share
    if piggyback.upstream_shares is not None:
        rec.upstream_shares = dict(piggyback.upstream_shares)
    if piggyback.upstream is not None:
        rec.upstream = tuple(piggyback.upstream)


def on_receive(node, datagram, now, ctx):
    """Accept a successfully decoded data `datagram` at `node`.

    The sink feeds its reassembly buffer. OMR relays queue every fragment at
    the tail. Flooding relays queue a copy per technology unless the
    fragment's path already covers every neighbor. Fragments whose path
    already holds `node` are dropped.

    Returns
    -------
    ReceiveResult
    """
    result = ReceiveResult()
    graph = ctx.graph
    me = node.node_id
    for frag in datagram.fragments:
        if me in frag.path:
            result.dropped.append((frag, 'loop'))
            continue
        if me == graph.sink:
            complete, dup = node.reassembly.add(frag, now)
            result.duplicate_bits += dup
            if complete:
                result.completed.append((frag.origin, frag.msg_id))
            continue
        unit = QueueUnit(frag.origin, frag.msg_id, frag.offset, frag.length,
                         frag.total_length, frag.path + (me,))
        if ctx.protocol == 'flooding':
            if set(frag.path) >= graph.all_neighbors[me]:
                result.dropped.append((frag, 'suppressed'))
                continue
            for q in node.tech_queues.values():
                q.push(QueueUnit(**vars(unit)))
        else:
            node.queue.push(unit)
        result.enqueued.append(frag)
    return result


def on_ack(node, datagram_id):
    """Clear acknowledged datagram.

    Returns
    -------
    list of Fragment or None
        Acknowledged fragments; None if the datagram is unknown.
    """
    entries = node.queue.release(datagram_id)
    if entries is None:
        return None
    return [f for f, _ in entries]


def on_ack_timeout(node, datagram_id, ctx):
    """Re-queue the fragments of an unacknowledged datagram at the tail.

    Returns
    -------
    requeued : list of Fragment

    dropped : list of Fragment
        Fragments that exhausted the retry cap.
    """
    entries = node.queue.release(datagram_id)
    requeued, dropped = [], []
    if entries is None:
        return requeued, dropped
    for frag, retries in entries:
        if ctx.retry_cap is not None and retries >= ctx.retry_cap:
            dropped.append(frag)
            continue
        node.queue.push(QueueUnit(
            frag.origin, frag.msg_id, frag.offset, frag.length,
            frag.total_length, frag.path, retries + 1))
        requeued.append(frag)
    return requeued, dropped
