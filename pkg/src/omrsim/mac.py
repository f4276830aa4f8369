# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Medium access models.

Two models are provided:

- :class:`IdealMac`: transmissions never interact; only channel errors lose
  data, and acknowledgments always arrive;
- :class:`ImmediateMac`: a node transmits as soon as it is neither
  transmitting nor receiving on any technology; any time overlap of two
  signals on one technology at a receiver destroys both receptions, the
  receiver's own transmissions included.
"""
from dataclasses import dataclass
from typing import Optional

from .interval import Interval

__all__ = ['MACS', 'IdealMac', 'ImmediateMac', 'MacModel', 'Transmission',
           'make_mac']


MACS = ('ideal', 'immediate')


@dataclass(frozen=True)
class Transmission:
    """Signal put on the medium.

    Parameters
    ----------
    tx_id : int
        Run-unique identifier.

    sender : int
        Transmitting node.

    receiver : int, optional
        Addressed node; None for broadcasts.

    tech : str
        Technology.

    kind : str
        ``'data'`` or ``'ack'``.

    bits : int
        Size on the wire.

    start, end : float
        Transmission interval at the sender.

    payload : object, optional
        The :class:`~omrsim.protocol.Datagram` for data, or the acknowledged
        datagram id for acks.
    """
    tx_id: int
    sender: int
    receiver: Optional[int]
    tech: str
    kind: str
    bits: int
    start: float
    end: float
    payload: object = None

    @property
    def duration(self):
        return self.end - self.start


class MacModel:
    """Bookkeeping shared by the medium models.

    Tracks, per ``(node, technology)``, when the node's transmitter is free
    again, and which nodes hear which transmitters.

    Parameters
    ----------
    graph : TopologyGraph
        Network.

    channel : ChannelModel
        Provides sound speed.
    """
    name = None
    ideal_acks = False

    def __init__(self, graph, channel):
        self.graph = graph
        self.channel = channel
        self.busy_until = {}
        self.hearers = {}
        self.node_techs = {}
        for node in graph.nodes:
            self.node_techs[node.id] = tuple(sorted(node.technologies))
            for t in node.technologies:
                self.hearers[(node.id, t)] = frozenset(
                    graph.neighbors_on(node.id, t))
        self.delays = {}
        for link in graph.links:
            d = channel.propagation_delay(graph.distance(link.a, link.b))
            self.delays[(link.a, link.b)] = self.delays[(link.b, link.a)] = d
        self.max_delay = max(self.delays.values(), default=0.)

    def delay(self, a, b):
        if a == b:
            return 0.
        return self.delays[(a, b)]

    def next_start(self, node, tech, now):
        """Earliest time `node` can start transmitting on `tech`."""
        return max(now, self.busy_until.get((node, tech), now))

    def is_transmitting(self, node, now, tech=None):
        techs = self.node_techs[node] if tech is None else (tech,)
        return any(self.busy_until.get((node, t), now) > now for t in techs)

    def register(self, tx):
        """Commit `tx` to the medium."""
        self.busy_until[(tx.sender, tx.tech)] = max(
            tx.end, self.busy_until.get((tx.sender, tx.tech), tx.end))

    def deliveries(self, tx):
        """Return reception events of committed `tx`.

        Returns
        -------
        list of tuple
            ``(receiver, time, addressed)`` for every node that hears the
            sender on the technology, in ascending receiver order. `time` is
            the end of the signal at the receiver.
        """
        out = []
        for r in sorted(self.hearers[(tx.sender, tx.tech)]):
            addressed = tx.receiver is None or tx.receiver == r
            out.append((r, tx.end + self.delay(tx.sender, r), addressed))
        return out

    def can_serve(self, node, now, tech=None):
        """True if `node` may start a new serve round (on `tech` only, if
        given)."""
        raise NotImplementedError

    def collided(self, tx, receiver):
        """True if another signal overlapped `tx` at `receiver`."""
        raise NotImplementedError

    def prune(self, now):
        pass


class IdealMac(MacModel):
    """Collision-free medium.

    OMR nodes serve when every transmitter is idle; a per-technology
    server (flooding) only waits for its own technology.
    """
    name = 'ideal'
    ideal_acks = True

    def can_serve(self, node, now, tech=None):
        return not self.is_transmitting(node, now, tech)

    def collided(self, tx, receiver):
        return False


class ImmediateMac(MacModel):
    """Transmit-immediately medium with destructive same-technology
    overlaps."""
    name = 'immediate'

    def __init__(self, graph, channel):
        super().__init__(graph, channel)
        self.active = {t: [] for t in graph.technologies}
        self.max_duration = 0.

    def register(self, tx):
        super().register(tx)
        self.active[tx.tech].append(tx)
        self.max_duration = max(self.max_duration, tx.duration)

    def hears(self, node, tx):
        return tx.sender == node or node in self.hearers[(tx.sender, tx.tech)]

    def arrival(self, tx, node):
        """Interval during which `tx` occupies the medium at `node`."""
        d = self.delay(tx.sender, node)
        return Interval(tx.start + d, tx.end + d)

    def is_receiving(self, node, now):
        for t in self.node_techs[node]:
            for tx in self.active[t]:
                if tx.sender == node or not self.hears(node, tx):
                    continue
                if self.arrival(tx, node).contains(now):
                    return True
        return False

    def can_serve(self, node, now, tech=None):
        # Node-wide deferral regardless of `tech`.
        return not (self.is_transmitting(node, now) or
                    self.is_receiving(node, now))

    def collided(self, tx, receiver):
        span = self.arrival(tx, receiver)
        for other in self.active[tx.tech]:
            if other.tx_id == tx.tx_id or not self.hears(receiver, other):
                continue
            if span.overlaps(self.arrival(other, receiver)):
                return True
        return False

    def prune(self, now):
        horizon = now - self.max_duration - self.max_delay
        for t, txs in self.active.items():
            self.active[t] = [tx for tx in txs if tx.end >= horizon]


def make_mac(name, graph, channel):
    """Return MAC model `name` for `graph`."""
    if name == 'ideal':
        return IdealMac(graph, channel)
    if name == 'immediate':
        return ImmediateMac(graph, channel)
    raise ValueError(
        f'Unknown MAC "{name}". Valid MACs: {", ".join(MACS)}')
