# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Discrete-event simulation of one run.

The simulation is driven by a :class:`simpy.Environment`. Traffic sources and
the capacity-period clock run as simpy processes; everything else
(transmissions, receptions, acknowledgments) is scheduled as timeouts with a
callback attached. Events sharing a time stamp run in the order they were
scheduled, so a run is a pure function of its inputs.

Every event is appended to a :class:`~omrsim.io.trace.TraceLog`.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import simpy

from .allocator import CapacityTable
from .channel import ChannelModel
from .io.trace import TraceLog
from .logging import SimClockFilter, getLogger
from .mac import MACS, Transmission, make_mac
from .protocol import (PROTOCOLS, Message, NodeState, ProtocolContext,
                       consume_piggyback, flooding_serve, omr_serve, on_ack,
                       on_ack_timeout, on_receive, originate)
from .utils import keyed_uniform

__all__ = ['SimSettings', 'Simulator', 'generate_traffic', 'run_simulation',
           'simulate']


logger = getLogger()

TRAFFIC_STREAM = 2

# Leading key of channel draws.
_DATA_DRAW = 1
_ACK_DRAW = 2


def generate_traffic(node, rate_per_minute, t_net, max_message_bits=64000,
                     seed=0):
    """Draw the messages generated by `node` during ``[0, t_net)``.

    Arrivals form a Poisson process: inter-arrival times are exponential
    with mean ``60 / rate_per_minute`` seconds. Sizes are whole bytes drawn
    uniformly from ``1 .. max_message_bits / 8``.

    Parameters
    ----------
    node : int
        Generating node.

    rate_per_minute : float
        Mean number of messages per minute.

    t_net : float
        Generation horizon in seconds.

    max_message_bits : int, optional
        Largest message size in bits.
        (Default: 64000)

    seed : int, optional
        Run seed. Each node draws from its own stream.
        (Default: 0)

    Returns
    -------
    list of Message
        Messages in arrival order; ``msg_id`` counts from 1.
    """
    if rate_per_minute <= 0:
        raise ValueError(
            f'Message rate must be positive; got {rate_per_minute}.')
    if t_net < 0:
        raise ValueError(f'Horizon must be non-negative; got {t_net}.')
    max_bytes = int(max_message_bits) // 8
    if max_bytes < 1:
        raise ValueError('Maximum message size must be at least one byte.')
    ss = np.random.SeedSequence(
        entropy=int(seed), spawn_key=(TRAFFIC_STREAM, int(node)))
    rng = np.random.default_rng(ss)
    mean_gap = 60. / rate_per_minute
    messages = []
    t = 0.
    while True:
        t += float(rng.exponential(mean_gap))
        if t >= t_net:
            break
        size = 8 * int(rng.integers(1, max_bytes + 1))
        messages.append(Message(node, len(messages) + 1, size, t))
    return messages


@dataclass(frozen=True)
class SimSettings:
    """Parameters of one run.

    Parameters
    ----------
    protocol : str, optional
        Routing policy; one of ``PROTOCOLS``.
        (Default: 'omr-ff')

    mac : str, optional
        Medium model; one of ``MACS``.
        (Default: 'ideal')

    rate_per_minute : float, optional
        Messages per minute per source node.
        (Default: 3.)

    t_net : float, optional
        Traffic generation horizon and metric window in seconds.
        (Default: 600.)

    drain : float, optional
        Extra seconds simulated after `t_net` with generation stopped.
        (Default: 0.)

    capacity_period : float, optional
        Capacity period ``u`` in seconds.
        (Default: 60.)

    max_message_bits : int, optional
        Largest message size in bits.
        (Default: 64000)

    retry_cap : int, optional
        Retransmissions allowed per fragment; None for unlimited.
        (Default: None)

    ack_bits : int, optional
        Size of an acknowledgment frame.
        (Default: 64)

    ack_timeout_factor : float, optional
        Acknowledgment timeout in round trips.
        (Default: 2.)

    fair_share_sum : str, optional
        Fair-share summation set.
        (Default: 'downstream')

    granularity : int, optional
        Allocation quantum in bits.
        (Default: 8)
    """
    protocol: str = 'omr-ff'
    mac: str = 'ideal'
    rate_per_minute: float = 3.
    t_net: float = 600.
    drain: float = 0.
    capacity_period: float = 60.
    max_message_bits: int = 64000
    retry_cap: Optional[int] = None
    ack_bits: int = 64
    ack_timeout_factor: float = 2.
    fair_share_sum: str = 'downstream'
    granularity: int = 8

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(
                f'Unknown protocol "{self.protocol}". Valid protocols: '
                f'{", ".join(PROTOCOLS)}')
        if self.mac not in MACS:
            raise ValueError(
                f'Unknown MAC "{self.mac}". Valid MACs: {", ".join(MACS)}')
        if self.t_net < 0 or self.drain < 0:
            raise ValueError('Run durations must be non-negative.')

    @classmethod
    def from_config(cls, config, protocol, mac):
        return cls(protocol=protocol, mac=mac,
                   rate_per_minute=config.rate_per_minute,
                   t_net=config.t_net, drain=config.drain,
                   capacity_period=config.capacity_period,
                   max_message_bits=config.max_message_bits,
                   retry_cap=config.retry_cap, ack_bits=config.ack_bits,
                   ack_timeout_factor=config.ack_timeout_factor,
                   fair_share_sum=config.fair_share_sum)

    def to_record(self):
        return {'protocol': self.protocol, 'mac': self.mac,
                'rate_per_minute': self.rate_per_minute, 't_net': self.t_net,
                'drain': self.drain, 'u': self.capacity_period,
                'max_message_bits': self.max_message_bits,
                'retry_cap': self.retry_cap, 'ack_bits': self.ack_bits,
                'ack_timeout_factor': self.ack_timeout_factor,
                'fair_share_sum': self.fair_share_sum,
                'granularity': self.granularity}


def _graph_header(graph):
    return {
        'nodes': [{'id': n.id, 'pos': [float(c) for c in n.position],
                   'techs': sorted(n.technologies)} for n in graph.nodes],
        'sink': graph.sink,
        'techs': {t.id: {'bit_rate': t.bit_rate,
                         'max_payload_bits': t.max_payload_bits}
                  for t in sorted(graph.technologies.values(),
                                  key=lambda t: t.id)},
        'links': [[l.a, l.b, l.tech] for l in sorted(graph.links)],
        'upstream': {str(n): list(ups) for n, ups in graph.upstream.items()},
    }


class Simulator:
    """Event loop of one run.

    Parameters
    ----------
    graph : TopologyGraph
        Network.

    settings : SimSettings
        Run parameters.

    seed : int
        Run seed; drives traffic and channel draws.

    header : dict, optional
        Extra fields for the trace header (e.g., configuration hash).
    """
    def __init__(self, graph, settings, seed, header=None):
        self.graph = graph
        self.settings = settings
        self.seed = int(seed)
        self.env = simpy.Environment()
        self.channel = ChannelModel.calibrated(graph.technologies)
        self.mac = make_mac(settings.mac, graph, self.channel)
        self.capacities = CapacityTable.from_graph(
            graph, settings.capacity_period, settings.granularity)
        self.ctx = ProtocolContext(
            graph, settings.protocol, self.capacities,
            {t: tech.max_payload_bits
             for t, tech in graph.technologies.items()},
            sum_over=settings.fair_share_sum, retry_cap=settings.retry_cap,
            granularity=settings.granularity)
        self.nodes = {n: NodeState(n, self.ctx) for n in graph.node_ids}
        self.tech_index = {t: k for k, t in
                           enumerate(sorted(graph.technologies))}
        full_header = {'seed': self.seed, **(header or {}),
                       **settings.to_record(), **_graph_header(graph),
                       'sound_speed': self.channel.sound_speed}
        self.trace = TraceLog(full_header)
        self.next_tx_id = 0
        self.retries = {}
        self.messages = {}

    @property
    def now(self):
        return self.env.now

    @property
    def is_omr(self):
        return self.settings.protocol != 'flooding'

    def _at(self, time, handler, *args):
        """Run ``handler(*args)`` at simulated `time`."""
        event = self.env.timeout(max(0., time - self.env.now))
        event.callbacks.append(lambda _: handler(*args))

    def _log(self, ev, **fields):
        return self.trace.append(ev, self.env.now, **fields)

    def _traffic_flags(self):
        return {n for n, node in self.nodes.items() if node.total_backlog > 0}

    def _traffic(self, messages):
        for msg in messages:
            yield self.env.timeout(max(0., msg.created_at - self.env.now))
            self._on_arrival(msg)

    def _clock(self):
        k = 0
        while True:
            yield self.env.timeout(self.settings.capacity_period)
            k += 1
            self._on_epoch_tick(k)

    def _on_arrival(self, msg):
        self.messages[(msg.origin, msg.msg_id)] = msg
        self._log('msg_arrival', node=msg.origin, msg_id=msg.msg_id,
                  bits=msg.payload_size)
        originate(self.nodes[msg.origin], msg, self.ctx)
        self.try_serve(msg.origin)

    def _on_epoch_tick(self, k):
        self._log('epoch_tick', period=k)
        self.mac.prune(self.env.now)
        for n in self.graph.node_ids:
            self.try_serve(n)

    def try_serve(self, n):
        """Give node `n` the chance to transmit if the medium allows it."""
        if n == self.graph.sink:
            return
        node = self.nodes[n]
        now = self.env.now
        if not self.is_omr:
            ready = [t for t in sorted(node.tech_queues)
                     if node.has_pending(t) and self.mac.can_serve(n, now, t)]
            for t in ready:
                result = flooding_serve(node, t, now, self.ctx)
                for dg in result.datagrams:
                    self._send_data(node, dg)
            return
        if not node.has_pending() or not self.mac.can_serve(n, now):
            return
        result = omr_serve(node, now, self.ctx, self._traffic_flags())
        for audit in result.estimates:
            self._log('estimate', **audit)
        if result.allocation is not None:
            self._log(
                'alloc', node=n, backlog=result.backlog,
                shares=[[j, f] for j, f in sorted(result.fair_shares.items())],
                deltas=[[j, d] for j, d in sorted(result.deltas.items())],
                caps=[[j, t, c] for (j, t), c in result.caps.items()],
                alloc=result.allocation.to_record())
        for dg in result.datagrams:
            self._send_data(node, dg)

    def _transmit(self, sender, receiver, tech, kind, bits, payload):
        rate = self.graph.technologies[tech].bit_rate
        start = self.mac.next_start(sender, tech, self.env.now)
        self.next_tx_id += 1
        tx = Transmission(self.next_tx_id, sender, receiver, tech, kind, bits,
                          start, start + bits / rate, payload)
        self.mac.register(tx)
        self._at(start, self._on_tx_start, tx)
        return tx

    def _send_data(self, node, datagram):
        entries = node.queue.in_flight.get(datagram.datagram_id)
        tx = self._transmit(node.node_id, datagram.receiver, datagram.tech,
                            'data', datagram.bits, datagram)
        self.retries[tx.tx_id] = entries[0][1] if entries else 0

    def _on_tx_start(self, tx):
        fields = {'tx': tx.tx_id, 'node': tx.sender, 'to': tx.receiver,
                  'tech': tx.tech, 'kind': tx.kind, 'bits': tx.bits,
                  'end': tx.end}
        if tx.kind == 'data':
            dg = tx.payload
            pb = dg.piggyback
            fields.update(
                dg=dg.datagram_id,
                frags=[f.to_record() for f in dg.fragments],
                pb=None if pb is None else pb.to_record(),
                backlog=self.nodes[tx.sender].total_backlog)
        else:
            fields['dg'] = tx.payload
        self._log('tx_start', **fields)
        self._at(tx.end, self._on_tx_end, tx)

    def _ack_airtime(self, tech):
        return self.settings.ack_bits / self.graph.technologies[tech].bit_rate

    def _on_tx_end(self, tx):
        self._log('tx_end', tx=tx.tx_id, node=tx.sender, tech=tx.tech,
                  kind=tx.kind)
        for r, t_arr, addressed in self.mac.deliveries(tx):
            self._at(t_arr, self._on_rx, tx, r, addressed)
        if tx.kind == 'data' and self.is_omr:
            dg = tx.payload
            round_trip = (self.mac.delay(tx.sender, tx.receiver) +
                          self._ack_airtime(tx.tech))
            timeout = tx.end + self.settings.ack_timeout_factor * round_trip
            self._at(timeout, self._on_ack_timeout, tx.sender,
                     dg.datagram_id)
        self.try_serve(tx.sender)

    def _draw_key(self, tx, receiver):
        tech = self.tech_index[tx.tech]
        if tx.kind == 'ack':
            return (_ACK_DRAW, tx.sender, receiver, tech, tx.payload)
        first = tx.payload.fragments[0]
        retries = self.retries.get(tx.tx_id, 0)
        return (_DATA_DRAW, tx.sender, receiver, tech, first.origin,
                first.msg_id, first.offset, first.length, retries,
                len(first.path))

    def _outcome(self, tx, r):
        if self.mac.collided(tx, r):
            return 'collided'
        per = self.channel.per_of_link(
            self.graph.distance(tx.sender, r), tx.tech, tx.bits)
        if keyed_uniform(self.seed, *self._draw_key(tx, r)) < per:
            return 'per_loss'
        return 'delivered'

    def _on_rx(self, tx, r, addressed):
        outcome = self._outcome(tx, r)
        fields = {'tx': tx.tx_id, 'node': r, 'from': tx.sender,
                  'tech': tx.tech, 'kind': tx.kind, 'outcome': outcome,
                  'addressed': addressed, 'bits': tx.bits}
        if tx.kind == 'data':
            fields['payload'] = tx.payload.payload_bits
            if outcome == 'delivered' and addressed:
                fields['frags'] = [f.to_record()
                                   for f in tx.payload.fragments]
        self._log('rx_deliver', **fields)
        if outcome == 'delivered':
            if tx.kind == 'data':
                self._accept_data(tx, r, addressed)
            elif addressed:
                self._on_ack(r, tx.sender, tx.payload)
        self.try_serve(r)

    def _accept_data(self, tx, r, addressed):
        node = self.nodes[r]
        dg = tx.payload
        consume_piggyback(node, tx.sender, dg.piggyback, dg.sent_at)
        if not addressed:
            return
        result = on_receive(node, dg, self.env.now, self.ctx)
        for frag, reason in result.dropped:
            self._log('drop', node=r, frag=frag.to_record(), reason=reason)
        for origin, msg_id in result.completed:
            msg = self.messages.get((origin, msg_id))
            bits = msg.payload_size if msg is not None else None
            self._log('complete', origin=origin, msg_id=msg_id, bits=bits)
        if self.is_omr:
            self._send_ack(r, tx)

    def _send_ack(self, r, tx):
        dg_id = tx.payload.datagram_id
        if self.mac.ideal_acks:
            t = (self.env.now + self.mac.delay(r, tx.sender) +
                 self._ack_airtime(tx.tech))
            self._at(t, self._on_ack, tx.sender, r, dg_id)
        else:
            self._transmit(r, tx.sender, tx.tech, 'ack',
                           self.settings.ack_bits, dg_id)

    def _on_ack(self, n, sender, datagram_id):
        frags = on_ack(self.nodes[n], datagram_id)
        if frags is None:
            self._log('ack_unknown', node=n, **{'from': sender},
                      dg=datagram_id)
        else:
            self._log('ack_deliver', node=n, **{'from': sender},
                      dg=datagram_id, bits=sum(f.length for f in frags))
        self.try_serve(n)

    def _on_ack_timeout(self, n, datagram_id):
        node = self.nodes[n]
        if datagram_id not in node.queue.in_flight:
            return
        requeued, dropped = on_ack_timeout(node, datagram_id, self.ctx)
        self._log('ack_timeout', node=n, dg=datagram_id,
                  requeued=[f.to_record() for f in requeued])
        for frag in requeued:
            self._log('enqueue', node=n, frag=frag.to_record(),
                      reason='retransmit')
        for frag in dropped:
            self._log('drop', node=n, frag=frag.to_record(),
                      reason='retry_cap')
        self.try_serve(n)

    def run(self):
        """Execute the run and return its :class:`TraceLog`."""
        s = self.settings
        for n in self.graph.sources:
            messages = generate_traffic(n, s.rate_per_minute, s.t_net,
                                        s.max_message_bits, self.seed)
            self.env.process(self._traffic(messages))
        self.env.process(self._clock())
        clock_filter = SimClockFilter(lambda: self.env.now)
        logger.addFilter(clock_filter)
        try:
            # simpy rejects a zero horizon.
            if s.t_net + s.drain > 0:
                self.env.run(until=s.t_net + s.drain)
        finally:
            logger.removeFilter(clock_filter)
        logger.debug(
            f'Run finished: {len(self.trace)} events, '
            f'{len(self.messages)} messages generated.')
        return self.trace


def simulate(graph, settings, seed, header=None):
    """Run one simulation of `graph` and return its trace."""
    return Simulator(graph, settings, seed, header).run()


def run_simulation(config, seed, protocol=None, mac=None):
    """Run one cell of `config`.

    Parameters
    ----------
    config : RunConfig
        Validated configuration.

    seed : int
        Run seed.

    protocol : str, optional
        Routing policy; defaults to the first configured one.

    mac : str, optional
        Medium model; defaults to the first configured one.

    Returns
    -------
    TraceLog
        Pure function of ``(config, seed, protocol, mac)``.
    """
    protocol = config.protocols[0] if protocol is None else protocol
    mac = config.macs[0] if mac is None else mac
    graph = config.resolve_topology(seed)
    settings = SimSettings.from_config(config, protocol, mac)
    header = {'config_hash': config.config_hash,
              'config': config.to_document(include_unhashed=False)}
    return simulate(graph, settings, seed, header)
