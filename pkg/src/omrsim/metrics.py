# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Performance metrics computed from simulation traces.

All rates are in bytes per second and divide by the traffic horizon
``t_net`` recorded in the trace header, even when the run was extended by a
drain window. Averages over source nodes use every node but the sink.

========================  =================================================
metric                    meaning
========================  =================================================
``rho_d``                 mean end-to-end delay of delivered messages (s)
``rho_g``                 per-node goodput, duplicate copies included
``rho_g_unique``          per-node goodput, distinct bytes only
``rho_s``                 message success rate
``rho_o``                 messages with redundant sink copies per node
``rho_o_fraction``        fraction of messages with redundant sink copies
``rho_e``                 bytes transmitted per message per second
``rho_u_<tech>``          mean link throughput on one technology
``control_overhead_bits`` control bits per decision round (OMR only)
========================  =================================================
"""
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd

from .allocator import control_overhead_bits
from .interval import Interval, total_length

__all__ = ['DISTRIBUTIONS', 'MetricsReport', 'TraceSummary', 'ccdf_table',
           'cdf_table', 'compute_delay', 'compute_goodput', 'compute_metrics',
           'compute_link_throughput', 'compute_overhead',
           'compute_success_rate', 'compute_total_tx', 'emit_distributions',
           'summarize_trace']


# Distribution kind per metric; link throughputs use the ``rho_u`` entry.
DISTRIBUTIONS = {'rho_d': 'cdf', 'rho_g': 'ccdf', 'rho_u': 'ccdf'}


@dataclass
class TraceSummary:
    """Per-message and per-link tallies extracted from one trace.

    Parameters
    ----------
    sources : tuple of int
        Non-sink nodes.

    t_net : float
        Metric horizon in seconds.

    messages : pandas.DataFrame
        One row per generated message with columns ``origin``, ``msg_id``,
        ``bits``, ``created``, ``completed`` (NaN if never completed),
        ``received_bits`` (every bit received at the sink, duplicates
        included), ``unique_bits`` and ``tx_bits`` (bits transmitted by any
        node for the message, headers included).

    links : pandas.DataFrame
        One row per directed ``(sender, receiver, tech)`` link with column
        ``bits``: payload bits successfully received over the link.

    neighbors : dict
        Mapping from technology to ``{node: neighbors on that technology}``
        for every non-sink node holding it.
    """
    sources: tuple
    t_net: float
    messages: pd.DataFrame
    links: pd.DataFrame
    neighbors: Dict[str, Dict[int, tuple]]
    protocol: Optional[str] = None
    n_nodes: int = 0


def _neighbor_map(header):
    sink = header['sink']
    out = defaultdict(lambda: defaultdict(set))
    for node in header['nodes']:
        for tech in node.get('techs', ()):
            out[tech].setdefault(node['id'], set())
    for a, b, tech in header.get('links', ()):
        out[tech][a].add(b)
        out[tech][b].add(a)
    return {tech: {n: tuple(sorted(nbrs)) for n, nbrs in sorted(by.items())
                   if n != sink}
            for tech, by in sorted(out.items())}


def summarize_trace(trace):
    """Tally the quantities every metric is computed from.

    Parameters
    ----------
    trace : TraceLog
        Trace of one run.

    Returns
    -------
    TraceSummary
    """
    header = trace.header
    sink = header['sink']
    sources = tuple(n['id'] for n in header['nodes'] if n['id'] != sink)
    rows = {}
    received = defaultdict(int)
    covered = defaultdict(list)
    tx_bits = defaultdict(int)
    completed = {}
    link_bits = defaultdict(int)
    for rec in trace:
        ev = rec['ev']
        if ev == 'msg_arrival':
            rows[(rec['node'], rec['msg_id'])] = (rec['bits'], rec['t'])
        elif ev == 'complete':
            key = (rec['origin'], rec['msg_id'])
            completed.setdefault(key, rec['t'])
        elif ev == 'tx_start' and rec['kind'] == 'data':
            for origin, msg_id, _, length, _, _, hdr in rec['frags']:
                tx_bits[(origin, msg_id)] += length + hdr
        elif (ev == 'rx_deliver' and rec['kind'] == 'data' and
              rec['outcome'] == 'delivered' and rec['addressed']):
            link_bits[(rec['from'], rec['node'], rec['tech'])] += \
                rec['payload']
            if rec['node'] != sink:
                continue
            for origin, msg_id, offset, length, _, _, _ in rec['frags']:
                received[(origin, msg_id)] += length
                covered[(origin, msg_id)].append(
                    Interval(offset, offset + length))
    records = []
    for (origin, msg_id), (bits, created) in sorted(rows.items()):
        key = (origin, msg_id)
        records.append({
            'origin': origin, 'msg_id': msg_id, 'bits': bits,
            'created': created, 'completed': completed.get(key, np.nan),
            'received_bits': received.get(key, 0),
            'unique_bits': total_length(covered.get(key, [])),
            'tx_bits': tx_bits.get(key, 0)})
    messages = pd.DataFrame.from_records(
        records, columns=['origin', 'msg_id', 'bits', 'created', 'completed',
                          'received_bits', 'unique_bits', 'tx_bits'])
    links = pd.DataFrame.from_records(
        [{'sender': s, 'receiver': r, 'tech': t, 'bits': b}
         for (s, r, t), b in sorted(link_bits.items())],
        columns=['sender', 'receiver', 'tech', 'bits'])
    return TraceSummary(
        sources=sources, t_net=float(header['t_net']), messages=messages,
        links=links, neighbors=_neighbor_map(header),
        protocol=header.get('protocol'), n_nodes=len(header['nodes']))


def _summary(trace_or_summary):
    if isinstance(trace_or_summary, TraceSummary):
        return trace_or_summary
    return summarize_trace(trace_or_summary)


def _t_net(summary, t_net):
    t_net = summary.t_net if t_net is None else t_net
    if not t_net > 0:
        raise ValueError(f'Horizon must be positive; got {t_net}.')
    return t_net


def _per_source(summary):
    """Yield ``(node, messages of node)`` for every source."""
    msgs = summary.messages
    for n in summary.sources:
        yield n, msgs[msgs.origin == n]


def compute_delay(trace):
    """Mean end-to-end delay.

    Delays of completed messages are averaged per source, then over the
    sources that completed at least one message.

    Returns
    -------
    rho_d : float or None
        None if no message was delivered.

    delays : pandas.DataFrame
        ``origin``, ``msg_id``, ``delay`` of each completed message.
    """
    summary = _summary(trace)
    msgs = summary.messages
    done = msgs[msgs.completed.notna()]
    delays = pd.DataFrame({'origin': done.origin, 'msg_id': done.msg_id,
                           'delay': done.completed - done.created})
    per_node = [float(d.delay.mean())
                for _, d in delays.groupby('origin', sort=True)]
    rho_d = float(np.mean(per_node)) if per_node else None
    return rho_d, delays.reset_index(drop=True)


def compute_goodput(trace, t_net=None, unique=False):
    """Per-node goodput.

    Every byte of a message received at the sink counts, duplicates
    included, unless `unique` is True.
    """
    summary = _summary(trace)
    t_net = _t_net(summary, t_net)
    if not summary.sources:
        return 0.
    column = 'unique_bits' if unique else 'received_bits'
    total = summary.messages[column].sum() / 8.
    return float(total / t_net / len(summary.sources))


def compute_success_rate(trace):
    """Fraction of generated messages delivered, averaged over sources.

    Sources that generated nothing are excluded. Returns None if no source
    generated a message.
    """
    summary = _summary(trace)
    rates = []
    for _, msgs in _per_source(summary):
        if len(msgs):
            rates.append(msgs.completed.notna().sum() / len(msgs))
    return float(np.mean(rates)) if rates else None


def compute_overhead(trace):
    """Messages that reached the sink more than once.

    Returns
    -------
    rho_o : float
        Messages with more sink-received bits than their size, summed per
        source and divided by the number of sources.

    rho_o_fraction : float or None
        Per-source fraction of such messages, averaged over sources that
        generated at least one message.
    """
    summary = _summary(trace)
    if not summary.sources:
        return 0., None
    counts, fractions = [], []
    for _, msgs in _per_source(summary):
        msgs = msgs[msgs.bits > 0]
        excess = int((msgs.received_bits > msgs.bits).sum())
        counts.append(excess)
        if len(msgs):
            fractions.append(excess / len(msgs))
    rho_o = float(sum(counts)) / len(summary.sources)
    return rho_o, (float(np.mean(fractions)) if fractions else None)


def compute_total_tx(trace, t_net=None):
    """Bytes transmitted network-wide per message, per second.

    Every transmitted fragment counts with its header, retransmissions and
    copies included. Acknowledgments are not attributed to messages.
    """
    summary = _summary(trace)
    t_net = _t_net(summary, t_net)
    n_msgs = len(summary.messages)
    if not summary.sources or not n_msgs:
        return 0.
    total = summary.messages.tx_bits.sum() / 8.
    return float(total / t_net / (len(summary.sources) * n_msgs))


def compute_link_throughput(trace, tech, t_net=None):
    """Mean throughput of the links on technology `tech`.

    Bytes successfully received over each link count whether or not they
    eventually reach the sink. Links are averaged per sending node, then over
    the non-sink nodes holding `tech`. The sink sends no data and is left
    out. A holder without links on `tech` contributes 0.

    Returns
    -------
    float or None
        None if no non-sink node holds `tech`.
    """
    summary = _summary(trace)
    t_net = _t_net(summary, t_net)
    nbrs = summary.neighbors.get(tech, {})
    if not nbrs:
        return None
    links = summary.links[summary.links.tech == tech]
    by_link = {(s, r): b for s, r, b in
               zip(links.sender, links.receiver, links.bits)}
    per_node = []
    for n, ms in nbrs.items():
        rates = [by_link.get((n, m), 0) / 8. / t_net for m in ms]
        per_node.append(np.mean(rates) if rates else 0.)
    return float(np.mean(per_node))


@dataclass
class MetricsReport:
    """Scalar metrics of one run plus the tables backing them."""
    rho_d: Optional[float]
    rho_g: float
    rho_g_unique: float
    rho_s: Optional[float]
    rho_o: float
    rho_o_fraction: Optional[float]
    rho_e: float
    rho_u: Dict[str, Optional[float]] = field(default_factory=dict)
    control_overhead_bits: Optional[float] = None
    delays: Optional[pd.DataFrame] = None
    messages: Optional[pd.DataFrame] = None
    links: Optional[pd.DataFrame] = None

    def scalars(self):
        """Return ``{metric: value}``, technologies expanded as
        ``rho_u_<tech>``. Undefined metrics are None."""
        out = {'rho_d': self.rho_d, 'rho_g': self.rho_g,
               'rho_g_unique': self.rho_g_unique, 'rho_s': self.rho_s,
               'rho_o': self.rho_o, 'rho_o_fraction': self.rho_o_fraction,
               'rho_e': self.rho_e}
        for tech, value in sorted(self.rho_u.items()):
            out[f'rho_u_{tech}'] = value
        out['control_overhead_bits'] = self.control_overhead_bits
        return out


def compute_metrics(trace, t_net=None):
    """Compute every metric of `trace`.

    Returns
    -------
    MetricsReport
    """
    summary = summarize_trace(trace)
    rho_d, delays = compute_delay(summary)
    rho_o, rho_o_fraction = compute_overhead(summary)
    mode = {'omr-ff': 'ff', 'omr-pf': 'pf'}.get(summary.protocol)
    overhead = None
    if mode is not None and summary.n_nodes >= 2:
        overhead = control_overhead_bits(mode, summary.n_nodes)
    techs = sorted(trace.header.get('techs', {}))
    return MetricsReport(
        rho_d=rho_d,
        rho_g=compute_goodput(summary, t_net),
        rho_g_unique=compute_goodput(summary, t_net, unique=True),
        rho_s=compute_success_rate(summary),
        rho_o=rho_o, rho_o_fraction=rho_o_fraction,
        rho_e=compute_total_tx(summary, t_net),
        rho_u={t: compute_link_throughput(summary, t, t_net) for t in techs},
        control_overhead_bits=overhead, delays=delays,
        messages=summary.messages, links=summary.links)


def _clean_samples(samples):
    x = np.asarray([s for s in samples if s is not None], dtype=np.float64)
    return np.sort(x[np.isfinite(x)])


def cdf_table(samples):
    """Empirical CDF ``P(X <= v)`` at each distinct sample value."""
    x = _clean_samples(samples)
    values, counts = np.unique(x, return_counts=True)
    prob = np.cumsum(counts) / max(len(x), 1)
    return pd.DataFrame({'value': values, 'probability': prob})


def ccdf_table(samples):
    """Empirical complementary CDF ``P(X > v)`` at each distinct sample
    value."""
    cdf = cdf_table(samples)
    return pd.DataFrame({'value': cdf.value,
                         'probability': 1. - cdf.probability})


def emit_distributions(samples):
    """Build distribution tables from per-run metric samples.

    Parameters
    ----------
    samples : Mapping[str, Sequence[float]]
        Metric name to per-run values. Undefined values (None) are skipped.

    Returns
    -------
    dict
        Mapping from metric name to a two-column table (``value``,
        ``probability``): a CDF for delays, a complementary CDF for rates.
        Metrics without any defined sample are left out.
    """
    tables = {}
    for name, values in samples.items():
        kind = DISTRIBUTIONS.get(
            'rho_u' if name.startswith('rho_u_') else name, 'ccdf')
        if not len(_clean_samples(values)):
            continue
        tables[name] = cdf_table(values) if kind == 'cdf' else \
            ccdf_table(values)
    return tables
