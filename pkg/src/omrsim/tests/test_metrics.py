# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Tests for the trace metrics."""
import math

import pytest

from omrsim.io.trace import TraceLog, load_trace, write_trace
from omrsim.metrics import (ccdf_table, cdf_table, compute_delay,
                            compute_goodput, compute_link_throughput,
                            compute_metrics, compute_overhead,
                            compute_success_rate, compute_total_tx,
                            emit_distributions, summarize_trace)


SINK = 9


def _trace(sources, t_net=600., links=(), protocol=None):
    header = {'sink': SINK, 't_net': t_net,
              'nodes': [{'id': n} for n in (*sources, SINK)],
              'links': [list(link) for link in links],
              'techs': {t: {} for t in sorted({t for *_, t in links})}}
    if protocol is not None:
        header['protocol'] = protocol
    return TraceLog(header)


def _arrive(trace, node, msg_id, nbytes, t=0.):
    trace.append('msg_arrival', t, node=node, msg_id=msg_id, bits=8 * nbytes)


def _frag(origin, msg_id, offset, nbytes, hdr=0):
    return [origin, msg_id, 8 * offset, 8 * nbytes, 0, [origin], hdr]


def _send(trace, sender, frags, t=0.):
    trace.append('tx_start', t, node=sender, kind='data', frags=frags)


def _receive(trace, sender, receiver, frags, tech='LF', t=0.,
             outcome='delivered'):
    trace.append('rx_deliver', t, node=receiver, kind='data', tech=tech,
                 outcome=outcome, addressed=True, frags=frags,
                 payload=sum(f[3] for f in frags), **{'from': sender})


def _deliver(trace, origin, msg_id, nbytes, t=0.):
    _receive(trace, origin, SINK, [_frag(origin, msg_id, 0, nbytes)], t=t)


def _complete(trace, origin, msg_id, t):
    trace.append('complete', t, origin=origin, msg_id=msg_id)


class TestDelay:
    def test_single(self):
        trace = _trace([1])
        _arrive(trace, 1, 1, 100, t=10.)
        _complete(trace, 1, 1, 25.)
        rho_d, delays = compute_delay(trace)
        assert rho_d == 15.
        assert delays.delay.tolist() == [15.]

    def test_outer_mean(self):
        trace = _trace([1, 2])
        _arrive(trace, 1, 1, 100, t=0.)
        _arrive(trace, 2, 1, 100, t=0.)
        _arrive(trace, 2, 2, 100, t=10.)
        _complete(trace, 1, 1, 10.)
        _complete(trace, 2, 1, 15.)
        _complete(trace, 2, 2, 35.)
        rho_d, _ = compute_delay(trace)
        assert rho_d == 15.

    def test_no_deliveries_excluded(self):
        trace = _trace([1, 2])
        _arrive(trace, 1, 1, 100, t=0.)
        _arrive(trace, 2, 1, 100, t=3.)
        _complete(trace, 2, 1, 15.)
        rho_d, _ = compute_delay(trace)
        assert rho_d == 12.

    def test_nothing_delivered(self):
        trace = _trace([1])
        _arrive(trace, 1, 1, 100)
        rho_d, delays = compute_delay(trace)
        assert rho_d is None
        assert delays.empty


class TestGoodput:
    def test_single(self):
        trace = _trace([1])
        _arrive(trace, 1, 1, 6000)
        _deliver(trace, 1, 1, 6000)
        assert compute_goodput(trace) == pytest.approx(10.)
        assert compute_goodput(trace, unique=True) == pytest.approx(10.)

    def test_duplicates_counted(self):
        trace = _trace([1])
        _arrive(trace, 1, 1, 6000)
        _deliver(trace, 1, 1, 6000)
        _deliver(trace, 1, 1, 6000)
        assert compute_goodput(trace) == pytest.approx(20.)
        assert compute_goodput(trace, unique=True) == pytest.approx(10.)

    def test_nothing_delivered(self):
        trace = _trace([1, 2])
        _arrive(trace, 1, 1, 6000)
        assert compute_goodput(trace) == 0.

    def test_relay_not_counted(self):
        # Bytes received by a relay are not goodput.
        trace = _trace([1, 2])
        _arrive(trace, 1, 1, 6000)
        _receive(trace, 1, 2, [_frag(1, 1, 0, 6000)])
        assert compute_goodput(trace) == 0.

    def test_invalid_horizon(self):
        trace = _trace([1])
        with pytest.raises(ValueError) as excinfo:
            compute_goodput(trace, t_net=0.)
        assert 'Horizon' in str(excinfo.value)


class TestSuccessRate:
    def test_all_delivered(self):
        trace = _trace([1])
        _arrive(trace, 1, 1, 10)
        _complete(trace, 1, 1, 5.)
        assert compute_success_rate(trace) == 1.

    def test_per_node_mean(self):
        trace = _trace([1, 2])
        for i in range(1, 5):
            _arrive(trace, 1, i, 10)
        for i in range(1, 3):
            _arrive(trace, 2, i, 10)
        for i in range(1, 4):
            _complete(trace, 1, i, 5.)
        _complete(trace, 2, 1, 5.)
        assert compute_success_rate(trace) == pytest.approx(.625)

    def test_none_delivered(self):
        trace = _trace([1])
        _arrive(trace, 1, 1, 10)
        assert compute_success_rate(trace) == 0.

    def test_idle_source_excluded(self):
        trace = _trace([1, 2])
        _arrive(trace, 1, 1, 10)
        _complete(trace, 1, 1, 5.)
        assert compute_success_rate(trace) == 1.
        assert compute_success_rate(_trace([1])) is None


class TestOverhead:
    def test_no_duplicates(self):
        trace = _trace([1])
        _arrive(trace, 1, 1, 100)
        _deliver(trace, 1, 1, 100)
        assert compute_overhead(trace) == (0., 0.)

    def test_duplicated_messages(self):
        trace = _trace([1, 2])
        for i in (1, 2):
            _arrive(trace, 1, i, 100)
            _deliver(trace, 1, i, 100)
            _deliver(trace, 1, i, 100)
        _arrive(trace, 2, 1, 100)
        _deliver(trace, 2, 1, 100)
        rho_o, fraction = compute_overhead(trace)
        assert rho_o == 1.
        assert fraction == pytest.approx(.5)

    def test_partial_duplicate(self):
        # A doubled interval that leaves the message short is no excess.
        trace = _trace([1])
        _arrive(trace, 1, 1, 1000)
        _receive(trace, 1, SINK, [_frag(1, 1, 0, 250)])
        _receive(trace, 1, SINK, [_frag(1, 1, 0, 250)])
        assert compute_overhead(trace) == (0., 0.)
        msgs = summarize_trace(trace).messages
        assert msgs.received_bits.tolist() == [4000]
        assert msgs.unique_bits.tolist() == [2000]


class TestTotalTx:
    def test_single_hop(self):
        trace = _trace([1])
        _arrive(trace, 1, 1, 1000)
        _send(trace, 1, [_frag(1, 1, 0, 1000, hdr=200)])
        assert compute_total_tx(trace) == pytest.approx(1025 / 600)

    def test_retransmission(self):
        trace = _trace([1])
        _arrive(trace, 1, 1, 1000)
        _send(trace, 1, [_frag(1, 1, 0, 1000, hdr=200)])
        _send(trace, 1, [_frag(1, 1, 0, 1000, hdr=200)], t=5.)
        assert compute_total_tx(trace) == pytest.approx(2 * 1025 / 600)

    def test_no_traffic(self):
        assert compute_total_tx(_trace([1, 2])) == 0.


class TestLinkThroughput:
    def test_single_link(self):
        trace = _trace([1], links=[(1, SINK, 'LF')])
        _receive(trace, 1, SINK, [_frag(1, 1, 0, 6000)])
        # The sink is not averaged in.
        assert compute_link_throughput(trace, 'LF') == pytest.approx(10.)

    def test_per_node_mean(self):
        links = [(1, SINK, 'LF'), (1, 2, 'LF')]
        trace = _trace([1, 2], links=links)
        _receive(trace, 1, SINK, [_frag(1, 1, 0, 6000)])
        _receive(trace, 2, 1, [_frag(2, 1, 0, 3000)])
        # Node 1: (10 + 0) / 2, node 2: 5.
        assert compute_link_throughput(trace, 'LF') == pytest.approx(5.)

    def test_idle_holder(self):
        trace = _trace([1, 2], links=[(1, SINK, 'LF')])
        trace.header['nodes'][1]['techs'] = ['LF']
        _receive(trace, 1, SINK, [_frag(1, 1, 0, 6000)])
        # Node 2 holds LF but has no link on it.
        assert compute_link_throughput(trace, 'LF') == pytest.approx(5.)

    def test_failures_excluded(self):
        trace = _trace([1], links=[(1, SINK, 'LF')])
        _receive(trace, 1, SINK, [_frag(1, 1, 0, 6000)], outcome='collision')
        _receive(trace, 1, SINK, [_frag(1, 2, 0, 6000)], outcome='error')
        assert compute_link_throughput(trace, 'LF') == 0.

    def test_absent_technology(self):
        trace = _trace([1], links=[(1, SINK, 'LF')])
        assert compute_link_throughput(trace, 'MF') is None


class TestComputeMetrics:
    @pytest.fixture
    def trace(self):
        trace = _trace([1, 2], links=[(1, SINK, 'LF'), (2, SINK, 'MF')],
                       protocol='omr-pf')
        _arrive(trace, 1, 1, 6000, t=1.)
        _arrive(trace, 2, 1, 3000, t=2.)
        _send(trace, 1, [_frag(1, 1, 0, 6000, hdr=136)], t=1.)
        _receive(trace, 1, SINK, [_frag(1, 1, 0, 6000)], t=50.)
        _complete(trace, 1, 1, 50.)
        return trace

    def test_scalars(self, trace):
        report = compute_metrics(trace)
        scalars = report.scalars()
        assert list(scalars) == [
            'rho_d', 'rho_g', 'rho_g_unique', 'rho_s', 'rho_o',
            'rho_o_fraction', 'rho_e', 'rho_u_LF', 'rho_u_MF',
            'control_overhead_bits']
        assert scalars['rho_d'] == 49.
        assert scalars['rho_g'] == pytest.approx(6000 / 600 / 2)
        assert scalars['rho_s'] == pytest.approx(.5)
        assert scalars['rho_u_LF'] == pytest.approx(10.)
        assert scalars['rho_u_MF'] == 0.
        assert scalars['control_overhead_bits'] == 24
        assert len(report.messages) == 2

    def test_invariants(self, trace):
        report = compute_metrics(trace)
        assert 0 <= report.rho_s <= 1
        assert report.rho_g >= report.rho_g_unique
        for value in report.scalars().values():
            assert value is None or value >= 0

    def test_flooding_has_no_control_overhead(self, trace):
        trace.header['protocol'] = 'flooding'
        assert compute_metrics(trace).control_overhead_bits is None

    def test_reload(self, trace, tmp_path):
        fpath = tmp_path / 'trace.log'
        write_trace(fpath, trace)
        expected = compute_metrics(trace).scalars()
        assert compute_metrics(load_trace(fpath)).scalars() == expected

    def test_label_invariance(self, trace):
        relabel = {1: 2, 2: 1, SINK: SINK}
        header = dict(trace.header)
        header['nodes'] = [{'id': relabel[n['id']]} for n in header['nodes']]
        header['links'] = [[relabel[a], relabel[b], t]
                           for a, b, t in header['links']]
        swapped = TraceLog(header)
        for rec in trace:
            rec = dict(rec)
            for key in ('node', 'origin', 'from'):
                if key in rec:
                    rec[key] = relabel[rec[key]]
            if 'frags' in rec:
                rec['frags'] = [[relabel[f[0]], *f[1:]] for f in rec['frags']]
            swapped.records.append(rec)
        assert compute_metrics(swapped).scalars() == \
            compute_metrics(trace).scalars()


class TestDistributions:
    def test_cdf(self):
        table = cdf_table([3., 1., 2.])
        assert table.value.tolist() == [1., 2., 3.]
        assert table.probability.tolist() == pytest.approx([1 / 3, 2 / 3, 1.])

    def test_single_sample(self):
        table = cdf_table([4.])
        assert table.value.tolist() == [4.]
        assert table.probability.tolist() == [1.]

    def test_ccdf(self):
        table = ccdf_table([1., 2., 3.])
        # P(X > 1.5) is the value at the last point not above 1.5.
        row = table[table.value <= 1.5].iloc[-1]
        assert row.probability == pytest.approx(2 / 3)
        assert table.probability.iloc[-1] == 0.

    def test_undefined_skipped(self):
        table = cdf_table([1., None, math.inf, 2.])
        assert table.value.tolist() == [1., 2.]

    def test_emit(self):
        tables = emit_distributions({'rho_d': [1., 2.], 'rho_g': [1., 2.],
                                     'rho_u_LF': [3.], 'rho_s': [None]})
        assert sorted(tables) == ['rho_d', 'rho_g', 'rho_u_LF']
        assert tables['rho_d'].probability.tolist() == [.5, 1.]
        assert tables['rho_g'].probability.tolist() == [.5, 0.]
        assert tables['rho_u_LF'].probability.tolist() == [0.]
