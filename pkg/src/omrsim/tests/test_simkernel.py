# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Tests for the discrete-event engine."""
from collections import defaultdict

import numpy as np
import pytest

from omrsim.config import load_config
from omrsim.logging import SimClockFilter
from omrsim.presets import preset
from omrsim.simkernel import (SimSettings, Simulator, generate_traffic, logger,
                              run_simulation, simulate)


def _paths(trace):
    for rec in trace.events('tx_start'):
        for frag in rec.get('frags') or []:
            yield frag[5]


class TestGenerateTraffic:
    def test_determinism(self):
        msgs1 = generate_traffic(1, 3., 600., seed=7)
        msgs2 = generate_traffic(1, 3., 600., seed=7)
        assert msgs1 == msgs2
        assert msgs1 != generate_traffic(2, 3., 600., seed=7)
        assert msgs1 != generate_traffic(1, 3., 600., seed=8)

    def test_messages(self):
        msgs = generate_traffic(4, 3., 600., seed=1)
        assert [m.msg_id for m in msgs] == list(range(1, len(msgs) + 1))
        times = [m.created_at for m in msgs]
        assert times == sorted(times)
        for m in msgs:
            assert m.origin == 4
            assert 0 <= m.created_at < 600
            assert m.payload_size % 8 == 0
            assert 8 <= m.payload_size <= 64000

    def test_empty_horizon(self):
        assert generate_traffic(1, 3., 0., seed=1) == []

    def test_invalid(self):
        with pytest.raises(ValueError) as excinfo:
            generate_traffic(1, 0., 600.)
        assert 'rate' in str(excinfo.value)
        with pytest.raises(ValueError) as excinfo:
            generate_traffic(1, 3., 600., max_message_bits=7)
        assert 'one byte' in str(excinfo.value)

    @pytest.mark.slow
    def test_poisson_mean(self):
        counts = [len(generate_traffic(1, 3., 600., seed=s))
                  for s in range(10000)]
        assert np.mean(counts) == pytest.approx(30, rel=.01)
        sizes = [m.payload_size for s in range(500)
                 for m in generate_traffic(1, 3., 600., seed=s)]
        assert np.mean(sizes) == pytest.approx(32004, rel=.02)


class TestSimSettings:
    def test_invalid(self):
        with pytest.raises(ValueError) as excinfo:
            SimSettings(protocol='omr')
        assert 'Unknown protocol' in str(excinfo.value)
        with pytest.raises(ValueError) as excinfo:
            SimSettings(mac='aloha')
        assert 'Unknown MAC' in str(excinfo.value)
        with pytest.raises(ValueError):
            SimSettings(t_net=-1.)

    def test_to_record(self):
        rec = SimSettings(protocol='omr-pf', t_net=60.).to_record()
        assert rec['protocol'] == 'omr-pf'
        assert rec['t_net'] == 60.
        assert rec['u'] == 60.


class TestSimulate:
    def test_determinism(self):
        settings = SimSettings(protocol='omr-ff', mac='ideal', t_net=120.)
        trace1 = simulate(preset('fig1'), settings, seed=7)
        trace2 = simulate(preset('fig1'), settings, seed=7)
        assert trace1.digest() == trace2.digest()
        assert len(trace1) > 0
        trace3 = simulate(preset('fig1'), settings, seed=8)
        assert trace1.digest() != trace3.digest()

    def test_header(self):
        settings = SimSettings(t_net=10.)
        trace = simulate(preset('diamond'), settings, seed=3,
                         header={'config_hash': 'abc'})
        assert trace.seed == 3
        assert trace.config_hash == 'abc'
        assert trace.header['sink'] == 4
        assert trace.header['sound_speed'] == 1500.
        assert trace.header['upstream']['1'] == [2, 3]
        assert [n['id'] for n in trace.header['nodes']] == [1, 2, 3, 4]

    def test_zero_horizon(self):
        trace = simulate(preset('fig1'), SimSettings(t_net=0.), seed=1)
        assert list(trace.events('msg_arrival')) == []

    def test_two_node_delivery(self):
        settings = SimSettings(protocol='omr-pf', mac='ideal', t_net=120.,
                               drain=300.)
        trace = simulate(preset('chain-2'), settings, seed=3)
        arrivals = list(trace.events('msg_arrival'))
        assert arrivals
        completed = {(r['origin'], r['msg_id'])
                     for r in trace.events('complete')}
        assert completed == {(r['node'], r['msg_id']) for r in arrivals}

        # Bits acknowledged match bits generated.
        acked = sum(r['bits'] for r in trace.events('ack_deliver'))
        assert acked == sum(r['bits'] for r in arrivals)

    def test_omr_unicast_upstream(self):
        graph = preset('fig1')
        settings = SimSettings(protocol='omr-ff', mac='ideal', t_net=120.)
        trace = simulate(graph, settings, seed=2)
        for rec in trace.events('tx_start'):
            if rec['kind'] == 'data':
                assert rec['to'] in graph.upstream[rec['node']]

    @pytest.mark.parametrize('protocol', ['omr-ff', 'omr-pf', 'flooding'])
    def test_loop_freedom(self, protocol):
        settings = SimSettings(protocol=protocol, mac='ideal', t_net=60.)
        trace = simulate(preset('fig1'), settings, seed=5)
        paths = list(_paths(trace))
        assert paths
        for path in paths:
            assert len(set(path)) == len(path)

    def test_causality(self):
        graph = preset('fig1')
        settings = SimSettings(protocol='omr-ff', mac='immediate', t_net=60.)
        trace = simulate(graph, settings, seed=4)
        ends = {r['tx']: (r['end'], r['node'])
                for r in trace.events('tx_start')}
        for rec in trace.events('rx_deliver'):
            end, sender = ends[rec['tx']]
            expected = end + graph.distance(sender, rec['node']) / 1500.
            assert rec['t'] == pytest.approx(expected, abs=1e-6)
            assert rec['t'] > end

    def test_medium_exclusivity(self):
        settings = SimSettings(protocol='omr-pf', mac='immediate', t_net=60.)
        trace = simulate(preset('fig1'), settings, seed=4)
        busy = defaultdict(list)
        for rec in trace.events('tx_start'):
            busy[(rec['node'], rec['tech'])].append((rec['t'], rec['end']))
        assert busy
        for spans in busy.values():
            spans.sort()
            for (_, end), (start, _) in zip(spans, spans[1:]):
                assert start >= end - 1e-9

    def test_immediate_acks(self):
        settings = SimSettings(protocol='omr-ff', mac='immediate', t_net=300.)
        trace = simulate(preset('chain-2'), settings, seed=4)
        kinds = {r['kind'] for r in trace.events('tx_start')}
        assert kinds == {'data', 'ack'}

    def test_flooding_unacknowledged(self):
        settings = SimSettings(protocol='flooding', mac='ideal', t_net=60.)
        trace = simulate(preset('chain-3'), settings, seed=4)
        assert list(trace.events('ack_deliver', 'ack_timeout')) == []
        for rec in trace.events('tx_start'):
            assert rec['to'] is None

    def test_epoch_ticks(self):
        settings = SimSettings(t_net=130., capacity_period=60.)
        trace = simulate(preset('chain-2'), settings, seed=1)
        ticks = list(trace.events('epoch_tick'))
        assert [r['period'] for r in ticks] == [1, 2]
        assert [r['t'] for r in ticks] == [60., 120.]

    def test_sequence(self):
        settings = SimSettings(t_net=60.)
        trace = simulate(preset('fig1'), settings, seed=1)
        assert [r['seq'] for r in trace] == list(range(len(trace)))
        times = [r['t'] for r in trace]
        assert times == sorted(times)

    def test_clock_filter_removed(self):
        sim = Simulator(preset('chain-2'), SimSettings(t_net=10.), seed=1)
        sim.run()
        assert sim.now == 10.
        assert not any(isinstance(f, SimClockFilter) for f in logger.filters)


def test_run_simulation():
    config = load_config({'topology': 'diamond', 'protocol': 'omr-ff',
                          'mac': 'ideal', 't_net': 30, 'seed': 2})
    trace = run_simulation(config, 2)
    assert trace.config_hash == config.config_hash
    assert trace.header['protocol'] == 'omr-ff'
    assert 'output_dir' not in trace.header['config']
    assert run_simulation(config, 2).digest() == trace.digest()
