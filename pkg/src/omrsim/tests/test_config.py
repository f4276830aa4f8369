# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Tests for run configuration."""
import pytest

from omrsim.config import (ConfigError, RunConfig, TopologySource, load_config,
                           load_config_file)
from omrsim.io.topology_doc import graph_to_document, write_topology_document
from omrsim.presets import preset


CONFIG_YAML = """\
version: 1
topology: fig1
protocol: [omr-ff, flooding]
mac: ideal
traffic: {rate_per_minute: 2, max_message_bits: 8000}
t_net: 300
seed: 1..100
max_payload_bits: {LF: 4800}
output_dir: results
"""


class TestLoadConfig:
    def test_minimal(self):
        config = load_config({'topology': 'fig1'})
        assert config.topology == TopologySource('preset', 'fig1')
        assert config.protocols == ('omr-ff', 'omr-pf', 'flooding')
        assert config.macs == ('ideal', 'immediate')
        assert config.t_net == 600.
        assert config.rate_per_minute == 3.
        assert config.max_message_bits == 64000
        assert config.seeds == [1]
        assert config.retry_cap is None
        assert config.max_payload_bits == {'LF': 9600, 'MF': 30000,
                                           'HF': 30000}

    def test_yaml(self):
        config = load_config(CONFIG_YAML)
        assert config.protocols == ('omr-ff', 'flooding')
        assert config.macs == ('ideal',)
        assert config.max_message_bits == 8000
        assert config.t_net == 300.
        assert config.seeds == list(range(1, 101))
        assert config.max_payload_bits['LF'] == 4800
        assert config.max_payload_bits['MF'] == 30000
        assert config.output_dir == 'results'

    def test_single_seed_string(self):
        assert load_config({'topology': 'fig1', 'seed': '7'}).seed == 7

    def test_missing_topology(self):
        with pytest.raises(ConfigError) as excinfo:
            load_config('')
        assert excinfo.value.path == 'topology'

    @pytest.mark.parametrize('doc,path,text', [
        ({'topology': 'fig1', 'protocol': 'omr'}, 'protocol',
         '"omr" is not valid'),
        ({'topology': 'fig1', 'protocol': ['omr-ff', 'omr']}, 'protocol[1]',
         '"omr" is not valid'),
        ({'topology': 'fig1', 'mac': []}, 'mac', 'non-empty'),
        ({'topology': 'fig1', 'mac': ['ideal', 'ideal']}, 'mac', 'duplicate'),
        ({'topology': 'fig1', 'colour': 1}, 'colour', 'unknown key'),
        ({'topology': 'fig1', 'traffic': {'rate': 1}}, 'traffic.rate',
         'unknown key'),
        ({'topology': 'fig1', 't_net': 0}, 't_net', 'positive'),
        ({'topology': 'fig1', 't_net': 'long'}, 't_net', 'number'),
        ({'topology': 'fig1', 'drain': -1}, 'drain', 'non-negative'),
        ({'topology': 'fig1', 'seed': '5..1'}, 'seed', 'Empty seed range'),
        ({'topology': 'fig1', 'version': 2}, 'version', 'unsupported'),
        ({'topology': 'fig1', 'workers': 0}, 'workers', '>= 1'),
        ({'topology': 'fig1', 'ack_timeout_factor': .5},
         'ack_timeout_factor', '>= 1'),
        ({'topology': 'fig1', 'max_payload_bits': {'LF': 100}},
         'max_payload_bits.LF', 'whole number of bytes'),
        ({'topology': 'fig1', 'traffic': {'max_message_bits': 12}},
         'traffic.max_message_bits', 'whole number of bytes'),
        ({'topology': 'fig1', 'fair_share_sum': 'both'}, 'fair_share_sum',
         'not valid'),
        ({'topology': 'ring'}, 'topology.preset', 'unknown preset'),
        ({'topology': {'preset': 'fig1', 'graph': {}}}, 'topology',
         'exactly one'),
        ({'topology': {'generate': {'nodes': 5}}}, 'topology.generate.nodes',
         'unknown key'),
    ])
    def test_invalid(self, doc, path, text):
        with pytest.raises(ConfigError) as excinfo:
            load_config(doc)
        assert excinfo.value.path == path
        assert str(excinfo.value).startswith(f'{path}: ')
        assert text in str(excinfo.value)

    def test_unknown_key_lists_valid(self):
        with pytest.raises(ConfigError) as excinfo:
            load_config({'topology': 'fig1', 'colour': 1})
        assert 'Valid keys: version, topology' in str(excinfo.value)

    def test_invalid_yaml(self):
        with pytest.raises(ConfigError) as excinfo:
            load_config('topology: [fig1')
        assert excinfo.value.path == '<root>'

    def test_generate_defaults(self):
        config = load_config({'topology': {'generate': {'node_count': 5}}})
        assert config.topology.kind == 'generate'
        body = config.topology.value
        assert body['node_count'] == 5
        assert body['area'] == [500., 500.]
        assert body['max_attempts'] == 20

    def test_graph_topology(self):
        doc = graph_to_document(preset('diamond'))
        config = load_config({'topology': {'graph': doc}})
        graph = config.resolve_topology(1)
        assert graph.sink == 4
        assert graph.upstream[1] == (2, 3)

    def test_file_topology(self, tmp_path):
        fpath = tmp_path / 'diamond.yaml'
        write_topology_document(fpath, preset('diamond'))
        config = load_config({'topology': {'file': str(fpath)}})

        # The document is stored inline.
        assert config.topology.kind == 'graph'
        assert config.topology.value['sink'] == 4
        graph = config.resolve_topology(1)
        assert graph.sink == 4
        assert graph.upstream[1] == (2, 3)

    def test_file_topology_missing(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            load_config({'topology': {'file': str(tmp_path / 'none.yaml')}})
        assert excinfo.value.path == 'topology.file'
        assert 'cannot read' in str(excinfo.value)

    def test_file_topology_invalid(self, tmp_path):
        fpath = tmp_path / 'bad.yaml'
        fpath.write_text('sink: 1\n')
        with pytest.raises(ConfigError) as excinfo:
            load_config({'topology': {'file': str(fpath)}})
        assert excinfo.value.path == 'topology.file'
        assert 'missing required key' in str(excinfo.value)


class TestRunConfig:
    def test_cells(self):
        config = load_config({'topology': 'fig1', 'seed': '1..3',
                              'protocol': ['omr-pf', 'flooding'],
                              'mac': 'ideal'})
        cells = config.cells()
        assert len(cells) == 6
        assert cells[0] == (1, 'omr-pf', 'ideal')
        assert cells[-1] == (3, 'flooding', 'ideal')

    def test_config_hash(self):
        config1 = load_config({'topology': 'fig1', 'output_dir': 'a',
                               'workers': 1})
        config2 = load_config({'topology': 'fig1', 'output_dir': 'b',
                               'workers': 4})
        assert config1.config_hash == config2.config_hash
        assert len(config1.config_hash) == 64
        config3 = load_config({'topology': 'fig1', 't_net': 601})
        assert config3.config_hash != config1.config_hash

    def test_document_roundtrip(self):
        config = load_config(CONFIG_YAML)
        assert load_config(config.to_document()) == config
        assert 'output_dir' not in config.to_document(include_unhashed=False)

    def test_with_overrides(self):
        config = load_config({'topology': 'fig1'})
        new = config.with_overrides(seed='1..5', protocols=('omr-pf',),
                                    macs=None, output_dir='out')
        assert new.seeds == [1, 2, 3, 4, 5]
        assert new.protocols == ('omr-pf',)
        assert new.macs == config.macs
        assert new.output_dir == 'out'
        assert isinstance(new, RunConfig)
        with pytest.raises(ConfigError) as excinfo:
            config.with_overrides(macs=('aloha',))
        assert excinfo.value.path == 'mac[0]'

    def test_resolve_topology(self):
        config = load_config({'topology': 'fig1',
                              'max_payload_bits': {'LF': 4800}})
        graph = config.resolve_topology(1)
        assert graph.sink == 6
        assert graph.technologies['LF'].max_payload_bits == 4800
        assert graph.technologies['MF'].max_payload_bits == 30000


def test_load_config_file(tmp_path):
    fpath = tmp_path / 'run.yaml'
    fpath.write_text(CONFIG_YAML)
    assert load_config_file(fpath) == load_config(CONFIG_YAML)
    with pytest.raises(ConfigError) as excinfo:
        load_config_file(tmp_path / 'missing.yaml')
    assert excinfo.value.path == '<file>'
