# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
from pathlib import Path
import sys

import pytest
import yaml

from omrsim import __version__
from omrsim.batch import trace_path
from omrsim.cli import main
from omrsim.logging import getLogger


CONFIG_YAML = """\
topology: fig1
protocol: omr-ff
mac: ideal
t_net: 30
seed: 1
"""


@pytest.fixture(autouse=True)
def restore_root_logger(monkeypatch):
    # main() replaces the handlers of the root logger.
    root = getLogger()
    handlers, level = list(root.handlers), root.level
    for name in ('CONFIG', 'SEED', 'PROTOCOL', 'MAC', 'OUT', 'WORKERS'):
        monkeypatch.delenv(f'OMRSIM_{name}', raising=False)
    yield
    root.handlers = handlers
    root.setLevel(level)


@pytest.fixture
def config_path(tmp_path):
    fpath = Path(tmp_path, 'run.yaml')
    fpath.write_text(CONFIG_YAML)
    return fpath


def _main(monkeypatch, *args):
    monkeypatch.setattr(sys, 'argv', ['omrsim', *map(str, args)])
    with pytest.raises(SystemExit) as excinfo:
        main()
    return excinfo.value.code


class TestRun:
    def test_run(self, monkeypatch, config_path, tmp_path):
        out_dir = Path(tmp_path, 'out')
        status = _main(monkeypatch, '--disable-progress', 'run', '--config',
                       config_path, '--out', out_dir, '--seed', '1..2')
        assert status == 0
        for seed in (1, 2):
            assert trace_path(out_dir, seed, 'omr-ff', 'ideal').exists()
        assert Path(out_dir, 'metrics.csv').exists()

    def test_environment(self, monkeypatch, config_path, tmp_path):
        out_dir = Path(tmp_path, 'env')
        monkeypatch.setenv('OMRSIM_CONFIG', str(config_path))
        monkeypatch.setenv('OMRSIM_PROTOCOL', 'flooding')
        monkeypatch.setenv('OMRSIM_OUT', str(out_dir))
        assert _main(monkeypatch, '--disable-progress', 'run') == 0
        assert trace_path(out_dir, 1, 'flooding', 'ideal').exists()
        assert not trace_path(out_dir, 1, 'omr-ff', 'ideal').exists()

    def test_flag_beats_environment(self, monkeypatch, config_path,
                                    tmp_path):
        out_dir = Path(tmp_path, 'flag')
        monkeypatch.setenv('OMRSIM_PROTOCOL', 'flooding')
        status = _main(monkeypatch, '--disable-progress', 'run', '--config',
                       config_path, '--out', out_dir, '--protocol', 'omr-pf')
        assert status == 0
        assert trace_path(out_dir, 1, 'omr-pf', 'ideal').exists()

    def test_no_config(self, monkeypatch, capsys):
        assert _main(monkeypatch, 'run') == 1
        assert 'no configuration given' in capsys.readouterr().err

    def test_invalid_override(self, monkeypatch, config_path, capsys):
        status = _main(monkeypatch, 'run', '--config', config_path,
                       '--protocol', 'omr')
        assert status == 1
        err = capsys.readouterr().err
        assert 'ERROR: protocol[0]: "omr" is not valid' in err


class TestVerify:
    def test_verify(self, monkeypatch, config_path, tmp_path, capsys):
        out_dir = Path(tmp_path, 'out')
        _main(monkeypatch, '--disable-progress', 'run', '--config',
              config_path, '--out', out_dir)
        capsys.readouterr()
        assert _main(monkeypatch, 'verify', out_dir) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == '1 run(s), 0 corrupt trace(s)'
        assert lines[1].startswith('PASS ')

    def test_corrupt(self, monkeypatch, tmp_path, capsys):
        fpath = Path(tmp_path, 'trace_1.log')
        fpath.write_text('garbage\n')
        assert _main(monkeypatch, 'verify', '--out', tmp_path) == 1
        out = capsys.readouterr().out
        assert f'CORRUPT {fpath}' in out


class TestPreset:
    def test_list(self, monkeypatch, capsys):
        assert _main(monkeypatch, 'preset', 'list') == 0
        assert capsys.readouterr().out.split() == [
            'fig1', 'diamond', 'chain-<k>', 'paper-random']

    def test_dump(self, monkeypatch, capsys):
        assert _main(monkeypatch, 'preset', 'dump', 'chain-3') == 0
        doc = yaml.safe_load(capsys.readouterr().out)
        assert doc['sink'] == 3
        assert [n['id'] for n in doc['nodes']] == [1, 2, 3]

    def test_dump_to_file(self, monkeypatch, tmp_path):
        fpath = Path(tmp_path, 'fig1.yaml')
        assert _main(monkeypatch, 'preset', 'dump', 'fig1', '--out',
                     fpath) == 0
        assert yaml.safe_load(fpath.read_text())['sink'] == 6

    def test_dump_then_run(self, monkeypatch, tmp_path):
        graph_path = Path(tmp_path, 'chain.yaml')
        assert _main(monkeypatch, 'preset', 'dump', 'chain-3', '--out',
                     graph_path) == 0
        config_path = Path(tmp_path, 'run.yaml')
        config_path.write_text(
            f'topology: {{file: {graph_path}}}\nprotocol: omr-pf\n'
            f'mac: ideal\nt_net: 30\n')
        out_dir = Path(tmp_path, 'out')
        status = _main(monkeypatch, '--disable-progress', 'run', '--config',
                       config_path, '--out', out_dir)
        assert status == 0
        assert trace_path(out_dir, 1, 'omr-pf', 'ideal').exists()

    def test_unknown(self, monkeypatch, capsys):
        assert _main(monkeypatch, 'preset', 'dump', 'ring') == 1
        assert 'Unknown preset "ring"' in capsys.readouterr().err


def test_version(monkeypatch, capsys):
    assert _main(monkeypatch, '--version') == 0
    assert capsys.readouterr().out.strip() == f'omrsim {__version__}'
