# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Run configuration.

A run is described by a single YAML document::

    version: 1
    topology: fig1                # or {preset: ..} | {generate: {..}} | {graph: {..}}
    protocol: [omr-ff, omr-pf, flooding]
    mac: [ideal, immediate]
    traffic: {rate_per_minute: 3, max_message_bits: 64000}
    t_net: 600
    drain: 0
    capacity_period: 60
    seed: 1..100
    retry_cap: null
    ack_bits: 64
    ack_timeout_factor: 2
    max_payload_bits: {LF: 9600, MF: 30000, HF: 30000}
    fair_share_sum: downstream
    output_dir: results
    workers: 1

Every key but ``topology`` is optional. A ``{file: path}`` topology names a
YAML topology document; it is read when the configuration is loaded and kept
inline as a ``graph`` source, so the configuration hash covers its contents.
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

import yaml

from .io.topology_doc import (graph_from_document, graph_to_document,
                              load_topology_document)
from .mac import MACS
from .presets import is_preset, preset
from .protocol import PROTOCOLS
from .topology import (GenerationParams, TechnologyClass, TopologyError,
                       sample_connected_topology)
from .utils import parse_seed_range, stable_hash

__all__ = ['ConfigError', 'RunConfig', 'TopologySource', 'load_config',
           'load_config_file']


SCHEMA_VERSION = 1

DEFAULT_MAX_PAYLOAD = {'LF': 9600, 'MF': 30000, 'HF': 30000}

_TOP_KEYS = ('version', 'topology', 'protocol', 'mac', 'traffic', 't_net',
             'drain', 'capacity_period', 'seed', 'retry_cap', 'ack_bits',
             'ack_timeout_factor', 'max_payload_bits', 'fair_share_sum',
             'output_dir', 'workers')
_TRAFFIC_KEYS = ('rate_per_minute', 'max_message_bits')
_GENERATE_KEYS = ('node_count', 'area', 'depth', 'horizontal_obstacles',
                  'vertical_obstacles', 'obstacle_length', 'technologies',
                  'assignment', 'max_attempts')
# Keys that do not affect results.
_UNHASHED = ('output_dir', 'workers')


class ConfigError(Exception):
    """Invalid configuration document.

    Parameters
    ----------
    path : str
        Dotted path of the offending field.

    msg : str
        Description of the problem.
    """
    def __init__(self, path, msg):
        super().__init__(f'{path}: {msg}')
        self.path = path


@dataclass(frozen=True)
class TopologySource:
    """Where the topology of a run comes from.

    ``kind`` is ``'preset'`` (``value`` is the name), ``'generate'``
    (``value`` is a dict of :class:`GenerationParams` fields) or ``'graph'``
    (``value`` is a topology document).
    """
    kind: str
    value: object

    def to_document(self):
        return {self.kind: self.value}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration. See module docstring for fields."""
    topology: TopologySource
    protocols: Tuple[str, ...] = PROTOCOLS
    macs: Tuple[str, ...] = MACS
    rate_per_minute: float = 3.
    max_message_bits: int = 64000
    t_net: float = 600.
    drain: float = 0.
    capacity_period: float = 60.
    seed: object = 1
    retry_cap: Optional[int] = None
    ack_bits: int = 64
    ack_timeout_factor: float = 2.
    max_payload_bits: Dict[str, int] = field(
        default_factory=lambda: dict(DEFAULT_MAX_PAYLOAD))
    fair_share_sum: str = 'downstream'
    output_dir: Optional[str] = None
    workers: int = 1
    version: int = SCHEMA_VERSION

    @property
    def seeds(self):
        return parse_seed_range(self.seed)

    def cells(self):
        """Enumerate ``(seed, protocol, mac)`` batch cells."""
        return [(seed, p, m) for p in self.protocols for m in self.macs
                for seed in self.seeds]

    def to_document(self, include_unhashed=True):
        """Return the normalized document, defaults filled."""
        doc = {
            'version': self.version,
            'topology': self.topology.to_document(),
            'protocol': list(self.protocols),
            'mac': list(self.macs),
            'traffic': {'rate_per_minute': self.rate_per_minute,
                        'max_message_bits': self.max_message_bits},
            't_net': self.t_net,
            'drain': self.drain,
            'capacity_period': self.capacity_period,
            'seed': self.seed,
            'retry_cap': self.retry_cap,
            'ack_bits': self.ack_bits,
            'ack_timeout_factor': self.ack_timeout_factor,
            'max_payload_bits': dict(sorted(self.max_payload_bits.items())),
            'fair_share_sum': self.fair_share_sum,
            'output_dir': self.output_dir,
            'workers': self.workers,
        }
        if not include_unhashed:
            for key in _UNHASHED:
                doc.pop(key)
        return doc

    @property
    def config_hash(self):
        """SHA-256 of the normalized document, output location excluded."""
        return stable_hash(self.to_document(include_unhashed=False))

    def with_overrides(self, **overrides):
        """Return copy with the non-None `overrides` applied and validated
        (e.g., ``seed='1..5'``, ``protocols=('omr-pf',)``)."""
        doc = self.to_document()
        mapping = {'protocols': 'protocol', 'macs': 'mac'}
        for key, value in overrides.items():
            if value is None:
                continue
            doc[mapping.get(key, key)] = value
        return load_config(doc)

    def resolve_topology(self, seed):
        """Return the :class:`TopologyGraph` used by the run with `seed`.

        Technologies carry the configured maximum payloads.
        """
        src = self.topology
        try:
            if src.kind == 'preset':
                graph = preset(src.value, seed)
            elif src.kind == 'generate':
                graph = sample_connected_topology(
                    _generation_params(src.value), seed)
            else:
                graph = graph_from_document(src.value, 'topology.graph')
        except TopologyError as e:
            raise ConfigError('topology', str(e)) from e
        techs = {}
        for tid, tech in graph.technologies.items():
            if tid in self.max_payload_bits:
                tech = replace(tech,
                               max_payload_bits=self.max_payload_bits[tid])
            techs[tid] = tech
        return graph.with_technologies(techs)


def _generation_params(value):
    kwargs = dict(value)
    if 'technologies' in kwargs:
        kwargs['technologies'] = tuple(
            TechnologyClass(**t) for t in kwargs['technologies'])
    for key in ('area', 'obstacle_length'):
        if key in kwargs:
            kwargs[key] = tuple(float(x) for x in kwargs[key])
    return GenerationParams(**kwargs)


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _number(doc, key, default, path, positive=True, allow_zero=False):
    value = doc.get(key, default)
    if not _is_number(value):
        raise ConfigError(path, f'expected a number, got {value!r}.')
    if positive and (value < 0 or (value == 0 and not allow_zero)):
        raise ConfigError(
            path, f'must be {"non-negative" if allow_zero else "positive"}; '
                  f'got {value}.')
    return value


def _integer(doc, key, default, path, minimum=0):
    value = doc.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(path, f'expected an integer, got {value!r}.')
    if value < minimum:
        raise ConfigError(path, f'must be >= {minimum}; got {value}.')
    return value


def _check_keys(doc, allowed, path):
    if not isinstance(doc, dict):
        raise ConfigError(path or '<root>', 'expected a mapping.')
    for key in doc:
        if key not in allowed:
            where = f'{path}.{key}' if path else str(key)
            raise ConfigError(
                where, f'unknown key. Valid keys: {", ".join(allowed)}')


def _choices(doc, key, valid, path):
    value = doc.get(key, list(valid))
    values = [value] if isinstance(value, str) else value
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(path, 'expected a name or a non-empty list.')
    for k, v in enumerate(values):
        if v not in valid:
            where = path if isinstance(value, str) else f'{path}[{k}]'
            raise ConfigError(
                where, f'"{v}" is not valid. Valid values: '
                       f'{", ".join(valid)}')
    if len(set(values)) != len(values):
        raise ConfigError(path, 'duplicate entries.')
    return tuple(values)


def _read_topology_file(fpath, path):
    if not isinstance(fpath, (str, Path)):
        raise ConfigError(path, f'expected a file path, got {fpath!r}.')
    try:
        graph = load_topology_document(fpath)
    except OSError as e:
        raise ConfigError(path, f'cannot read "{fpath}": {e}') from e
    except (yaml.YAMLError, TopologyError) as e:
        raise ConfigError(path, str(e)) from e
    return graph_to_document(graph)


def _topology(value):
    if value is None:
        raise ConfigError('topology', 'missing required key.')
    if isinstance(value, str):
        value = {'preset': value}
    _check_keys(value, ('preset', 'generate', 'graph', 'file'), 'topology')
    if len(value) != 1:
        raise ConfigError(
            'topology',
            'exactly one of preset, generate, graph, file is required.')
    kind, body = next(iter(value.items()))
    path = f'topology.{kind}'
    if kind == 'file':
        return TopologySource('graph', _read_topology_file(body, path))
    if kind == 'preset':
        if not isinstance(body, str) or not is_preset(body):
            raise ConfigError(path, f'unknown preset {body!r}.')
    elif kind == 'generate':
        body = {} if body is None else body
        _check_keys(body, _GENERATE_KEYS, path)
        try:
            _generation_params(body)
        except (TopologyError, TypeError, ValueError) as e:
            raise ConfigError(path, str(e)) from e
        defaults = GenerationParams()
        body = {
            'node_count': body.get('node_count', defaults.node_count),
            'area': list(body.get('area', defaults.area)),
            'depth': body.get('depth', defaults.depth),
            'horizontal_obstacles': body.get(
                'horizontal_obstacles', defaults.horizontal_obstacles),
            'vertical_obstacles': body.get(
                'vertical_obstacles', defaults.vertical_obstacles),
            'obstacle_length': list(body.get(
                'obstacle_length', defaults.obstacle_length)),
            'assignment': body.get('assignment', defaults.assignment),
            'max_attempts': body.get('max_attempts', defaults.max_attempts),
            **({'technologies': body['technologies']}
               if 'technologies' in body else {}),
        }
    else:
        try:
            graph_from_document(body, path)
        except TopologyError as e:
            raise ConfigError(path, str(e)) from e
    return TopologySource(kind, body)


def load_config(document):
    """Validate configuration `document` and fill defaults.

    Parameters
    ----------
    document : dict or str
        Parsed document, or YAML text.

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError
        On schema violations; ``path`` names the offending field.
    """
    if isinstance(document, str):
        try:
            document = yaml.safe_load(document)
        except yaml.YAMLError as e:
            raise ConfigError('<root>', f'invalid YAML ({e}).') from e
    if document is None:
        document = {}
    _check_keys(document, _TOP_KEYS, '')
    doc = document
    version = doc.get('version', SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(
            'version', f'unsupported schema version {version!r}; expected '
                       f'{SCHEMA_VERSION}.')
    topology = _topology(doc.get('topology'))
    protocols = _choices(doc, 'protocol', PROTOCOLS, 'protocol')
    macs = _choices(doc, 'mac', MACS, 'mac')
    traffic = doc.get('traffic') or {}
    _check_keys(traffic, _TRAFFIC_KEYS, 'traffic')
    rate = _number(traffic, 'rate_per_minute', 3., 'traffic.rate_per_minute')
    max_bits = _integer(traffic, 'max_message_bits', 64000,
                        'traffic.max_message_bits', minimum=8)
    if max_bits % 8:
        raise ConfigError('traffic.max_message_bits',
                          'must be a whole number of bytes.')
    seed = doc.get('seed', 1)
    try:
        parse_seed_range(seed)
    except ValueError as e:
        raise ConfigError('seed', str(e)) from e
    if isinstance(seed, str) and '..' not in seed:
        seed = int(seed)
    payload = dict(DEFAULT_MAX_PAYLOAD)
    user_payload = doc.get('max_payload_bits') or {}
    if not isinstance(user_payload, dict):
        raise ConfigError('max_payload_bits', 'expected a mapping.')
    for tech, bits in user_payload.items():
        path = f'max_payload_bits.{tech}'
        bits = _integer(user_payload, tech, None, path, minimum=8)
        if bits % 8:
            raise ConfigError(path, 'must be a whole number of bytes.')
        payload[str(tech)] = bits
    retry_cap = doc.get('retry_cap')
    if retry_cap is not None:
        retry_cap = _integer(doc, 'retry_cap', None, 'retry_cap')
    fair_share_sum = doc.get('fair_share_sum', 'downstream')
    if fair_share_sum not in ('downstream', 'upstream'):
        raise ConfigError(
            'fair_share_sum', f'"{fair_share_sum}" is not valid. Valid '
                              f'values: downstream, upstream')
    output_dir = doc.get('output_dir')
    if output_dir is not None:
        output_dir = str(output_dir)
    factor = _number(doc, 'ack_timeout_factor', 2., 'ack_timeout_factor')
    if factor < 1:
        raise ConfigError('ack_timeout_factor', 'must be >= 1.')
    return RunConfig(
        topology=topology, protocols=protocols, macs=macs,
        rate_per_minute=float(rate), max_message_bits=max_bits,
        t_net=float(_number(doc, 't_net', 600., 't_net')),
        drain=float(_number(doc, 'drain', 0., 'drain', allow_zero=True)),
        capacity_period=float(_number(doc, 'capacity_period', 60.,
                                      'capacity_period')),
        seed=seed, retry_cap=retry_cap,
        ack_bits=_integer(doc, 'ack_bits', 64, 'ack_bits', minimum=8),
        ack_timeout_factor=float(factor),
        max_payload_bits=payload, fair_share_sum=fair_share_sum,
        output_dir=output_dir,
        workers=_integer(doc, 'workers', 1, 'workers', minimum=1),
        version=version)


def load_config_file(fpath):
    """Load and validate YAML configuration file `fpath`."""
    fpath = Path(fpath)
    try:
        with open(fpath, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError('<file>', f'cannot read "{fpath}": {e}') from e
    return load_config(text)
