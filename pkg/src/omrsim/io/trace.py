# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Functions for reading/writing simulation traces.

A trace is a JSON-lines document. The first line is the run header; every
following line is one event record with keys ``seq`` (event sequence number),
``t`` (simulated time) and ``ev`` (event kind) first, followed by event
specific fields. Files ending in ``.gz`` are gzip compressed.
"""
import gzip
import hashlib
import io
import json
import math
from pathlib import Path

__all__ = ['TraceFormatError', 'TraceLog', 'load_trace', 'write_trace']


class TraceFormatError(Exception):
    """Trace file is corrupt."""


def _clean(value):
    # JSON has no infinities; they are written as null.
    if isinstance(value, float) and math.isinf(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _dumps(obj):
    return json.dumps(obj, separators=(',', ':'), allow_nan=False)


class TraceLog:
    """Ordered record of the events of one run.

    Parameters
    ----------
    header : dict, optional
        Run header.

    records : list of dict, optional
        Event records.
    """
    def __init__(self, header=None, records=None):
        self.header = {} if header is None else header
        self.records = [] if records is None else records

    def append(self, ev, t, **fields):
        """Append record of event kind `ev` at time `t`."""
        rec = {'seq': len(self.records), 't': t, 'ev': ev}
        rec.update(_clean(fields))
        self.records.append(rec)
        return rec

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def events(self, *kinds):
        """Iterate over records whose kind is in `kinds`."""
        kinds = set(kinds)
        return (rec for rec in self.records if rec['ev'] in kinds)

    def lines(self):
        yield _dumps({'type': 'header', **_clean(self.header)})
        for rec in self.records:
            yield _dumps(rec)

    def to_bytes(self):
        return ''.join(line + '\n' for line in self.lines()).encode('utf-8')

    def digest(self):
        """Hex SHA-256 of the serialized trace."""
        return hashlib.sha256(self.to_bytes()).hexdigest()

    @property
    def config_hash(self):
        return self.header.get('config_hash')

    @property
    def seed(self):
        return self.header.get('seed')


def write_trace(fpath, trace):
    """Write `trace` to `fpath`.

    If `fpath` ends in ``.gz``, the output is gzip compressed with a zero
    modification time so that identical traces give identical files.

    Parameters
    ----------
    fpath : pathlib.Path
        Output path.

    trace : TraceLog
        Trace to write.
    """
    fpath = Path(fpath)
    data = trace.to_bytes()
    if fpath.suffix == '.gz':
        with open(fpath, 'wb') as f:
            with gzip.GzipFile(filename='', fileobj=f, mode='wb',
                               mtime=0) as gz:
                gz.write(data)
    else:
        with open(fpath, 'wb') as f:
            f.write(data)


def load_trace(fpath):
    """Load trace from `fpath`.

    Returns
    -------
    TraceLog

    Raises
    ------
    TraceFormatError
        If the file is not a well-formed trace.
    """
    fpath = Path(fpath)
    try:
        if fpath.suffix == '.gz':
            with gzip.open(fpath, 'rb') as f:
                text = f.read().decode('utf-8')
        else:
            with open(fpath, 'r', encoding='utf-8') as f:
                text = f.read()
    except (OSError, EOFError, UnicodeDecodeError) as e:
        raise TraceFormatError(f'Cannot read trace "{fpath}": {e}') from e
    header = None
    records = []
    for n, line in enumerate(io.StringIO(text), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceFormatError(
                f'{fpath}, line {n}: invalid JSON ({e.msg}).') from e
        if not isinstance(obj, dict):
            raise TraceFormatError(f'{fpath}, line {n}: not a record.')
        if header is None:
            if obj.pop('type', None) != 'header':
                raise TraceFormatError(f'{fpath}: missing run header.')
            header = obj
            continue
        for key in ('seq', 't', 'ev'):
            if key not in obj:
                raise TraceFormatError(
                    f'{fpath}, line {n}: record lacks "{key}".')
        records.append(obj)
    if header is None:
        raise TraceFormatError(f'{fpath}: empty trace.')
    return TraceLog(header, records)
