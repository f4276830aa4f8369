# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Monte Carlo batches and trace audits.

A batch runs every ``(seed, protocol, mac)`` cell of a configuration and
writes, under the output directory::

    metrics.csv
    dist_<metric>_<protocol>_<mac>.csv
    summary.txt
    <protocol>_<mac>/trace_<seed>.log

:func:`verify` replays the invariant checks against stored traces.
"""
from collections import defaultdict
from dataclasses import dataclass, field
from functools import partial
import math
import multiprocessing
import multiprocessing.dummy
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from .interval import Interval, merge_intervals
from .io.datagram import (DatagramFormatError, decode_datagram,
                          encode_datagram)
from .io.tables import (distribution_path, load_metrics_table, metric_rows,
                        write_distribution_table, write_metrics_table)
from .io.trace import TraceFormatError, load_trace, write_trace
from .logging import CellLoggerAdapter, getLogger
from .metrics import compute_metrics, emit_distributions
from .protocol import Fragment, Piggyback
from .simkernel import run_simulation

__all__ = ['AuditCheck', 'BatchResult', 'CompletedCell', 'RunAudit',
           'VerifyReport', 'audit_trace', 'process_one_cell', 'run_batch',
           'trace_path', 'verify']


logger = getLogger()

TOL = 1e-6

# Metrics whose per-run values feed the distribution tables.
DIST_METRICS = ('rho_d', 'rho_g')


def trace_path(out_dir, seed, protocol, mac):
    """Path of the trace of one batch cell."""
    return Path(out_dir, f'{protocol}_{mac}', f'trace_{seed}.log')


@dataclass
class CompletedCell:
    """Outcome of one batch cell.

    Parameters
    ----------
    seed : int
        Run seed.

    protocol, mac : str
        Routing policy and medium model.

    success : bool
        Did the run complete.

    scalars : dict
        Metric values of the run; empty on failure.
    """
    seed: int
    protocol: str
    mac: str
    success: bool
    scalars: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)


def _process_one_cell(cell, config, out_dir):
    """Run one cell."""
    seed, protocol, mac = cell
    log = CellLoggerAdapter(logger, seed, protocol, mac)
    try:
        log.debug('Starting run.')
        trace = run_simulation(config, seed, protocol, mac)
        fpath = trace_path(out_dir, seed, protocol, mac)
        fpath.parent.mkdir(parents=True, exist_ok=True)
        write_trace(fpath, trace)
        log.debug(f'Saved trace to "{fpath}".')
        report = compute_metrics(trace)
        rows = metric_rows(report, config.config_hash, seed, protocol, mac)
        return CompletedCell(seed, protocol, mac, True, report.scalars(),
                             rows)
    except Exception as e:
        log.debug(e, exc_info=True)
    return CompletedCell(seed, protocol, mac, False)


def process_one_cell(cell, config, out_dir):
    """Run one cell, warning on failure."""
    p = _process_one_cell(cell, config, out_dir)
    if not p.success:
        CellLoggerAdapter(logger, p.seed, p.protocol, p.mac).warning(
            'Run failed. Skipping. For more details rerun with the --debug '
            'flag.')
    return p


@dataclass
class BatchResult:
    """Cells of a finished batch, in enumeration order."""
    out_dir: Path
    cells: List[CompletedCell]

    @property
    def failed(self):
        return [c for c in self.cells if not c.success]

    @property
    def ok(self):
        return not self.failed


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def _write_summary(fpath, config, cells):
    by_pair = defaultdict(list)
    for c in cells:
        if c.success:
            by_pair[(c.protocol, c.mac)].append(c.scalars)
    metrics = sorted({m for runs in by_pair.values() for s in runs
                      for m in s})
    with open(fpath, 'w', encoding='utf-8') as f:
        f.write(f'config_hash: {config.config_hash}\n')
        f.write(f'seeds: {config.seed}\n')
        f.write(f'cells: {len(cells)} run, '
                f'{sum(not c.success for c in cells)} failed\n\n')
        f.write('Batch means\n')
        for protocol in config.protocols:
            for mac in config.macs:
                runs = by_pair.get((protocol, mac), [])
                f.write(f'\n{protocol}/{mac} ({len(runs)} runs)\n')
                for m in metrics:
                    value = _mean(s.get(m) for s in runs)
                    text = 'n/a' if value is None else f'{value:.6g}'
                    f.write(f'  {m:<24} {text}\n')
        failed = [c for c in cells if not c.success]
        if failed:
            f.write('\nFailed cells\n')
            for c in failed:
                f.write(f'  seed={c.seed} {c.protocol}/{c.mac}\n')


def run_batch(config, out_dir=None, disable_progress=False):
    """Run every cell of `config` and persist traces, metrics and summary.

    Parameters
    ----------
    config : RunConfig
        Validated configuration.

    out_dir : pathlib.Path, optional
        Output directory. Defaults to ``config.output_dir``, then the current
        directory.

    disable_progress : bool, optional
        If True, disable the progress bar.
        (Default: False)

    Returns
    -------
    BatchResult
        Failed cells are recorded, never raised.
    """
    if out_dir is None:
        out_dir = config.output_dir or Path.cwd()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = config.cells()
    n_jobs = max(1, min(config.workers, len(cells)))
    Pool = multiprocessing.Pool
    if n_jobs == 1:
        Pool = multiprocessing.dummy.Pool
    results = []
    with Pool(n_jobs) as pool:
        f = partial(process_one_cell, config=config, out_dir=out_dir)
        with tqdm(total=len(cells), disable=disable_progress) as pbar:
            for res in pool.imap(f, cells):
                results.append(res)
                pbar.update(1)
    rows = [row for c in results for row in c.rows]
    write_metrics_table(Path(out_dir, 'metrics.csv'), rows)
    samples = defaultdict(lambda: defaultdict(list))
    for c in results:
        if not c.success:
            continue
        for name, value in c.scalars.items():
            if name in DIST_METRICS or name.startswith('rho_u_'):
                samples[(c.protocol, c.mac)][name].append(value)
    for (protocol, mac), by_metric in sorted(samples.items()):
        for name, table in emit_distributions(by_metric).items():
            write_distribution_table(
                distribution_path(out_dir, name, protocol, mac), table)
    _write_summary(Path(out_dir, 'summary.txt'), config, results)
    result = BatchResult(out_dir, results)
    if not result.ok:
        logger.warning(
            f'{len(result.failed)} of {len(results)} runs failed.')
    return result


@dataclass
class AuditCheck:
    """Result of one invariant check on one trace."""
    name: str
    passed: bool
    detail: Optional[str] = None


@dataclass
class RunAudit:
    path: Optional[Path]
    checks: List[AuditCheck]

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


@dataclass
class VerifyReport:
    """Audit of every trace found.

    ``corrupt`` lists traces that could not be read; they are not counted as
    runs.
    """
    runs: List[RunAudit] = field(default_factory=list)
    corrupt: List[Path] = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.runs) and not self.corrupt

    def lines(self):
        yield f'{len(self.runs)} run(s), {len(self.corrupt)} corrupt trace(s)'
        for run in self.runs:
            status = 'PASS' if run.passed else 'FAIL'
            yield f'{status} {run.path}'
            for c in run.checks:
                mark = 'ok' if c.passed else 'FAILED'
                detail = f': {c.detail}' if c.detail else ''
                yield f'    {c.name:<22} {mark}{detail}'
        for fpath in self.corrupt:
            yield f'CORRUPT {fpath}'


def _frag_id(frag):
    return tuple(frag[:4])


def _check_ordering(trace):
    prev = -math.inf
    for k, rec in enumerate(trace):
        if rec['seq'] != k:
            return f'record {k} has seq {rec["seq"]}'
        if rec['t'] < prev:
            return f'record {k} goes back in time'
        prev = rec['t']


def _check_loop_freedom(trace):
    for rec in trace.events('tx_start', 'rx_deliver'):
        for frag in rec.get('frags') or ():
            path = frag[5]
            if len(set(path)) != len(path):
                return (f'fragment {_frag_id(frag)} repeats a node in path '
                        f'{path} (record {rec["seq"]})')


def _check_allocations(trace):
    for rec in trace.events('alloc'):
        alloc = {(j, t): v for j, t, v in rec['alloc']}
        if any(v < -TOL for v in alloc.values()):
            return f'negative allocation (record {rec["seq"]})'
        if sum(alloc.values()) > rec['backlog'] + TOL:
            return f'allocation exceeds backlog (record {rec["seq"]})'
        for j, t, cap in rec['caps']:
            if alloc.get((j, t), 0.) > cap + TOL:
                return (f'allocation to {j} over {t} exceeds capacity '
                        f'(record {rec["seq"]})')
        for j, delta in rec['deltas']:
            if delta is None:
                continue
            sent = sum(v for (jj, _), v in alloc.items() if jj == j)
            if sent > delta + TOL:
                return (f'allocation to {j} exceeds its residual capacity '
                        f'(record {rec["seq"]})')
    for rec in trace.events('estimate'):
        alloc = {(k, t): v for k, t, v in rec['alloc']}
        if any(v < -TOL for v in alloc.values()):
            return f'negative estimate (record {rec["seq"]})'
        if sum(alloc.values()) > rec['backlog'] + TOL:
            return f'estimate exceeds backlog (record {rec["seq"]})'
        for k, t, cap in rec['caps']:
            if alloc.get((k, t), 0.) > cap + TOL:
                return (f'estimate for {k} over {t} exceeds capacity '
                        f'(record {rec["seq"]})')


def _check_causality(trace):
    header = trace.header
    pos = {n['id']: n['pos'] for n in header['nodes']}
    speed = header.get('sound_speed', 1500.)
    starts, ends = {}, {}
    for rec in trace.events('tx_start'):
        starts[rec['tx']] = rec['t']
    for rec in trace.events('tx_end'):
        ends[rec['tx']] = rec['t']
    for rec in trace.events('rx_deliver'):
        tx = rec['tx']
        if tx not in ends:
            return f'reception of unfinished transmission {tx}'
        delay = math.dist(pos[rec['from']], pos[rec['node']]) / speed
        if abs(rec['t'] - (ends[tx] + delay)) > TOL:
            return (f'reception at node {rec["node"]} of transmission {tx} '
                    f'off by {rec["t"] - ends[tx] - delay:.3g} s')
        if rec['t'] <= starts[tx]:
            return f'zero-latency reception of transmission {tx}'


def _check_reassembly(trace):
    sink = trace.header['sink']
    sizes = {(r['node'], r['msg_id']): r['bits']
             for r in trace.events('msg_arrival')}
    covered = defaultdict(list)
    for rec in trace.events('rx_deliver', 'complete'):
        if rec['ev'] == 'rx_deliver':
            if rec['node'] == sink and rec.get('frags'):
                for frag in rec['frags']:
                    covered[(frag[0], frag[1])].append(
                        Interval(frag[2], frag[2] + frag[3]))
            continue
        key = (rec['origin'], rec['msg_id'])
        if key not in sizes:
            return f'message {key} completed but never generated'
        merged = merge_intervals(covered[key])
        if merged != [Interval(0, sizes[key])]:
            return f'message {key} completed with coverage {merged}'


def _check_medium(trace):
    busy = defaultdict(list)
    for rec in trace.events('tx_start'):
        busy[(rec['node'], rec['tech'])].append((rec['t'], rec['end']))
    for key, spans in sorted(busy.items()):
        spans.sort()
        for (_, e1), (s2, _) in zip(spans, spans[1:]):
            if s2 < e1 - TOL:
                return (f'node {key[0]} overlaps transmissions on {key[1]} at '
                        f't={s2:.3f}')


def _check_backlog(trace):
    for rec in trace.events('tx_start', 'alloc', 'estimate'):
        backlog = rec.get('backlog')
        if backlog is not None and backlog < 0:
            return f'negative backlog (record {rec["seq"]})'


def _check_metric_bounds(trace):
    scalars = compute_metrics(trace).scalars()
    rho_s = scalars['rho_s']
    if rho_s is not None and not 0 <= rho_s <= 1:
        return f'success rate {rho_s} outside [0, 1]'
    for name, value in scalars.items():
        if value is not None and value < 0:
            return f'{name} is negative'
    if scalars['rho_g'] < scalars['rho_g_unique'] - TOL:
        return 'goodput below its unique-bytes variant'


def _record_piggyback(pb):
    if pb is None:
        return None
    pairs = lambda v: None if v is None else tuple(tuple(e) for e in v)
    return Piggyback(backlog=pb['P'], granted=pairs(pb['F']),
                     upstream_shares=pairs(pb['Fu']),
                     upstream=None if pb['Y'] is None else tuple(pb['Y']))


def _record_fragments(rec):
    frags = []
    for k, (origin, msg_id, offset, length, total, path, _) in enumerate(
            rec['frags']):
        pb = _record_piggyback(rec.get('pb')) if k == 0 else None
        frags.append(Fragment(origin, msg_id, offset, length, total,
                              tuple(path), pb))
    return frags


def _check_wire_format(trace):
    for rec in trace.events('tx_start'):
        if rec['kind'] != 'data':
            continue
        frags = _record_fragments(rec)
        try:
            wire = encode_datagram(frags)
            decoded = [f for f, _ in decode_datagram(wire)]
        except DatagramFormatError as e:
            return f'datagram {rec["dg"]} does not encode ({e})'
        if 8 * len(wire) != rec['bits']:
            return (f'datagram {rec["dg"]} is {rec["bits"]} bits in the '
                    f'trace but {8 * len(wire)} on the wire')
        if ([(f.key, f.path) for f in decoded] !=
                [(f.key, f.path) for f in frags]):
            return f'datagram {rec["dg"]} changes when decoded'


def _check_metrics_table(trace, table):
    header = trace.header
    rows = table[(table['config_hash'] == header['config_hash']) &
                 (table['seed'] == header['seed']) &
                 (table['protocol'] == header['protocol']) &
                 (table['mac'] == header['mac'])]
    if rows.empty:
        return 'run missing from metrics table'
    stored = dict(zip(rows['metric'], rows['value']))
    for name, value in compute_metrics(trace).scalars().items():
        if name not in stored:
            return f'{name} missing from metrics table'
        if value is None:
            if not pd.isna(stored[name]):
                return (f'{name} is undefined but {stored[name]} in metrics '
                        f'table')
        elif pd.isna(stored[name]) or not math.isclose(
                stored[name], value, rel_tol=1e-9, abs_tol=TOL):
            return (f'{name} is {stored[name]} in metrics table but {value} '
                    f'in trace')


CHECKS = (('ordering', _check_ordering),
          ('loop_freedom', _check_loop_freedom),
          ('wire_format', _check_wire_format),
          ('allocation_constraints', _check_allocations),
          ('causality', _check_causality),
          ('reassembly', _check_reassembly),
          ('medium_exclusivity', _check_medium),
          ('non_negative_backlog', _check_backlog),
          ('metric_bounds', _check_metric_bounds))


def _run_check(name, check, *args):
    try:
        detail = check(*args)
    except (KeyError, TypeError, ValueError, IndexError) as e:
        detail = f'malformed record ({e!r})'
    return AuditCheck(name, detail is None, detail)


def audit_trace(trace, path=None, metrics_table=None):
    """Run every invariant check on `trace`.

    Parameters
    ----------
    trace : TraceLog
        Trace of one run.

    path : pathlib.Path, optional
        Where `trace` was read from.

    metrics_table : pandas.DataFrame, optional
        Metric table of the batch, as returned by
        :func:`~omrsim.io.tables.load_metrics_table`. If given, the metrics
        recomputed from `trace` must match the stored rows.

    Returns
    -------
    RunAudit
    """
    checks = [_run_check(name, check, trace) for name, check in CHECKS]
    if metrics_table is not None:
        checks.append(_run_check('metrics_table', _check_metrics_table, trace,
                                 metrics_table))
    return RunAudit(path, checks)


def _load_batch_table(fpath, cache):
    """Return the metric table next to trace `fpath`, None if there is none,
    or an error message if it cannot be read."""
    table_path = Path(fpath).parent.parent / 'metrics.csv'
    if table_path not in cache:
        table = None
        if table_path.exists():
            try:
                table = load_metrics_table(table_path)
            except (OSError, ValueError) as e:
                logger.warning(f'Cannot read metrics table "{table_path}". '
                               f'{e}')
                table = f'unreadable metrics table ({e})'
        cache[table_path] = table
    return cache[table_path]


def verify(target):
    """Audit stored traces.

    Batch outputs also have their ``metrics.csv`` checked against the metrics
    recomputed from each trace.

    Parameters
    ----------
    target : RunConfig or pathlib.Path
        Configuration whose output directory holds the traces, or a
        directory searched recursively for ``trace_*.log`` files.

    Returns
    -------
    VerifyReport
    """
    if hasattr(target, 'output_dir'):
        target = target.output_dir or Path.cwd()
    root = Path(target)
    report = VerifyReport()
    fpaths = sorted(set(root.rglob('trace_*.log')) |
                    set(root.rglob('trace_*.log.gz')))
    tables = {}
    for fpath in fpaths:
        try:
            trace = load_trace(fpath)
        except TraceFormatError as e:
            logger.warning(f'Skipping corrupt trace. {e}')
            report.corrupt.append(fpath)
            continue
        table = _load_batch_table(fpath, tables)
        if isinstance(table, str):
            audit = audit_trace(trace, fpath)
            audit.checks.append(AuditCheck('metrics_table', False, table))
        else:
            audit = audit_trace(trace, fpath, table)
        if not audit.passed:
            logger.debug(f'Audit failed for "{fpath}".')
        report.runs.append(audit)
    return report
