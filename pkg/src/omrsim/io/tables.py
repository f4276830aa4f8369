# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Functions for reading/writing metric tables as CSV."""
from pathlib import Path

import pandas as pd

__all__ = ['DIST_COLUMNS', 'METRIC_COLUMNS', 'distribution_path',
           'load_metrics_table', 'metric_rows', 'write_distribution_table',
           'write_metrics_table']


METRIC_COLUMNS = ['config_hash', 'seed', 'protocol', 'mac', 'metric', 'value']
DIST_COLUMNS = ['value', 'probability']


def metric_rows(report, config_hash, seed, protocol, mac):
    """Flatten `report` into rows of :data:`METRIC_COLUMNS`.

    Undefined metrics get an empty value.
    """
    return [{'config_hash': config_hash, 'seed': seed, 'protocol': protocol,
             'mac': mac, 'metric': name, 'value': value}
            for name, value in report.scalars().items()]


def write_metrics_table(fpath, rows):
    """Write metric `rows` to CSV file `fpath`.

    Rows are sorted by protocol, MAC, seed and metric so that the output does
    not depend on the order runs completed in.
    """
    df = pd.DataFrame.from_records(list(rows), columns=METRIC_COLUMNS)
    df = df.sort_values(['protocol', 'mac', 'seed', 'metric'], kind='stable')
    df.to_csv(fpath, index=False)


def load_metrics_table(fpath):
    """Load metric table written by :func:`write_metrics_table`."""
    df = pd.read_csv(fpath, dtype={'config_hash': str})
    missing = [c for c in METRIC_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f'{fpath}: missing columns {missing}.')
    return df


def distribution_path(out_dir, metric, protocol, mac):
    """Path of the distribution table of `metric` for one protocol/MAC
    pair."""
    return Path(out_dir, f'dist_{metric}_{protocol}_{mac}.csv')


def write_distribution_table(fpath, table):
    """Write two-column distribution `table` to CSV file `fpath`."""
    table = pd.DataFrame(table, columns=DIST_COLUMNS)
    table.to_csv(fpath, index=False)
