#!/usr/bin/env python3
# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Simulate multi-modal converge-cast routing.

Verbs:

- ``run``: run every (seed, protocol, MAC) cell of a configuration;
- ``verify``: audit stored traces;
- ``preset list``: list named topologies;
- ``preset dump NAME``: print a named topology as a YAML graph document.

Every flag may also be given through an ``OMRSIM_<FLAG>`` environment
variable (e.g., ``OMRSIM_SEED=1..10``); flags on the command line win.
"""
import argparse
import os
from pathlib import Path
import sys

import yaml

from omrsim import __version__ as VERSION
from omrsim.batch import run_batch, verify
from omrsim.config import ConfigError, load_config_file
from omrsim.io.topology_doc import graph_to_document, write_topology_document
from omrsim.logging import getLogger, setup_logger, DEBUG, WARNING
from omrsim.presets import (PRESETS, UnknownPresetError, list_presets,
                            preset)


logger = getLogger()

ENV_PREFIX = 'OMRSIM_'


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _split(value):
    if value is None:
        return None
    return tuple(v.strip() for v in value.split(',') if v.strip())


def _add_run_args(parser):
    parser.add_argument(
        '--config', metavar='CONFIG', type=Path, dest='config_path',
        default=_env('CONFIG'),
        help='YAML run configuration (Default: $OMRSIM_CONFIG)')
    parser.add_argument(
        '--seed', metavar='SEEDS', default=_env('SEED'),
        help='seed or inclusive range "a..b"; overrides the configuration')
    parser.add_argument(
        '--protocol', metavar='PROTOCOLS', default=_env('PROTOCOL'),
        help='comma-separated routing policies; overrides the configuration')
    parser.add_argument(
        '--mac', metavar='MACS', default=_env('MAC'),
        help='comma-separated medium models; overrides the configuration')
    parser.add_argument(
        '--out', metavar='OUTPUT-DIR', type=Path, dest='output_dir',
        default=_env('OUT'),
        help='output directory (Default: configuration, then current '
             'directory)')
    parser.add_argument(
        '--workers', '-j', metavar='INT', type=int,
        default=_env('WORKERS'),
        help='number of parallel runs (Default: configuration)')


def get_parser():
    """Return `argparse.ArgumentParser`."""
    parser = argparse.ArgumentParser(
        description='Simulate multi-modal converge-cast routing in '
                    'underwater networks.',
        epilog=f'presets: {", ".join(PRESETS)}',
        add_help=True)
    parser.add_argument(
        '--debug', default=False, action='store_true',
        help='enable DEBUG mode')
    parser.add_argument(
        '--disable-progress', default=False, action='store_true',
        help='disable progress bar')
    parser.add_argument(
        '--version', action='version', version='%(prog)s ' + VERSION)
    verbs = parser.add_subparsers(dest='verb', metavar='VERB')

    run = verbs.add_parser('run', help='run a batch')
    _add_run_args(run)

    ver = verbs.add_parser('verify', help='audit stored traces')
    ver.add_argument(
        'trace_dir', metavar='TRACE-DIR', type=Path, nargs='?',
        help='directory holding traces (Default: output directory of '
             '--config)')
    ver.add_argument(
        '--config', metavar='CONFIG', type=Path, dest='config_path',
        default=_env('CONFIG'), help='YAML run configuration')
    ver.add_argument(
        '--out', metavar='OUTPUT-DIR', type=Path, dest='output_dir',
        default=_env('OUT'), help='directory holding traces')

    pre = verbs.add_parser('preset', help='inspect named topologies')
    pre_verbs = pre.add_subparsers(dest='preset_verb', metavar='ACTION')
    pre_verbs.add_parser('list', help='list presets')
    dump = pre_verbs.add_parser('dump', help='print preset as YAML')
    dump.add_argument('name', metavar='NAME', help='preset name')
    dump.add_argument(
        '--seed', metavar='SEED', type=int, default=int(_env('SEED', 0)),
        help='seed for randomly drawn presets (Default: %(default)s)')
    dump.add_argument(
        '--out', metavar='FILE', type=Path, dest='output_path',
        help='write to FILE instead of STDOUT')
    if len(sys.argv) == 1:
        parser.print_help()
        parser.exit()
    return parser


def _load(args):
    if args.config_path is None:
        raise ConfigError('<cli>', 'no configuration given; use --config.')
    config = load_config_file(args.config_path)
    return config.with_overrides(
        seed=getattr(args, 'seed', None),
        protocols=_split(getattr(args, 'protocol', None)),
        macs=_split(getattr(args, 'mac', None)),
        output_dir=(None if args.output_dir is None
                    else str(args.output_dir)),
        workers=(None if getattr(args, 'workers', None) is None
                 else int(args.workers)))


def cmd_run(args):
    config = _load(args)
    if args.debug and config.workers > 1:
        logger.debug(
            'Flag "--workers" is ignored for debug mode. Using '
            'single-threaded implementation.')
        config = config.with_overrides(workers=1)
    logger.debug(f'COMMAND LINE CALL: {" ".join(sys.argv)}')
    logger.debug(f'Config hash: {config.config_hash}')
    result = run_batch(config, disable_progress=args.disable_progress)
    return 0 if result.ok else 1


def cmd_verify(args):
    if args.trace_dir is not None:
        target = args.trace_dir
    elif args.output_dir is not None:
        target = args.output_dir
    else:
        target = _load(args)
    report = verify(target)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def cmd_preset(args):
    if args.preset_verb == 'dump':
        graph = preset(args.name, args.seed)
        if args.output_path is None:
            sys.stdout.write(
                yaml.safe_dump(graph_to_document(graph), sort_keys=False))
        else:
            write_topology_document(args.output_path, graph)
    else:
        for name in list_presets():
            print(name)
    return 0


def main():
    parser = get_parser()
    args = parser.parse_args()

    # Set up logger.
    log_level = DEBUG if args.debug else WARNING
    setup_logger(logger, level=log_level)
    if args.debug:
        args.disable_progress = True

    commands = {'run': cmd_run, 'verify': cmd_verify, 'preset': cmd_preset}
    if args.verb not in commands:
        parser.print_help()
        sys.exit(1)
    try:
        status = commands[args.verb](args)
    except (ConfigError, UnknownPresetError) as e:
        logger.error(str(e))
        status = 1
    sys.exit(status)


if __name__ == '__main__':
    main()
