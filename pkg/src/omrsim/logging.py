# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Logging for simulation runs and batches.

The command line tool configures the root logger once through
:func:`setup_logger`; library modules only ever call :func:`getLogger`.
Records may carry two pieces of simulation context:

- ``sim_time``, the simulated clock, attached by :class:`SimClockFilter`
  while a :class:`~omrsim.simkernel.Simulator` is running
- a ``[seed=.. protocol/mac]`` prefix added by :class:`CellLoggerAdapter`
  for messages about a single batch cell
"""
import logging
import sys

from tqdm import tqdm

__all__ = ['getLogger', 'setup_logger', 'CellLoggerAdapter', 'CustomFormatter',
           'CustomStreamHandler', 'SimClockFilter']


ERROR = logging.ERROR
WARNING = logging.WARNING
INFO = logging.INFO
DEBUG = logging.DEBUG

# Message prefix per level; INFO is printed bare.
_LEVEL_PREFIX = {ERROR: 'ERROR: ', WARNING: 'WARNING: ', INFO: '',
                 DEBUG: 'DEBUG: '}


class CustomStreamHandler(logging.Handler):
    """Handler splitting records between two streams by level.

    Records at INFO or below go to `stdout`, everything louder to `stderr`.
    Output goes through ``tqdm.write`` so an active progress bar is redrawn
    below the message.

    Parameters
    ----------
    stdout, stderr : file-like, optional
        Destination streams.
        (Default: ``sys.stdout``, ``sys.stderr``)

    formatter : logging.Formatter, optional
        Formatter for emitted records.
    """
    def __init__(self, stdout=None, stderr=None, formatter=None):
        super().__init__()
        self.stdout = sys.stdout if stdout is None else stdout
        self.stderr = sys.stderr if stderr is None else stderr
        self.setFormatter(formatter)

    def stream_for(self, record):
        """Return the stream `record` is written to."""
        return self.stdout if record.levelno <= INFO else self.stderr

    def flush(self):
        self.stdout.flush()
        self.stderr.flush()

    def emit(self, record):
        try:
            tqdm.write(self.format(record), file=self.stream_for(record))
            self.flush()
        except (KeyboardInterrupt, SystemExit):
            raise
        except Exception:
            self.handleError(record)


class CustomFormatter(logging.Formatter):
    """Formatter that prefixes messages with their level name.

    INFO messages are left bare; other levels get ``LEVEL: ``.

    Parameters
    ----------
    include_date : bool, optional
        If True, prepend a timestamp.
        (Default: False)

    include_name : bool, optional
        If True, prepend the logger name.
        (Default: False)

    include_clock : bool, optional
        If True, prepend ``[t=..]`` for records stamped by
        :class:`SimClockFilter`.
        (Default: False)
    """
    def __init__(self, include_date=False, include_name=False,
                 include_clock=False):
        super().__init__(datefmt='%Y-%m-%d %H:%M:%S')
        self.include_date = include_date
        self.include_name = include_name
        self.include_clock = include_clock

    def format(self, record):
        record.message = record.getMessage()
        parts = []
        sim_time = getattr(record, 'sim_time', None)
        if self.include_clock and sim_time is not None:
            parts.append(f'[t={sim_time:.3f}]')
        if self.include_date:
            parts.append(self.formatTime(record, self.datefmt))
        if self.include_name:
            parts.append(record.name)
        prefix = _LEVEL_PREFIX.get(record.levelno, f'{record.levelname}: ')
        parts.append(prefix + record.message)
        text = ' '.join(parts)
        if record.exc_info:
            text = f'{text}\n{self.formatException(record.exc_info)}'
        return text


class SimClockFilter(logging.Filter):
    """Stamp records with the simulated time as ``record.sim_time``.

    Parameters
    ----------
    clock : callable
        Returns the current simulated time in seconds.
    """
    def __init__(self, clock):
        super().__init__()
        self.clock = clock

    def filter(self, record):
        record.sim_time = self.clock()
        return True


class CellLoggerAdapter(logging.LoggerAdapter):
    """Logger adapter for messages about one batch cell.

    >>> log = CellLoggerAdapter(getLogger(), seed=3, protocol='omr-ff',
    ...                         mac='ideal')
    >>> log.warning('run failed')  # WARNING: [seed=3 omr-ff/ideal] run failed
    """
    def __init__(self, logger, seed, protocol, mac):
        super().__init__(logger, {'seed': seed, 'protocol': protocol,
                                  'mac': mac})

    def process(self, msg, kwargs):
        cell = self.extra
        return (f'[seed={cell["seed"]} {cell["protocol"]}/{cell["mac"]}] '
                f'{msg}', kwargs)


def getLogger(name=None):
    """Return logger `name`, or the root logger if `name` is None."""
    return logging.getLogger(name)


def setup_logger(logger, level=INFO, include_date=False, include_name=False,
                 output_to_stdout=False):
    """Replace the handlers of `logger` with a single
    :class:`CustomStreamHandler`.

    Meant for the root logger. At DEBUG level messages logged during a run
    also show the simulated clock.

    Parameters
    ----------
    logger : logging.Logger
        Logger to configure.

    level : int, optional
        Logging level.
        (Default: INFO)

    include_date, include_name : bool, optional
        Passed to :class:`CustomFormatter`.
        (Default: False)

    output_to_stdout : bool, optional
        If True, send every level to STDOUT.
        (Default: False)
    """
    logger.setLevel(level)
    formatter = CustomFormatter(include_date, include_name,
                                include_clock=level <= DEBUG)
    stderr = sys.stdout if output_to_stdout else sys.stderr
    logger.handlers = [CustomStreamHandler(sys.stdout, stderr, formatter)]
