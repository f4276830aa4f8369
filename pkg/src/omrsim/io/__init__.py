# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Functions for reading/writing traces, topology documents, wire datagrams
and metric tables."""
from .datagram import (DatagramFormatError, decode_datagram, decode_fragment,
                       encode_datagram, encode_fragment)
from .tables import (load_metrics_table, write_distribution_table,
                     write_metrics_table)
from .topology_doc import (graph_from_document, graph_to_document,
                           load_topology_document, write_topology_document)
from .trace import TraceFormatError, TraceLog, load_trace, write_trace

__all__ = ['DatagramFormatError', 'TraceFormatError', 'TraceLog',
           'decode_datagram', 'decode_fragment', 'encode_datagram',
           'encode_fragment', 'graph_from_document', 'graph_to_document',
           'load_metrics_table', 'load_trace', 'load_topology_document',
           'write_distribution_table', 'write_metrics_table',
           'write_topology_document', 'write_trace']
