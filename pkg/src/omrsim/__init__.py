# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
__version__ = '0.1.0'
