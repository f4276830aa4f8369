# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Functions for encoding/decoding fragments in their wire format.

Layout of one fragment (big-endian, byte aligned)::

    origin        u8
    msg_id        u16
    offset        u32
    length        u32     (bits)
    total_length  u32     (bits)
    path_len      u8
    path          u8 * path_len
    flags         u8      (1: P, 2: granted F, 4: upstream F, 8: Y)
    [P]           u8      (log-scale backlog code)
    [F]           u8 count, (u8 node, u8 share) * count
    [Fu]          u8 count, (u8 node, u8 share) * count
    [Y]           u8 count, u8 * count
    payload       length / 8 bytes

A datagram is the concatenation of its fragments.
"""
import struct

from ..protocol import (Fragment, Piggyback, dequantize_backlog,
                        dequantize_share, quantize_backlog, quantize_share)

__all__ = ['DatagramFormatError', 'decode_datagram', 'decode_fragment',
           'encode_datagram', 'encode_fragment']


_FIXED = struct.Struct('!BHIIIB')
FLAG_P = 1
FLAG_F = 2
FLAG_FU = 4
FLAG_Y = 8


class DatagramFormatError(Exception):
    """Bytes do not form a valid fragment."""


def _u8(value, what):
    if not 0 <= value <= 0xFF:
        raise DatagramFormatError(f'{what} {value} does not fit in 8 bits.')
    return value


def _encode_shares(shares, what):
    out = bytearray([_u8(len(shares), f'{what} count')])
    for node, share in shares:
        out += bytes([_u8(node, 'Node id'), quantize_share(share)])
    return out


def encode_fragment(fragment, payload=None):
    """Encode `fragment` to bytes.

    Parameters
    ----------
    fragment : Fragment
        Fragment to encode. Its length must be a whole number of bytes.

    payload : bytes, optional
        Fragment payload. If None, zero bytes are written.
        (Default: None)

    Returns
    -------
    bytes
    """
    if fragment.length % 8 or fragment.offset % 8:
        raise DatagramFormatError(
            f'Fragment {fragment.key} is not byte aligned.')
    n_bytes = fragment.length // 8
    if payload is None:
        payload = bytes(n_bytes)
    if len(payload) != n_bytes:
        raise DatagramFormatError(
            f'Payload has {len(payload)} bytes; fragment holds {n_bytes}.')
    if fragment.msg_id > 0xFFFF:
        raise DatagramFormatError(
            f'Message id {fragment.msg_id} does not fit in 16 bits.')
    out = bytearray(_FIXED.pack(
        _u8(fragment.origin, 'Origin'), fragment.msg_id, fragment.offset,
        fragment.length, fragment.total_length,
        _u8(len(fragment.path), 'Path length')))
    out += bytes(_u8(n, 'Node id') for n in fragment.path)
    pb = fragment.piggyback
    flags = 0
    body = bytearray()
    if pb is not None:
        if pb.backlog is not None:
            flags |= FLAG_P
            body.append(quantize_backlog(pb.backlog))
        if pb.granted is not None:
            flags |= FLAG_F
            body += _encode_shares(pb.granted, 'Share')
        if pb.upstream_shares is not None:
            flags |= FLAG_FU
            body += _encode_shares(pb.upstream_shares, 'Share')
        if pb.upstream is not None:
            flags |= FLAG_Y
            body.append(_u8(len(pb.upstream), 'Upstream count'))
            body += bytes(_u8(n, 'Node id') for n in pb.upstream)
    out.append(flags)
    out += body
    out += payload
    return bytes(out)


class _Reader:
    def __init__(self, buf, pos=0):
        self.buf = buf
        self.pos = pos

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise DatagramFormatError(
                f'Truncated fragment: need {n} bytes at offset {self.pos}, '
                f'have {len(self.buf) - self.pos}.')
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self):
        return self.take(1)[0]

    def shares(self):
        count = self.u8()
        raw = self.take(2 * count)
        return tuple((raw[2 * k], dequantize_share(raw[2 * k + 1]))
                     for k in range(count))


def decode_fragment(buf, pos=0):
    """Decode one fragment starting at byte `pos` of `buf`.

    Returns
    -------
    fragment : Fragment

    payload : bytes

    end : int
        Offset one past the last byte consumed.

    Raises
    ------
    DatagramFormatError
        If `buf` is truncated or inconsistent.
    """
    reader = _Reader(buf, pos)
    origin, msg_id, offset, length, total, path_len = _FIXED.unpack(
        reader.take(_FIXED.size))
    path = tuple(reader.take(path_len))
    flags = reader.u8()
    if flags & ~(FLAG_P | FLAG_F | FLAG_FU | FLAG_Y):
        raise DatagramFormatError(f'Unknown piggyback flags: {flags:#x}')
    piggyback = None
    if flags:
        kwargs = {}
        if flags & FLAG_P:
            kwargs['backlog'] = dequantize_backlog(reader.u8())
        if flags & FLAG_F:
            kwargs['granted'] = reader.shares()
        if flags & FLAG_FU:
            kwargs['upstream_shares'] = reader.shares()
        if flags & FLAG_Y:
            kwargs['upstream'] = tuple(reader.take(reader.u8()))
        piggyback = Piggyback(**kwargs)
    if length % 8:
        raise DatagramFormatError(f'Fragment length {length} is not byte '
                                  f'aligned.')
    payload = bytes(reader.take(length // 8))
    try:
        frag = Fragment(origin, msg_id, offset, length, total, path,
                        piggyback)
    except ValueError as e:
        raise DatagramFormatError(str(e)) from e
    return frag, payload, reader.pos


def encode_datagram(fragments, payloads=None):
    """Concatenate the encodings of `fragments`."""
    if payloads is None:
        payloads = [None] * len(fragments)
    return b''.join(encode_fragment(f, p) for f, p in zip(fragments, payloads))


def decode_datagram(buf):
    """Decode every fragment in `buf`.

    Returns
    -------
    list of tuple
        ``(fragment, payload)`` pairs.
    """
    out = []
    pos = 0
    while pos < len(buf):
        frag, payload, pos = decode_fragment(buf, pos)
        out.append((frag, payload))
    return out
