"""Bit-wise conversion between the TLB and SM two-line formats.

Both directions preserve the per-position ternary symbol. The don't-care
sign bit of a zero-magnitude SM position is resolved as s = n, and the
TLB pair produced from SM is canonical: (1,1) never appears.
"""

import numpy as np

from .streams import SmStream, TlbStream

__all__ = ["tlb_to_sm_bit", "sm_to_tlb_bit", "tlb_to_sm", "sm_to_tlb"]


def tlb_to_sm_bit(p, n):
    """(pos, neg) bit pair to (sign, magnitude); magnitude is p XOR n."""
    return n, p ^ n


def sm_to_tlb_bit(s, m):
    """(sign, magnitude) bit pair to canonical (pos, neg)."""
    return m & (s ^ 1), m & s


def tlb_to_sm(stream):
    """Position-wise TLB to SM conversion; decoded value preserved exactly."""
    pos = stream.pos.bits
    neg = stream.neg.bits
    return SmStream(neg, pos ^ neg)


def sm_to_tlb(stream):
    """Position-wise SM to TLB conversion; output pairs are canonical."""
    sign = stream.sign.bits
    mag = stream.magnitude.bits
    return TlbStream(mag & (sign ^ np.uint8(1)), mag & sign)
