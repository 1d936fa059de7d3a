"""Learned constellation mapping trained end to end through an AWGN channel.

The encoder emits per-position categorical transition probabilities over a
BPSK or rectangular QAM constellation; symbols are drawn with Gumbel-Max and
trained through a Gumbel-Softmax relaxation.
"""
from .constellation import Constellation, Scheme, make_bpsk, make_constellation, make_rect_qam
from .kernels import BACKEND

__all__ = ["BACKEND", "Constellation", "Scheme", "make_bpsk", "make_constellation",
           "make_rect_qam"]
__version__ = "0.1.0"
