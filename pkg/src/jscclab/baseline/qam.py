"""Gray-labeled QAM mapping and exact soft demapping for the separation
baseline. Shares constellation geometry with the learned pipeline via
make_qam; bit labels are per-axis Gray codes, I bits first.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from ..constellation import Constellation


def gray(i: int) -> int:
    return i ^ (i >> 1)


def gray_inverse(g: int) -> int:
    i = 0
    while g:
        i ^= g
        g >>= 1
    return i


def bits_per_symbol(c: Constellation) -> int:
    return int(round(math.log2(c.M)))


def symbol_labels(c: Constellation) -> np.ndarray:
    """(M, bits) bit labels; constellation index j = i_Q * L + i_I (real
    axis fastest), label = gray(i_I) bits then gray(i_Q) bits."""
    L = int(round(math.sqrt(c.M)))
    half = bits_per_symbol(c) // 2
    labels = np.zeros((c.M, 2 * half), dtype=np.uint8)
    for j in range(c.M):
        i_i, i_q = j % L, j // L
        v = (gray(i_i) << half) | gray(i_q)
        for b in range(2 * half):
            labels[j, b] = (v >> (2 * half - 1 - b)) & 1
    return labels


def qam_map(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """Bits -> (n_sym, 2) symbols. Length must divide by log2(M)."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    bps = bits_per_symbol(c)
    if len(bits) % bps:
        raise ValueError(f"bit count {len(bits)} not divisible by {bps}")
    L = int(round(math.sqrt(c.M)))
    half = bps // 2
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(half - 1, -1, -1)
    v_i = groups[:, :half] @ weights
    v_q = groups[:, half:] @ weights
    inv = np.array([gray_inverse(g) for g in range(L)])
    lookup = np.zeros(L, dtype=np.int64)
    lookup[[gray(i) for i in range(L)]] = np.arange(L)
    idx = lookup[v_q] * L + lookup[v_i]
    return c.points[idx].copy()


def qam_demap_llr(y: np.ndarray, c: Constellation, sigma2: float) -> np.ndarray:
    """Exact per-bit LLRs, positive meaning bit 0 is more likely:
    LLR_b = ln sum_{c: b=0} exp(-|y-c|^2 / sigma2) - ln sum_{c: b=1} ...
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1, 2)
    diff = y[:, None, :] - c.points[None, :, :]
    metric = -np.sum(diff * diff, axis=2) / sigma2  # (n_sym, M)
    labels = symbol_labels(c)                        # (M, bps)
    bps = labels.shape[1]
    llrs = np.empty((y.shape[0], bps))
    for b in range(bps):
        zero = labels[:, b] == 0
        llrs[:, b] = (logsumexp(metric[:, zero], axis=1)
                      - logsumexp(metric[:, ~zero], axis=1))
    return llrs.reshape(-1)
