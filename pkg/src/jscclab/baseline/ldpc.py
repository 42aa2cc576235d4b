"""Regular LDPC codes: pseudorandom girth-conditioned construction,
systematic encoding via GF(2) elimination, flooding sum-product decoding,
and alist interchange.

Construction is column-by-column with degree balancing; a candidate
column is rejected if it would share two rows with an earlier column
(which would close a 4-cycle). Everything is seeded, so shipped matrices
are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

_LLR_CLIP = 30.0

# rate label -> shipped alist file (all n = 1024, column weight 3, seed 1)
_SHIPPED = {
    "1/3": "ldpc_n1024_r13.alist",
    "1/2": "ldpc_n1024_r12.alist",
    "2/3": "ldpc_n1024_r23.alist",
}


@dataclass
class LdpcCode:
    H: np.ndarray            # (m, n) uint8 parity-check matrix
    info_cols: np.ndarray    # (n - m,) column indices carrying info bits
    parity_cols: np.ndarray  # (m,) column indices carrying parity bits
    A: np.ndarray            # (m, n - m) reduced parity block: p = A @ u mod 2

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def k_info(self) -> int:
        return self.n - self.m

    @property
    def rate(self) -> float:
        return self.k_info / self.n


def _gf2_systematize(H: np.ndarray):
    """Row-reduce a full-rank H over GF(2); returns (info_cols,
    parity_cols, A) with the reduced matrix equal to identity on
    parity_cols and A on info_cols."""
    R = H.copy().astype(np.uint8)
    m, n = R.shape
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        hit = np.nonzero(R[row:, col])[0]
        if hit.size == 0:
            continue
        piv = row + hit[0]
        if piv != row:
            R[[row, piv]] = R[[piv, row]]
        elim = np.nonzero(R[:, col])[0]
        elim = elim[elim != row]
        R[elim] ^= R[row]
        pivots.append(col)
        row += 1
    if row < m:
        raise ValueError("parity-check matrix is rank deficient")
    parity_cols = np.array(pivots)
    info_cols = np.setdiff1d(np.arange(n), parity_cols)
    A = R[:, info_cols]
    return info_cols, parity_cols, A


def make_regular_ldpc(n: int, m: int, seed: int = 0, col_weight: int = 3,
                      max_tries: int = 50) -> LdpcCode:
    """Pseudorandom (col_weight)-regular-column code with 4-cycle
    avoidance and near-uniform row weights."""
    for attempt in range(max_tries):
        rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), attempt]))
        H = np.zeros((m, n), dtype=np.uint8)
        row_deg = np.zeros(m, dtype=np.int64)
        ok = True
        for col in range(n):
            placed = None
            for _ in range(200):
                # favor low-degree rows to keep row weights even
                noise = rng.random(m)
                cand = np.argsort(row_deg + 0.5 * noise)[:col_weight]
                trial = np.zeros(m, dtype=np.uint8)
                trial[cand] = 1
                overlap = trial @ H[:, :col]
                if col == 0 or overlap.max() <= 1:
                    placed = cand
                    break
            if placed is None:
                ok = False
                break
            H[placed, col] = 1
            row_deg[placed] += 1
        if not ok:
            continue
        try:
            info_cols, parity_cols, A = _gf2_systematize(H)
        except ValueError:
            continue
        return LdpcCode(H=H, info_cols=info_cols, parity_cols=parity_cols, A=A)
    raise RuntimeError(f"could not construct an ({n}, {m}) code in {max_tries} tries")


def ldpc_encode(bits: np.ndarray, code: LdpcCode) -> np.ndarray:
    """Systematic encoding of k_info payload bits; short payloads are
    zero-padded. The result satisfies H @ c = 0 mod 2."""
    u = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if len(u) > code.k_info:
        raise ValueError(f"payload of {len(u)} bits exceeds k = {code.k_info}")
    if len(u) < code.k_info:
        u = np.concatenate([u, np.zeros(code.k_info - len(u), dtype=np.uint8)])
    p = (code.A.astype(np.int64) @ u.astype(np.int64)) % 2
    c = np.zeros(code.n, dtype=np.uint8)
    c[code.info_cols] = u
    c[code.parity_cols] = p
    return c


def syndrome_ok(c: np.ndarray, code: LdpcCode) -> bool:
    return not np.any((code.H @ c.astype(np.int64)) % 2)


def ldpc_decode(llrs: np.ndarray, code: LdpcCode,
                max_iters: int = 50) -> tuple[np.ndarray, bool]:
    """Flooding-schedule sum-product decoding of per-bit LLRs
    (positive = bit 0 more likely). Returns (hard bits, converged)."""
    llrs = np.clip(np.asarray(llrs, dtype=np.float64), -_LLR_CLIP, _LLR_CLIP)
    if llrs.shape != (code.n,):
        raise ValueError(f"expected {code.n} LLRs, got shape {llrs.shape}")
    rows, cols = np.nonzero(code.H)
    q = llrs[cols].copy()          # variable -> check messages, edge order
    r = np.zeros_like(q)           # check -> variable messages
    hard = (llrs < 0).astype(np.uint8)
    n_edges = len(rows)
    row_index = rows               # sorted by construction of np.nonzero
    for _ in range(max_iters):
        # check update: extrinsic tanh product per row
        t = np.tanh(np.clip(q, -_LLR_CLIP, _LLR_CLIP) / 2.0)
        t = np.where(np.abs(t) < 1e-300, np.sign(t + 1e-300) * 1e-300, t)
        logmag = np.log(np.abs(t))
        sign = np.where(t < 0, -1.0, 1.0)
        sum_log = np.zeros(code.m)
        np.add.at(sum_log, row_index, logmag)
        prod_sign = np.ones(code.m)
        neg_count = np.zeros(code.m, dtype=np.int64)
        np.add.at(neg_count, row_index, (sign < 0).astype(np.int64))
        prod_sign = np.where(neg_count % 2, -1.0, 1.0)
        ex_mag = np.exp(np.clip(sum_log[row_index] - logmag, -700, 0.0))
        ex_sign = prod_sign[row_index] * sign
        r = 2.0 * np.arctanh(np.clip(ex_sign * ex_mag, -1 + 1e-15, 1 - 1e-15))
        # variable update
        total = llrs.copy()
        np.add.at(total, cols, r)
        q = np.clip(total[cols] - r, -_LLR_CLIP, _LLR_CLIP)
        hard = (total < 0).astype(np.uint8)
        if syndrome_ok(hard, code):
            return hard, True
    return hard, False


# ----- alist interchange -----

def to_alist(code: LdpcCode) -> str:
    """Standard alist text for the parity-check matrix (variables are
    columns, checks are rows)."""
    H = code.H
    m, n = H.shape
    col_lists = [np.nonzero(H[:, j])[0] + 1 for j in range(n)]
    row_lists = [np.nonzero(H[i, :])[0] + 1 for i in range(m)]
    dv = max(len(c) for c in col_lists)
    dc = max(len(r) for r in row_lists)
    lines = [f"{n} {m}", f"{dv} {dc}",
             " ".join(str(len(c)) for c in col_lists),
             " ".join(str(len(r)) for r in row_lists)]
    for lst, deg in ((col_lists, dv), (row_lists, dc)):
        for entry in lst:
            padded = list(entry) + [0] * (deg - len(entry))
            lines.append(" ".join(str(v) for v in padded))
    return "\n".join(lines) + "\n"


def from_alist(text: str) -> LdpcCode:
    tokens = text.split()
    it = iter(tokens)
    n, m = int(next(it)), int(next(it))
    dv, _dc = int(next(it)), int(next(it))
    for _ in range(n + m):  # per-column and per-row degrees, implied by entries
        next(it)
    H = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        for _ in range(dv):
            v = int(next(it))
            if v:
                H[v - 1, j] = 1
    info_cols, parity_cols, A = _gf2_systematize(H)
    return LdpcCode(H=H, info_cols=info_cols, parity_cols=parity_cols, A=A)


def shipped_code(rate: str = "1/2") -> LdpcCode:
    """One of the packaged n = 1024 parity-check matrices ('1/3', '1/2',
    '2/3'), loaded from its alist file."""
    if rate not in _SHIPPED:
        raise ValueError(f"no shipped code at rate {rate!r}; have {sorted(_SHIPPED)}")
    text = (resources.files(__package__) / "matrices" / _SHIPPED[rate]).read_text()
    return from_alist(text)
