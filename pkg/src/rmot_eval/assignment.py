"""Exact maximum-weight bipartite matching with deterministic tie-breaking.

Both the production solver and the brute-force oracle optimize the same
strict total order: maximize total weight, and among weight-ties prefer the
matching that greedily includes the lexicographically earliest (row, col)
pairs. The order is made exact by lossless integer encoding:

* every finite float weight is scaled to an integer with a shared power-of-two
  denominator (no rounding), and
* each cell (r, c) carries a tie-break bonus of 3 ** (rows*cols - (r*cols+c)).
  Bonus sums of distinct pair sets are distinct, and the whole bonus range is
  smaller than one unit of scaled weight, so the combined integer objective
  orders matchings exactly as (weight, greedy-lex) would.

Pairs with negative weight or a false feasibility mask are never matched.
Zero-weight feasible pairs are matched (the tie-break prefers inclusion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

ORACLE_LIMIT = 8


@dataclass(frozen=True)
class WeightMatrix:
    """Dense rectangular weight matrix with a feasibility mask."""

    weights: np.ndarray  # (rows, cols) float64
    mask: Optional[np.ndarray] = None  # (rows, cols) bool; None = all feasible

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.ndim != 2:
            raise ValueError("weights must be a 2-d matrix")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != w.shape:
                raise ValueError("mask and weights must have the same shape")
            object.__setattr__(self, "mask", m)

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    def feasible(self) -> np.ndarray:
        """Pairs that may be matched: masked-in and non-negative weight."""
        feas = self.weights >= 0.0
        if self.mask is not None:
            feas &= self.mask
        return feas


@dataclass(frozen=True)
class Matching:
    """A set of disjoint (row, col) pairs and their total weight."""

    pairs: Tuple[Tuple[int, int], ...]
    total_weight: float

    def pair_set(self) -> frozenset:
        return frozenset(self.pairs)


def _encode(m: WeightMatrix) -> Tuple[List[List[int]], np.ndarray, int]:
    """Losslessly encode weights into combined integer objectives.

    Returns (combined, feasible, bonus_base). combined[r][c] is meaningful
    only where feasible; infeasible cells hold 0.
    """
    feas = m.feasible()
    rows, cols = m.weights.shape
    k = rows * cols
    bonus_base = 3 ** (k + 1)

    # Exact integer mantissas over a common power-of-two denominator.
    min_exp = None
    parts: List[List[Tuple[int, int]]] = []
    for r in range(rows):
        row_parts = []
        for c in range(cols):
            if feas[r, c]:
                mant, exp = math.frexp(float(m.weights[r, c]))
                imant = int(mant * (1 << 53))
                texp = exp - 53
                if imant != 0 and (min_exp is None or texp < min_exp):
                    min_exp = texp
                row_parts.append((imant, texp))
            else:
                row_parts.append((0, 0))
        parts.append(row_parts)
    if min_exp is None:
        min_exp = 0

    combined: List[List[int]] = []
    for r in range(rows):
        row = []
        for c in range(cols):
            if feas[r, c]:
                imant, texp = parts[r][c]
                scaled = imant << (texp - min_exp) if imant else 0
                row.append(scaled * bonus_base + 3 ** (k - (r * cols + c)))
            else:
                row.append(0)
        combined.append(row)
    return combined, feas, bonus_base


def _finish(m: WeightMatrix, pairs: Sequence[Tuple[int, int]]) -> Matching:
    ordered = tuple(sorted(pairs))
    total = math.fsum(float(m.weights[r, c]) for r, c in ordered)
    return Matching(pairs=ordered, total_weight=total)


def solve_max_weight(m: WeightMatrix) -> Matching:
    """Exact O(n^3) maximum-weight matching; rows/cols may stay unmatched.

    Uses a shortest-augmenting-path Hungarian method on the padded square
    integer objective, so results are bit-stable across runs and platforms.
    """
    combined, feas, _ = _encode(m)
    rows, cols = m.weights.shape
    if rows == 0 or cols == 0 or not feas.any():
        return _finish(m, ())

    n = max(rows, cols)
    # benefit[r][c]: 0 pads mean "leave unmatched"
    benefit = [[0] * n for _ in range(n)]
    for r in range(rows):
        brow = benefit[r]
        crow = combined[r]
        for c in range(cols):
            brow[c] = crow[c]

    # Hungarian on cost = -benefit via the classic potentials formulation
    # (1-based arrays internally).
    INF = None  # sentinel for "unreached"
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    p = [0] * (n + 1)  # p[c] = row matched to column c (0 = none)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv: List[Optional[int]] = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = None
            j1 = -1
            bi = benefit[i0 - 1]
            ui = u[i0]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = -bi[j - 1] - ui - v[j]
                    mj = minv[j]
                    if mj is None or cur < mj:
                        minv[j] = cur
                        way[j] = j0
                        mj = cur
                    if delta is None or mj < delta:
                        delta = mj
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                elif minv[j] is not None:
                    minv[j] -= delta  # type: ignore[operator]
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    pairs = []
    for c in range(1, n + 1):
        r = p[c]
        if r and r - 1 < rows and c - 1 < cols and feas[r - 1, c - 1]:
            pairs.append((r - 1, c - 1))
    return _finish(m, pairs)


def solve_oracle(m: WeightMatrix) -> Matching:
    """Exhaustive enumeration of all injective partial assignments.

    Limited to 8x8; shares the exact objective and tie-break with
    :func:`solve_max_weight`, so the two must agree on pair sets exactly.
    """
    rows, cols = m.weights.shape
    if rows > ORACLE_LIMIT or cols > ORACLE_LIMIT:
        raise ValueError(f"oracle limited to {ORACLE_LIMIT}x{ORACLE_LIMIT} matrices")
    combined, feas, _ = _encode(m)

    best_score = 0
    best_pairs: Tuple[Tuple[int, int], ...] = ()
    used_cols = [False] * cols
    chosen: List[Tuple[int, int]] = []

    def recurse(r: int, score: int) -> None:
        nonlocal best_score, best_pairs
        if r == rows:
            if score > best_score:
                best_score = score
                best_pairs = tuple(chosen)
            return
        recurse(r + 1, score)  # leave row r unmatched
        for c in range(cols):
            if feas[r, c] and not used_cols[c]:
                used_cols[c] = True
                chosen.append((r, c))
                recurse(r + 1, score + combined[r][c])
                chosen.pop()
                used_cols[c] = False

    recurse(0, 0)
    return _finish(m, best_pairs)
