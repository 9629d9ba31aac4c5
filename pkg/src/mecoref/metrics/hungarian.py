"""Minimum-cost rectangular assignment (shortest augmenting path with potentials)."""
from __future__ import annotations

from typing import Tuple

import numpy as np


def _solve(cost) -> np.ndarray:
    # cost: list of rows with len(rows) <= len(cols); returns each row's column
    n, m = len(cost), len(cost[0])
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j]: row (1-based) owning column j
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = -1
            row = cost[i0 - 1]
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j]:
            col_of[p[j] - 1] = j - 1
    return col_of


def hungarian_match(cost) -> Tuple[np.ndarray, np.ndarray]:
    """Optimal one-to-one matching of ``min(rows, cols)`` pairs.

    Returns ``(rows, cols)`` index arrays sorted by row, like
    ``scipy.optimize.linear_sum_assignment``.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if not np.isfinite(c).all():
        raise ValueError("cost matrix must be finite")
    n, m = c.shape
    if n == 0 or m == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if n <= m:
        cols = _solve(c.tolist())
        return np.arange(n, dtype=np.int64), cols
    rows_for_col = _solve(c.T.tolist())
    order = np.argsort(rows_for_col)
    return rows_for_col[order], np.arange(m, dtype=np.int64)[order]
