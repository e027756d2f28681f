"""Weight windows and maximal path weights by dynamic programming.

A window covers vertices ``lo..hi`` and stores every forward edge.  All
tables are float64 arrays indexed by ``k - origin`` with ``-inf`` for "no
finite path"; length tables use ``-1`` for the same thing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .weights import NEG_INF, WeightModel, ext_add, ext_max, to_extended

DEFAULT_MAX_VERTICES = 20_000
BRUTE_FORCE_MAX_SPAN = 22


class WindowTooLarge(MemoryError):
    pass


class NoPathError(ValueError):
    pass


class RangeTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class WeightWindow:
    lo: int
    hi: int
    v: np.ndarray = field(repr=False)
    seed_provenance: tuple | None = None

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        n = self.hi - self.lo + 1
        if self.v.shape != (n, n):
            raise ValueError(f"edge array shape {self.v.shape} does not match {n} vertices")
        self.v.setflags(write=False)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def idx(self, x: int) -> int:
        if not self.lo <= x <= self.hi:
            raise IndexError(f"vertex {x} outside window [{self.lo}, {self.hi}]")
        return x - self.lo

    def weight(self, j: int, k: int):
        """v_{j,k} as an extended weight."""
        if not j < k:
            raise ValueError("edges go from smaller to bigger vertices")
        return to_extended(self.v[self.idx(j), self.idx(k)])

    def edges(self):
        """Yield ``(j, k, weight)`` in sampling order (column by column)."""
        for k in range(self.lo + 1, self.hi + 1):
            for j in range(self.lo, k):
                yield j, k, self.weight(j, k)

    @classmethod
    def from_edges(cls, lo: int, hi: int, weights: dict, default=NEG_INF):
        """Build a window from ``{(j, k): weight}``; absent edges get ``default``."""
        n = hi - lo + 1
        v = np.full((n, n), -np.inf)
        for k in range(lo + 1, hi + 1):
            for j in range(lo, k):
                x = weights.get((j, k), default)
                v[j - lo, k - lo] = -np.inf if x is NEG_INF else float(x)
        return cls(lo, hi, v)

    def to_csv(self, path=None) -> str:
        """``j,k,weight`` rows; ``-inf`` written literally."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["j", "k", "weight"])
        for j, k, x in self.edges():
            wr.writerow([j, k, "-inf" if x is NEG_INF else repr(float(x))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str):
        rows = list(csv.DictReader(io.StringIO(text)))
        js = [int(r["j"]) for r in rows]
        ks = [int(r["k"]) for r in rows]
        weights = {
            (int(r["j"]), int(r["k"])): NEG_INF if r["weight"] == "-inf" else float(r["weight"])
            for r in rows
        }
        return cls.from_edges(min(js), max(ks), weights)


@dataclass(frozen=True)
class PathRecord:
    vertices: tuple[int, ...]
    weight: object
    length: int


def column_edge_count(n_vertices: int) -> int:
    return n_vertices * (n_vertices - 1) // 2


def column_edges_to_matrix(edges: np.ndarray, n_vertices: int) -> np.ndarray:
    return K.column_edges_to_matrix(np.ascontiguousarray(edges, dtype=float), n_vertices)


def sample_window(
    model: WeightModel,
    lo: int,
    hi: int,
    rng: np.random.Generator,
    provenance=None,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> WeightWindow:
    """Draw every edge of ``[lo, hi]`` i.i.d. from ``model``.

    One uniform per edge, consumed column by column: edge ``(j, k)`` takes
    draw number ``t(t-1)/2 + (j - lo)`` with ``t = k - lo``.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    n = hi - lo + 1
    if n > max_vertices:
        raise WindowTooLarge(f"window of {n} vertices exceeds cap of {max_vertices}")
    edges = model.from_uniform(rng.random(column_edge_count(n)))
    return WeightWindow(lo, hi, column_edges_to_matrix(edges, n), provenance)


def _check_origin(window: WeightWindow, origin: int) -> int:
    return window.idx(origin)


def max_weight_table(window: WeightWindow, origin: int) -> np.ndarray:
    """w_{origin,k} for k = origin..hi (``w_{origin,origin} = 0``)."""
    o = _check_origin(window, origin)
    return K.forward_max(window.v, o, window.size - 1, False)


def max_plus_weight_table(window: WeightWindow, origin: int) -> np.ndarray:
    """w+_{origin,k}: best weight over paths whose edges are all strictly positive."""
    o = _check_origin(window, origin)
    return K.forward_max(window.v, o, window.size - 1, True)


def max_weight_to_table(window: WeightWindow, target: int, positive: bool = False) -> np.ndarray:
    """Entry d is the maximal (positive-edge) weight from ``target - d`` to ``target``."""
    t = window.idx(target)
    return K.backward_max(window.v, t, 0, positive)


def max_length_table(window: WeightWindow, origin: int) -> np.ndarray:
    """L_{origin,k} over finite-weight paths; ``-1`` stands for ``-inf``, entry 0 is 0."""
    o = _check_origin(window, origin)
    return K.forward_length(window.v, o, window.size - 1)


def max_weight(window: WeightWindow, j: int, k: int):
    """w_{j,k} as an extended weight."""
    if j == k:
        return 0.0
    if not window.lo <= j < k <= window.hi:
        raise IndexError(f"need lo <= j < k <= hi, got {j}, {k}")
    w = K.forward_max(window.v, window.idx(j), window.idx(k), False)
    return to_extended(w[-1])


def brute_force_max_weight(window: WeightWindow, j: int, k: int, mode: str = "all"):
    """Exhaustive maximum over all subsets of intermediate vertices.

    Works in the scalar extended algebra, independent of the DP kernels.
    Returns ``(weight, paths, max_length)`` where ``paths`` lists every
    argmax path (empty when the weight is ``NEG_INF``) and ``max_length`` is
    the longest finite-weight (or positive-edge) path, ``NEG_INF`` if none.
    """
    if mode not in ("all", "positive_only"):
        raise ValueError(f"unknown mode {mode!r}")
    if not window.lo <= j <= k <= window.hi:
        raise IndexError(f"need lo <= j <= k <= hi, got {j}, {k}")
    if k - j > BRUTE_FORCE_MAX_SPAN:
        raise RangeTooLarge(f"span {k - j} exceeds {BRUTE_FORCE_MAX_SPAN}")
    if j == k:
        return 0.0, [PathRecord((j,), 0.0, 0)], 0

    w = {}
    for a in range(j, k):
        for b in range(a + 1, k + 1):
            x = window.weight(a, b)
            if mode == "positive_only" and not (x is not NEG_INF and x > 0):
                x = NEG_INF
            w[a, b] = x

    best = NEG_INF
    best_paths: list[tuple[int, ...]] = []
    longest = NEG_INF
    stack = [(j, 0.0, (j,))]
    while stack:
        cur, acc, verts = stack.pop()
        for nxt in range(cur + 1, k + 1):
            total = ext_add(acc, w[cur, nxt])
            if total is NEG_INF:
                continue
            path = verts + (nxt,)
            if nxt == k:
                if best is NEG_INF or total > best:
                    best, best_paths = total, [path]
                elif total == best:
                    best_paths.append(path)
                longest = ext_max(longest, len(path) - 1)
            else:
                stack.append((nxt, total, path))
    paths = [PathRecord(p, best, len(p) - 1) for p in sorted(best_paths)]
    return best, paths, longest


def brute_force_tables(window: WeightWindow, origin: int) -> tuple[list, list, list]:
    """``(w, w+, L)`` from ``origin`` to every ``k >= origin`` by enumerating every path.

    One depth-first pass over all paths leaving ``origin``, in the scalar
    extended algebra.  Entry 0 of each list is the empty path (``0``).
    """
    N = window.hi - origin
    if N > BRUTE_FORCE_MAX_SPAN:
        raise RangeTooLarge(f"span {N} exceeds {BRUTE_FORCE_MAX_SPAN}")
    o = window.idx(origin)
    wt = [[window.weight(window.lo + o + a, window.lo + o + b) if a < b else None
           for b in range(N + 1)] for a in range(N + 1)]
    w = [0.0] + [NEG_INF] * N
    wp = [0.0] + [NEG_INF] * N
    L = [0] + [NEG_INF] * N
    # (vertex, finite weight or NEG_INF, all edges positive, edge count)
    stack = [(0, 0.0, True, 0)]
    while stack:
        cur, acc, pos, m = stack.pop()
        for nxt in range(cur + 1, N + 1):
            x = wt[cur][nxt]
            total = ext_add(acc, x)
            if total is NEG_INF:
                continue
            p = pos and x > 0
            w[nxt] = ext_max(w[nxt], total)
            L[nxt] = ext_max(L[nxt], m + 1)
            if p:
                wp[nxt] = ext_max(wp[nxt], total)
            stack.append((nxt, total, p, m + 1))
    return w, wp, L


def reconstruct_max_path(window: WeightWindow, j: int, k: int) -> PathRecord:
    """One maximal path from j to k via back-pointers (smallest predecessor on ties)."""
    if not window.lo <= j < k <= window.hi:
        raise IndexError(f"need lo <= j < k <= hi, got {j}, {k}")
    o, t = window.idx(j), window.idx(k)
    w, pred = K.forward_argmax(window.v, o, t)
    if w[-1] == -np.inf:
        raise NoPathError(f"no finite-weight path from {j} to {k}")
    verts = [t - o]
    while verts[-1] != 0:
        verts.append(int(pred[verts[-1]]))
    verts = tuple(j + d for d in reversed(verts))
    return PathRecord(verts, to_extended(w[-1]), len(verts) - 1)


def path_weight(window: WeightWindow, vertices) -> object:
    total = 0.0
    for a, b in zip(vertices[:-1], vertices[1:]):
        total = ext_add(total, window.weight(a, b))
    return total


def w0n_batch(model: WeightModel, n: int, rngs) -> np.ndarray:
    """w_{0,k}, k = 0..n, for one fresh window per generator.

    Consumes each generator exactly as :func:`sample_window` on ``[0, n]``
    would, so the result matches :func:`max_weight_table` on that window.
    """
    m = column_edge_count(n + 1)
    params = model.kernel_params()
    out = np.empty((len(rngs), n + 1))
    for r, rng in enumerate(rngs):
        out[r] = K.w0n_from_uniforms(rng.random(m), n, *params)
    return out


def superadditive_gap(window: WeightWindow) -> float:
    """min over j<=m<=k of w_{j,k} - (w_{j,m} + w_{m,k}) over pairs with finite terms.

    Non-negative whenever superadditivity holds; ``inf`` if no finite triple.
    """
    N = window.size
    W = np.full((N, N), -np.inf)
    for a in range(N):
        W[a, a:] = K.forward_max(window.v, a, N - 1, False)
    gap = math.inf
    for a in range(N):
        for m in range(a, N):
            if W[a, m] == -np.inf:
                continue
            rhs = W[a, m] + W[m, m:]
            lhs = W[a, m:]
            fin = rhs > -np.inf
            if fin.any():
                gap = min(gap, float(np.min(lhs[fin] - rhs[fin])))
    return gap
