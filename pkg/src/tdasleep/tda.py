"""Persistence diagrams from time series.

Two filtrations are supported: Vietoris-Rips on a delay embedding (H0 and
H1) and the sublevel-set filtration of a 1-D series (H0 only).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .diagram import PersistenceDiagram
from ._reduction import _apparent_pairs, _reduce_cohomology
from .errors import EmbeddingError


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    d: int
    tau_samples: int

    def __len__(self):
        return len(self.points)


def takens_embed(signal, tau_samples: int, d: int = 3) -> PointCloud:
    """Delay embedding: point ``i`` is ``(f[i], f[i+tau], ..., f[i+(d-1)tau])``."""
    f = np.asarray(signal, dtype=float)
    if tau_samples < 1 or d < 2:
        raise EmbeddingError("need tau_samples >= 1 and d >= 2")
    count = len(f) - (d - 1) * tau_samples
    if count < 1:
        raise EmbeddingError(
            f"series of length {len(f)} too short for d={d}, tau={tau_samples}")
    idx = np.arange(count)[:, None] + tau_samples * np.arange(d)[None, :]
    return PointCloud(f[idx], d, tau_samples)


def maxmin_subsample(cloud: PointCloud, k: int, seed: int = 0) -> PointCloud:
    """Greedy farthest-point subset of ``k`` points.

    The first point is drawn uniformly with ``seed``; each following point is
    the one farthest from the current subset (lowest index wins ties). The
    selected points keep their original order.
    """
    pts = cloud.points
    n = len(pts)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    if k == n:
        return cloud
    first = int(np.random.default_rng(seed).integers(n))
    chosen = [first]
    dist = cdist(pts[first:first + 1], pts)[0]
    for _ in range(k - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        np.minimum(dist, cdist(pts[nxt:nxt + 1], pts)[0], out=dist)
    return PointCloud(pts[np.sort(chosen)], cloud.d, cloud.tau_samples)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        parent = self.parent
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root


def enclosing_radius(dist: np.ndarray) -> float:
    """Smallest eccentricity; at this scale the Rips complex is a cone."""
    if len(dist) <= 1:
        return 0.0
    return float(dist.max(axis=1).min())


def _edge_order(dist: np.ndarray, threshold: float):
    """Edges with length <= threshold, sorted by (length, u, v), u < v."""
    n = len(dist)
    iu, iv = np.triu_indices(n, k=1)
    length = dist[iu, iv]
    keep = length <= threshold
    iu, iv, length = iu[keep], iv[keep], length[keep]
    order = np.lexsort((iv, iu, length))
    return iu[order], iv[order], length[order]


def rips_persistence(cloud, max_dim: int = 1, threshold="auto"):
    """H0 (and optionally H1) persistence of the Vietoris-Rips filtration.

    ``cloud`` is a :class:`PointCloud` or an (n, d) array. H0 bars are the
    minimum-spanning-tree edge lengths (plus one essential bar); H1 is computed
    exactly by reducing the coboundary matrix of the flag complex with
    clearing and apparent-pair shortcuts. ``threshold="auto"`` uses the
    enclosing radius, past which no H1 class can exist. Only H1 bars of
    positive length are reported.
    """
    points = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    n = len(points)
    if n == 0:
        raise ValueError("empty point cloud")
    dist = squareform(pdist(points)) if n > 1 else np.zeros((1, 1))
    thr = enclosing_radius(dist) if threshold == "auto" else float(threshold)
    eu, ev, elen = _edge_order(dist, thr)

    # H0 by Kruskal over the filtration order; MST edges are the H0 deaths
    uf = _UnionFind(n)
    is_mst = np.zeros(len(eu), dtype=bool)
    h0 = []
    for j, (u, v) in enumerate(zip(eu.tolist(), ev.tolist())):
        ru, rv = uf.find(u), uf.find(v)
        if ru != rv:
            uf.parent[max(ru, rv)] = min(ru, rv)
            is_mst[j] = True
            h0.append((0.0, float(elen[j])))
    components = sum(1 for i in range(n) if uf.find(i) == i)
    h0.extend([(0.0, np.inf)] * components)
    out = [PersistenceDiagram(np.array(h0).reshape(-1, 2), 0, "rips_airflow")]
    if max_dim >= 1:
        h1 = _rips_h1(dist, eu, ev, elen, is_mst)
        out.append(PersistenceDiagram(np.array(h1, dtype=float).reshape(-1, 2), 1, "rips_airflow"))
    return out


def _rips_h1(dist, eu, ev, elen, is_mst):
    """H1 pairs via persistent cohomology of the edge filtration.

    Edges are indexed by filtration position. A triangle is ordered by the
    position of its longest edge ("max edge") and then by the remaining
    vertex, so triangle ``(e, w)`` has integer key ``pos(e) * n + w``.
    """
    n = len(dist)
    m = len(eu)
    if m == 0 or n < 3:
        return []
    pos = np.full((n, n), m, dtype=np.int64)  # m == "not in complex"
    idx = np.arange(m, dtype=np.int64)
    pos[eu, ev] = idx
    pos[ev, eu] = idx
    np.fill_diagonal(pos, -1)
    apparent_w = _apparent_pairs(pos, eu.astype(np.int64), ev.astype(np.int64))
    todo = np.flatnonzero((apparent_w < 0) & ~is_mst)[::-1].astype(np.int64)
    births, deaths = _reduce_cohomology(pos, eu.astype(np.int64), ev.astype(np.int64),
                                        apparent_w, todo)
    pairs = []
    for e, t in zip(births.tolist(), deaths.tolist()):
        if t < 0:
            pairs.append((float(elen[e]), np.inf))
        elif elen[t] > elen[e]:
            pairs.append((float(elen[e]), float(elen[t])))
    return pairs


def sublevel_persistence(series, source: str = "sublevel_airflow") -> PersistenceDiagram:
    """H0 persistence of the sublevel filtration of a series on a path graph.

    Runs of equal consecutive values are collapsed first, so a plateau acts
    as a single vertex. Vertices are then added in (value, index) order; when
    two components meet, the younger one (higher birth; on ties, the one whose
    minimum has the larger index) dies at the merging value.
    """
    f = np.asarray(series, dtype=float)
    if f.size == 0:
        raise ValueError("empty series")
    keep = np.concatenate([[True], f[1:] != f[:-1]])
    v = f[keep]
    n = len(v)
    order = np.lexsort((np.arange(n), v))
    parent = np.arange(n)
    birth = v.copy()
    rank_of = np.empty(n, dtype=np.int64)
    rank_of[order] = np.arange(n)  # proxy for (birth, index) age
    added = np.zeros(n, dtype=bool)
    bars = []

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for i in order.tolist():
        added[i] = True
        roots = {find(j) for j in (i - 1, i + 1) if 0 <= j < n and added[j]}
        if not roots:
            continue
        roots = sorted(roots, key=lambda r: rank_of[r])
        elder = roots[0]
        for r in roots[1:]:
            bars.append((birth[r], v[i]))
            parent[r] = elder
        parent[i] = elder
    bars.append((float(v.min()), np.inf))
    return PersistenceDiagram(np.array(bars, dtype=float).reshape(-1, 2), 0, source)
