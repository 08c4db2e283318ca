"""Vietoris-Rips persistent homology in dimensions 0 and 1.

Two routes compute the same diagram: a generic boundary-matrix reduction over
GF(2) driven by an explicit filtration, and a fast path that splits the work
into union-find for dimension 0 plus a bit-packed triangle reduction for
dimension 1.  The split is sound because the maximal edge of any 1-cycle is
never a spanning-tree edge, so vertex-edge and edge-triangle pairings cannot
collide.  Both routes consume the same pairwise distance matrix, so their
outputs agree exactly.

Bars of zero lifespan are kept in dimension 0 (duplicate points are real
components) and dropped in dimension 1 (they are artifacts of simultaneous
edge/triangle entry).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numba import njit

from .model import ValidationError

DEFAULT_PERMUTATIONS = 200
DEFAULT_RHO = 0.2
NULL_PERCENTILE = 95.0


@dataclass(frozen=True)
class Bar:
    dim: int
    birth: float
    death: float

    @property
    def lifespan(self) -> float:
        return self.death - self.birth

    @property
    def finite(self) -> bool:
        return math.isfinite(self.death)


@dataclass
class PersistenceDiagram:
    bars: list[Bar]
    significant: list[bool] | None = None
    # Filled by significant_features only.
    thresholds: dict[int, float] | None = None      # per-dim null lifespan cutoff
    null_max: dict[int, np.ndarray] | None = None   # per-dim null max-lifespan draws
    max_radius: float | None = None
    rho: float | None = None

    def in_dim(self, dim: int) -> list[Bar]:
        return [b for b in self.bars if b.dim == dim]


@dataclass
class PersistenceConfig:
    max_radius: float | None = None  # None: point-cloud enclosing diameter
    rho: float = DEFAULT_RHO
    n_permutations: int = DEFAULT_PERMUTATIONS
    seed: int = 0

    def __post_init__(self):
        if self.max_radius is not None and not self.max_radius > 0:
            raise ValidationError(f"max_radius must be positive, got {self.max_radius}")
        if not 0.0 < self.rho < 1.0:
            raise ValidationError(f"rho must be in (0, 1), got {self.rho}")
        if self.n_permutations < 1:
            raise ValidationError(
                f"n_permutations must be >= 1, got {self.n_permutations}")


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"points must be 2-d, got shape {x.shape}")
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def rips_filtration(points: np.ndarray, max_radius: float | None = None,
                    max_dim: int = 2) -> list[tuple[tuple[int, ...], float]]:
    """Simplices up to max_dim sorted by (value, dimension, vertex tuple).

    Vertices enter at 0, an edge at its length, a triangle at its longest
    edge.  max_radius=None keeps everything.
    """
    if max_dim not in (1, 2):
        raise ValidationError(f"max_dim must be 1 or 2, got {max_dim}")
    dist = pairwise_distances(points)
    n = dist.shape[0]
    r = math.inf if max_radius is None else float(max_radius)
    simplices: list[tuple[tuple[int, ...], float]] = [((i,), 0.0) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] <= r:
                simplices.append(((i, j), float(dist[i, j])))
    if max_dim >= 2:
        for i in range(n):
            for j in range(i + 1, n):
                if dist[i, j] > r:
                    continue
                for k in range(j + 1, n):
                    v = max(dist[i, j], dist[i, k], dist[j, k])
                    if v <= r:
                        simplices.append(((i, j, k), float(v)))
    simplices.sort(key=lambda s: (s[1], len(s[0]), s[0]))
    return simplices


def persistence_diagram(filtration: list[tuple[tuple[int, ...], float]],
                        complex_dim: int | None = None) -> PersistenceDiagram:
    """Full GF(2) column reduction of the boundary matrix.

    Columns are integer bitmasks over filtration positions.  Infinite bars
    are reported only below the dimension the complex was built to, where it
    is rich enough to certify them.  complex_dim defaults to the top simplex
    dimension present; pass it explicitly when a radius cutoff may have
    removed every top-dimensional simplex.
    """
    index: dict[tuple[int, ...], int] = {}
    for pos, (simplex, _value) in enumerate(filtration):
        if simplex in index:
            raise ValidationError(f"duplicate simplex {simplex} in filtration")
        index[simplex] = pos
    columns: dict[int, int] = {}
    pivot_owner: dict[int, int] = {}
    pairs: list[tuple[int, int]] = []
    killed: set[int] = set()
    for pos, (simplex, value) in enumerate(filtration):
        if len(simplex) == 1:
            continue
        col = 0
        for face in combinations(simplex, len(simplex) - 1):
            fpos = index.get(face)
            if fpos is None:
                raise ValidationError(f"face {face} of {simplex} missing from filtration")
            if fpos > pos or filtration[fpos][1] > value:
                raise ValidationError(f"face {face} enters after {simplex}")
            col ^= 1 << fpos
        while col:
            piv = col.bit_length() - 1
            owner = pivot_owner.get(piv)
            if owner is None:
                pivot_owner[piv] = pos
                columns[pos] = col
                pairs.append((piv, pos))
                killed.add(piv)
                break
            col ^= columns[owner]
    top_dim = max(len(s) for s, _ in filtration) - 1 if complex_dim is None else complex_dim
    report_max = top_dim - 1 if top_dim >= 1 else 0
    bars: list[Bar] = []
    for birth_pos, death_pos in pairs:
        dim = len(filtration[birth_pos][0]) - 1
        birth = filtration[birth_pos][1]
        death = filtration[death_pos][1]
        if dim == 0 or death > birth:
            bars.append(Bar(dim, birth, death))
    for pos, (simplex, value) in enumerate(filtration):
        dim = len(simplex) - 1
        if dim > report_max or pos in killed or pos in columns:
            continue
        bars.append(Bar(dim, value, math.inf))
    bars.sort(key=lambda b: (b.dim, b.birth, b.death))
    return PersistenceDiagram(bars=bars)


@njit(cache=True)
def _count_triangles(dist, r):
    n = dist.shape[0]
    cnt = 0
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            if dist[i, j] > r:
                continue
            for k in range(j + 1, n):
                v = dist[i, j]
                if dist[i, k] > v:
                    v = dist[i, k]
                if dist[j, k] > v:
                    v = dist[j, k]
                if v <= r:
                    cnt += 1
    return cnt


@njit(cache=True)
def _fill_triangles(dist, r, tri, val):
    n = dist.shape[0]
    m = 0
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            if dist[i, j] > r:
                continue
            for k in range(j + 1, n):
                v = dist[i, j]
                if dist[i, k] > v:
                    v = dist[i, k]
                if dist[j, k] > v:
                    v = dist[j, k]
                if v <= r:
                    tri[m, 0] = i
                    tri[m, 1] = j
                    tri[m, 2] = k
                    val[m] = v
                    m += 1


@njit(cache=True)
def _highest_bit(col, words):
    for w in range(words - 1, -1, -1):
        x = col[w]
        if x != np.uint64(0):
            b = 0
            if x >> np.uint64(32) != np.uint64(0):
                x >>= np.uint64(32)
                b += 32
            if x >> np.uint64(16) != np.uint64(0):
                x >>= np.uint64(16)
                b += 16
            if x >> np.uint64(8) != np.uint64(0):
                x >>= np.uint64(8)
                b += 8
            if x >> np.uint64(4) != np.uint64(0):
                x >>= np.uint64(4)
                b += 4
            if x >> np.uint64(2) != np.uint64(0):
                x >>= np.uint64(2)
                b += 2
            if x >> np.uint64(1) != np.uint64(0):
                b += 1
            return w * 64 + b
    return -1


@njit(cache=True)
def _reduce_triangles(tri_edges, n_edges):
    """Pair each pivot edge with the triangle whose reduced column ends there.

    tri_edges holds, per triangle in filtration order, the positions of its
    three boundary edges in the sorted edge order.  Returns pair_tri with
    pair_tri[e] = killing triangle index or -1.
    """
    words = (n_edges + 63) // 64
    owner_of_pivot = np.full(n_edges, -1, np.int64)
    pair_tri = np.full(n_edges, -1, np.int64)
    owned = [np.zeros(words, np.uint64)]
    owned.pop()
    col = np.zeros(words, np.uint64)
    for t in range(tri_edges.shape[0]):
        for w in range(words):
            col[w] = np.uint64(0)
        for a in range(3):
            e = tri_edges[t, a]
            col[e >> 6] ^= np.uint64(1) << np.uint64(e & 63)
        while True:
            piv = _highest_bit(col, words)
            if piv < 0:
                break
            ow = owner_of_pivot[piv]
            if ow == -1:
                owner_of_pivot[piv] = len(owned)
                owned.append(col.copy())
                pair_tri[piv] = t
                break
            stored = owned[ow]
            for w in range(words):
                col[w] ^= stored[w]
    return pair_tri


def _sorted_edges(dist: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    n = dist.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    vals = dist[iu, ju]
    keep = vals <= r
    iu, ju, vals = iu[keep], ju[keep], vals[keep]
    order = np.argsort(vals, kind="stable")  # enumeration is lex, so ties stay lex
    return np.stack([iu[order], ju[order]], axis=1), vals[order]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[max(ri, rj)] = min(ri, rj)
        return True


def rips_persistence(points: np.ndarray,
                     max_radius: float | None = None) -> PersistenceDiagram:
    """Diagram in dimensions 0 and 1 via the split fast path."""
    dist = pairwise_distances(points)
    n = dist.shape[0]
    if n == 0:
        raise ValidationError("need at least 1 point")
    r = math.inf if max_radius is None else float(max_radius)
    edges, edge_vals = _sorted_edges(dist, r)
    uf = _UnionFind(n)
    in_mst = np.zeros(len(edges), dtype=bool)
    bars: list[Bar] = []
    for e, (i, j) in enumerate(edges):
        if uf.union(int(i), int(j)):
            in_mst[e] = True
            bars.append(Bar(0, 0.0, float(edge_vals[e])))
    n_components = len({uf.find(i) for i in range(n)})
    bars.extend(Bar(0, 0.0, math.inf) for _ in range(n_components))

    n_edges = len(edges)
    if n_edges and not in_mst.all():
        r_tri = r if math.isfinite(r) else float(edge_vals[-1])
        cnt = _count_triangles(dist, r_tri)
        if cnt:
            tri = np.empty((cnt, 3), np.int64)
            tri_vals = np.empty(cnt, np.float64)
            _fill_triangles(dist, r_tri, tri, tri_vals)
            order = np.argsort(tri_vals, kind="stable")
            tri, tri_vals = tri[order], tri_vals[order]
            edge_pos = np.full((n, n), -1, np.int64)
            edge_pos[edges[:, 0], edges[:, 1]] = np.arange(n_edges)
            tri_edges = np.stack([
                edge_pos[tri[:, 0], tri[:, 1]],
                edge_pos[tri[:, 0], tri[:, 2]],
                edge_pos[tri[:, 1], tri[:, 2]],
            ], axis=1)
            pair_tri = _reduce_triangles(tri_edges, n_edges)
        else:
            pair_tri = np.full(n_edges, -1, np.int64)
        for e in range(n_edges):
            if in_mst[e]:
                continue
            t = pair_tri[e]
            if t >= 0:
                if tri_vals[t] > edge_vals[e]:
                    bars.append(Bar(1, float(edge_vals[e]), float(tri_vals[t])))
            else:
                bars.append(Bar(1, float(edge_vals[e]), math.inf))
    bars.sort(key=lambda b: (b.dim, b.birth, b.death))
    return PersistenceDiagram(bars=bars)


def total_persistence(bars: list[Bar], dim: int | None = None,
                      finite_only: bool = True) -> float:
    """Sum of bar lifespans, over one dimension or all of them."""
    total = 0.0
    for b in bars:
        if dim is not None and b.dim != dim:
            continue
        if not b.finite and finite_only:
            continue
        total += b.lifespan
    return float(total)


def enclosing_diameter(points: np.ndarray) -> float:
    dist = pairwise_distances(points)
    return float(dist.max()) if dist.size else 0.0


def significant_features(points: np.ndarray,
                         config: PersistenceConfig | None = None) -> PersistenceDiagram:
    """Flag bars whose lifespan beats a coordinate-shuffle null and a floor.

    The null shuffles each coordinate column independently, destroying
    geometric structure while keeping marginals.  A finite bar is significant
    when its lifespan exceeds the null's 95th percentile of per-dimension max
    lifespans and its lifespan normalized by max_radius exceeds rho.
    Infinite bars are never flagged; they encode connectivity, not features.
    """
    config = config or PersistenceConfig()
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValidationError("need at least 2 points for significance testing")
    radius = enclosing_diameter(x) if config.max_radius is None else float(config.max_radius)
    if radius <= 0:
        raise ValidationError("zero enclosing radius: all points identical")
    diagram = rips_persistence(x, max_radius=radius)
    dims = sorted({b.dim for b in diagram.bars})
    null_max = {d: np.zeros(config.n_permutations) for d in dims}
    rng = np.random.default_rng(config.seed)
    for p in range(config.n_permutations):
        shuffled = np.empty_like(x)
        for c in range(x.shape[1]):
            shuffled[:, c] = rng.permutation(x[:, c])
        null_bars = rips_persistence(shuffled, max_radius=radius).bars
        for d in dims:
            spans = [b.lifespan for b in null_bars if b.dim == d and b.finite]
            null_max[d][p] = max(spans) if spans else 0.0
    thresholds = {d: float(np.percentile(null_max[d], NULL_PERCENTILE)) for d in dims}
    diagram.significant = [
        b.finite and b.lifespan > thresholds[b.dim] and b.lifespan / radius > config.rho
        for b in diagram.bars
    ]
    diagram.thresholds = thresholds
    diagram.null_max = null_max
    diagram.max_radius = radius
    diagram.rho = config.rho
    return diagram
