"""Loop graphs of plane trees: construction, metric, profile, cycles.

``build_loop`` replaces each vertex with k >= 1 children by a cycle through
the parent and its children (consecutive siblings adjacent, parent adjacent
to first and last child).  A one-child vertex yields a double edge at the
map level; the metric uses the simple-graph quotient, where it counts as a
single unit edge.  ``build_loopbar`` contracts every (parent, last child)
edge of that multigraph, which merges each vertex into the class of its
chain of last children.

Distances are BFS on CSR adjacency; the profile H°_i = d°(root, u_i) comes
from one BFS sweep and is indexed by lexicographic tree order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import kernel
from .trees import PlaneTree


@kernel
def _loop_multi_edges(deg, e):
    """Directed listing of the loop multigraph: one record per cycle edge.

    For each vertex v with children c_1..c_k (k >= 1): (v,c_1), the sibling
    chain (c_i, c_i+1), and the closing edge (c_k, v).  The closing edge is
    flagged so the Loop-bar construction can drop it before contraction.
    """
    n = deg.shape[0]
    m = 0
    for v in range(n):
        if deg[v] > 0:
            m += deg[v] + 1
    src = np.empty(m, np.int64)
    dst = np.empty(m, np.int64)
    closing = np.zeros(m, np.bool_)
    idx = 0
    for v in range(n):
        k = deg[v]
        if k == 0:
            continue
        c = v + 1
        src[idx] = v
        dst[idx] = c
        idx += 1
        nxt = e[c]
        while nxt < e[v]:
            src[idx] = c
            dst[idx] = nxt
            idx += 1
            c = nxt
            nxt = e[c]
        src[idx] = c
        dst[idx] = v
        closing[idx] = True
        idx += 1
    return src, dst, closing


@kernel
def _contract_reps(parent, is_last):
    """Class representative under 'merge each vertex with its last child'."""
    n = parent.shape[0]
    rep = np.empty(n, np.int64)
    rep[0] = 0
    for i in range(1, n):
        if is_last[i]:
            rep[i] = rep[parent[i]]
        else:
            rep[i] = i
    return rep


@kernel
def _bfs_fill(indptr, indices, src, dist):
    n = dist.shape[0]
    for i in range(n):
        dist[i] = -1
    queue = np.empty(n, np.int64)
    qh = 0
    qt = 0
    dist[src] = 0
    queue[qt] = src
    qt += 1
    while qh < qt:
        v = queue[qh]
        qh += 1
        d = dist[v] + 1
        for p in range(indptr[v], indptr[v + 1]):
            w = indices[p]
            if dist[w] < 0:
                dist[w] = d
                queue[qt] = w
                qt += 1
    return qt


@kernel
def _bfs_target(indptr, indices, src, dst, scratch):
    """Distance src -> dst with early exit; scratch is an int64[n] buffer."""
    n = scratch.shape[0]
    if src == dst:
        return np.int64(0)
    for i in range(n):
        scratch[i] = -1
    queue = np.empty(n, np.int64)
    qh = 0
    qt = 0
    scratch[src] = 0
    queue[qt] = src
    qt += 1
    while qh < qt:
        v = queue[qh]
        qh += 1
        d = scratch[v] + 1
        for p in range(indptr[v], indptr[v + 1]):
            w = indices[p]
            if scratch[w] < 0:
                if w == dst:
                    return d
                scratch[w] = d
                queue[qt] = w
                qt += 1
    return np.int64(-1)


@kernel
def _bfs_multi(indptr, indices, sources, dist):
    """Distances to the nearest of several sources (all start at 0)."""
    n = dist.shape[0]
    for i in range(n):
        dist[i] = -1
    queue = np.empty(n, np.int64)
    qh = 0
    qt = 0
    for s in range(sources.shape[0]):
        v = sources[s]
        if dist[v] < 0:
            dist[v] = 0
            queue[qt] = v
            qt += 1
    while qh < qt:
        v = queue[qh]
        qh += 1
        d = dist[v] + 1
        for p in range(indptr[v], indptr[v + 1]):
            w = indices[p]
            if dist[w] < 0:
                dist[w] = d
                queue[qt] = w
                qt += 1
    return qt


def _csr_from_pairs(n: int, a: np.ndarray, b: np.ndarray):
    """Undirected CSR adjacency from unique vertex pairs (no self-loops)."""
    srcs = np.concatenate([a, b])
    dsts = np.concatenate([b, a])
    counts = np.bincount(srcs, minlength=n)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    order = np.argsort(srcs, kind="stable")
    indices = dsts[order].astype(np.int64)
    return indptr, indices


@dataclass
class LoopGraph:
    """A loop graph with its simple metric view and map-level edge list.

    ``indptr``/``indices`` give the simple CSR used by the metric (self
    loops excluded, parallel edges collapsed).  ``edge_src``/``edge_dst``/
    ``edge_mult`` record unique undirected edges with map multiplicity,
    self-loops included.  ``class_of`` maps tree vertices to graph vertices
    (None means the identity, as in Loop).
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_mult: np.ndarray
    root: int
    tree_degree: np.ndarray
    kind: str
    class_of: np.ndarray | None = None

    def vertex_of_tree(self, i: int) -> int:
        """Graph vertex holding tree vertex i."""
        return int(i) if self.class_of is None else int(self.class_of[i])

    @property
    def edge_count_simple(self) -> int:
        return len(self.edge_src) - int(np.count_nonzero(self.edge_src == self.edge_dst))


def _dedupe(n: int, src: np.ndarray, dst: np.ndarray):
    """Unique undirected edges with multiplicities, sorted canonically."""
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    key = lo * np.int64(n) + hi
    uniq, counts = np.unique(key, return_counts=True)
    return (uniq // n).astype(np.int64), (uniq % n).astype(np.int64), counts.astype(np.int64)


def build_loop(t: PlaneTree) -> LoopGraph:
    deg = t.degree_seq
    src, dst, _ = _loop_multi_edges(deg, t.subtree_end)
    a, b, mult = _dedupe(t.n, src, dst)
    keep = a != b  # no self-loops arise here, but keep the invariant explicit
    indptr, indices = _csr_from_pairs(t.n, a[keep], b[keep])
    return LoopGraph(t.n, indptr, indices, a, b, mult, 0, deg, "loop")


def build_loopbar(t: PlaneTree) -> LoopGraph:
    deg = t.degree_seq
    e = t.subtree_end
    parent = t.parent
    src, dst, closing = _loop_multi_edges(deg, e)
    if t.n == 1:
        return LoopGraph(
            1,
            np.zeros(2, np.int64),
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
            0,
            deg,
            "loopbar",
            class_of=np.zeros(1, np.int64),
        )
    is_last = np.zeros(t.n, dtype=bool)
    is_last[1:] = e[1:] == e[parent[1:]]
    rep = _contract_reps(parent, is_last)
    uniq = np.unique(rep)
    class_of = np.searchsorted(uniq, rep).astype(np.int64)
    keep = ~closing
    a0 = class_of[src[keep]]
    b0 = class_of[dst[keep]]
    a, b, mult = _dedupe(len(uniq), a0, b0)
    simple = a != b
    indptr, indices = _csr_from_pairs(len(uniq), a[simple], b[simple])
    return LoopGraph(
        int(len(uniq)),
        indptr,
        indices,
        a,
        b,
        mult,
        int(class_of[0]),
        deg,
        "loopbar",
        class_of=class_of,
    )


def profile_Hcirc(g: LoopGraph) -> np.ndarray:
    """H°_i = d°(root, u_i) for every tree vertex i, in lexicographic order."""
    dist = np.empty(g.n, dtype=np.int64)
    _bfs_fill(g.indptr, g.indices, np.int64(g.root), dist)
    if g.class_of is None:
        return dist
    return dist[g.class_of]


def dist(g: LoopGraph, a: int, b: int) -> int:
    """Graph distance between two loop-graph vertices (BFS, early exit)."""
    scratch = np.empty(g.n, dtype=np.int64)
    d = int(_bfs_target(g.indptr, g.indices, np.int64(a), np.int64(b), scratch))
    if d < 0:
        raise ValueError(f"vertices {a} and {b} are not connected")
    return d


def distances_from(g: LoopGraph, src: int) -> np.ndarray:
    dist_arr = np.empty(g.n, dtype=np.int64)
    _bfs_fill(g.indptr, g.indices, np.int64(src), dist_arr)
    return dist_arr


def distances_to_set(g: LoopGraph, sources: np.ndarray) -> np.ndarray:
    dist_arr = np.empty(g.n, dtype=np.int64)
    _bfs_multi(g.indptr, g.indices, np.ascontiguousarray(sources, dtype=np.int64), dist_arr)
    return dist_arr


def largest_cycle(g: LoopGraph):
    """(cycle length, tree vertex of maximum child count).

    Length is max_u k_u + 1, or 0 when the tree has no internal vertex;
    ties break to the smallest lexicographic index.
    """
    k = int(np.max(g.tree_degree))
    v = int(np.argmax(g.tree_degree))
    return (k + 1 if k >= 1 else 0), v


def write_edges_csv(g: LoopGraph, path) -> None:
    """Edge list as CSV (source, target, multiplicity), canonically sorted."""
    with open(path, "w") as f:
        f.write("source,target,multiplicity\n")
        for a, b, m in zip(g.edge_src, g.edge_dst, g.edge_mult):
            f.write(f"{int(a)},{int(b)},{int(m)}\n")
