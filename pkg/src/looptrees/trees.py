"""Plane trees as lexicographic degree sequences, with coding paths.

The canonical storage is the depth-first (lexicographic) sequence of child
counts, which is exactly the Lukasiewicz increment sequence plus one.  A
sequence is valid iff its walk of increments ``k - 1`` stays nonnegative
before the last step and first hits -1 exactly at the end.  Parent, height,
subtree-span, and contour arrays are derived views, computed once on demand
and cached; the tree value itself is immutable.

Vertices are identified by lexicographic index.  Neveu words ("1.2.1") are
available as a debug rendering only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import kernel
from .errors import NotAFirstPassagePath, RootHasNoTrunk, TreeTooLarge

VERTEX_CAP = 2**31 - 1


@kernel
def _first_passage_scan(deg):
    """Index of the first strictly negative partial sum, and the final sum."""
    n = deg.shape[0]
    w = np.int64(0)
    first_neg = np.int64(-1)
    for i in range(n):
        w += deg[i] - 1
        if w < 0 and first_neg < 0:
            first_neg = i
    return first_neg, w


@kernel
def _parent_height(deg):
    n = deg.shape[0]
    parent = np.full(n, -1, np.int64)
    height = np.zeros(n, np.int64)
    sv = np.empty(n, np.int64)  # stack: vertex
    sr = np.empty(n, np.int64)  # stack: unfilled child slots
    top = -1
    for i in range(n):
        if i > 0:
            p = sv[top]
            parent[i] = p
            height[i] = height[p] + 1
            sr[top] -= 1
            if sr[top] == 0:
                top -= 1
        if deg[i] > 0:
            top += 1
            sv[top] = i
            sr[top] = deg[i]
    return parent, height


@kernel
def _subtree_sizes(parent):
    n = parent.shape[0]
    size = np.ones(n, np.int64)
    for i in range(n - 1, 0, -1):
        size[parent[i]] += size[i]
    return size


@kernel
def _contour(parent, height, e):
    """Contour heights and the vertex occupied at each contour time."""
    n = parent.shape[0]
    m = 2 * n - 1
    c_height = np.empty(m, np.int64)
    c_vertex = np.empty(m, np.int64)
    nc = np.empty(n, np.int64)  # cursor: next unvisited child
    for i in range(n):
        nc[i] = i + 1
    c_height[0] = 0
    c_vertex[0] = 0
    v = np.int64(0)
    j = 0
    while j < m - 1:
        c = nc[v]
        if c < e[v]:
            nc[v] = e[c]
            v = c
        else:
            v = parent[v]
        j += 1
        c_height[j] = height[v]
        c_vertex[j] = v
    return c_height, c_vertex


@kernel
def _mirror(deg, e):
    """Degree sequence of the child-order-reversed tree, plus old->new map."""
    n = deg.shape[0]
    newdeg = np.empty(n, np.int64)
    imap = np.empty(n, np.int64)
    stack = np.empty(n, np.int64)
    top = 0
    stack[0] = 0
    t = 0
    while top >= 0:
        v = stack[top]
        top -= 1
        newdeg[t] = deg[v]
        imap[v] = t
        t += 1
        c = v + 1
        while c < e[v]:
            top += 1
            stack[top] = c
            c = e[c]
    return newdeg, imap


@kernel
def _mrca(parent, height, i, j):
    a = i
    b = j
    while height[a] > height[b]:
        a = parent[a]
    while height[b] > height[a]:
        b = parent[b]
    while a != b:
        a = parent[a]
        b = parent[b]
    return a


@kernel
def _trunk_arrays(deg, parent, e, height, v):
    """Ancestor child counts and 1-based spine positions along root -> v."""
    h = height[v]
    x = np.empty(h, np.int64)
    u = np.empty(h, np.int64)
    c = v
    p = parent[c]
    lev = h - 1
    while lev >= 0:
        x[lev] = deg[p]
        pos = np.int64(1)
        s = p + 1
        while s != c:
            s = e[s]
            pos += 1
        u[lev] = pos
        c = p
        p = parent[c]
        lev -= 1
    return x, u


@dataclass(frozen=True)
class CodingPaths:
    """The three classical codings of one tree.

    ``lukasiewicz`` has n+1 entries (starts at 0, ends at -1); ``height``
    has n; ``contour`` has 2n-1.  ``contour_vertex[j]`` is the vertex the
    depth-first walker occupies at contour time j.  Accessors apply the
    pad-with-zero convention beyond the stored range.
    """

    lukasiewicz: np.ndarray
    height: np.ndarray
    contour: np.ndarray
    contour_vertex: np.ndarray

    def lukasiewicz_at(self, k: int) -> int:
        return int(self.lukasiewicz[k]) if k < len(self.lukasiewicz) else 0

    def height_at(self, k: int) -> int:
        return int(self.height[k]) if k < len(self.height) else 0


@dataclass(frozen=True)
class TrunkSkeleton:
    """Spine-with-neighbours summary of the path from the root to a vertex.

    ``child_counts[i]`` is the child count of the spine vertex at depth i;
    ``spine_pos[i]`` is the 1-based position of the next spine vertex among
    those children.  The skeleton of depth h determines a plane tree with
    spine end and side branches as leaves.
    """

    h: int
    child_counts: np.ndarray
    spine_pos: np.ndarray

    def __post_init__(self):
        cc = np.ascontiguousarray(self.child_counts, dtype=np.int64)
        sp = np.ascontiguousarray(self.spine_pos, dtype=np.int64)
        object.__setattr__(self, "child_counts", cc)
        object.__setattr__(self, "spine_pos", sp)
        if len(cc) != self.h or len(sp) != self.h:
            raise ValueError("skeleton arrays must have length h")
        if self.h and (np.any(cc < 1) or np.any(sp < 1) or np.any(sp > cc)):
            raise ValueError("need 1 <= spine_pos <= child_counts")

    @property
    def leaf_count(self) -> int:
        """Lambda = sum(x_i - 1) + 1: side leaves plus the spine end."""
        return int(self.child_counts.sum() - self.h + 1)

    def lukasiewicz_star(self, k: int | None = None) -> int:
        """W*_k = sum of the first k spine child counts (default k = h)."""
        k = self.h if k is None else k
        return int(self.child_counts[:k].sum())

    def right_branch_count(self) -> int:
        """Children of spine vertices branching strictly right of the spine."""
        return int((self.child_counts - self.spine_pos).sum())

    def key(self) -> tuple:
        """Hashable identity of the skeleton, for exact enumeration maps."""
        return (self.h, tuple(self.child_counts.tolist()), tuple(self.spine_pos.tolist()))

    def to_tree(self) -> "PlaneTree":
        """The skeleton as a plane tree (spine end and side branches leaves)."""
        deg = [0]  # the spine end v_h; wrap outward toward the root
        for i in range(self.h - 1, -1, -1):
            x = int(self.child_counts[i])
            u = int(self.spine_pos[i])
            deg = [x] + [0] * (u - 1) + deg + [0] * (x - u)
        return PlaneTree(np.array(deg, dtype=np.int64))


class PlaneTree:
    """Immutable plane tree; derived arrays are cached idempotently."""

    __slots__ = ("degree_seq", "n", "_d")

    def __init__(self, degree_seq, _validated: bool = False):
        arr = np.ascontiguousarray(degree_seq, dtype=np.int64)
        if arr.ndim != 1 or arr.shape[0] == 0:
            raise NotAFirstPassagePath("degree sequence must be a nonempty 1-d array")
        if arr.shape[0] > VERTEX_CAP:
            raise TreeTooLarge(f"{arr.shape[0]} vertices exceeds cap {VERTEX_CAP}")
        if not _validated:
            if np.any(arr < 0):
                raise NotAFirstPassagePath("negative child count")
            first_neg, final = _first_passage_scan(arr)
            if final != -1 or first_neg != arr.shape[0] - 1:
                raise NotAFirstPassagePath(
                    f"walk first passes -1 at index {first_neg} with final value {final}; "
                    f"need first passage exactly at index {arr.shape[0] - 1}"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "degree_seq", arr)
        object.__setattr__(self, "n", int(arr.shape[0]))
        object.__setattr__(self, "_d", {})

    def __setattr__(self, name, value):
        raise AttributeError("PlaneTree is immutable")

    def __eq__(self, other):
        return isinstance(other, PlaneTree) and np.array_equal(self.degree_seq, other.degree_seq)

    def __hash__(self):
        return hash((self.n, self.degree_seq.tobytes()))

    def __repr__(self):
        if self.n <= 12:
            return f"PlaneTree({tuple(self.degree_seq.tolist())})"
        return f"PlaneTree(n={self.n})"

    # -- derived arrays -----------------------------------------------------
    def _get(self, name, build):
        hit = self._d.get(name)
        if hit is None:
            hit = build()
            self._d[name] = hit
        return hit

    @property
    def parent(self) -> np.ndarray:
        return self._get("ph", lambda: _parent_height(self.degree_seq))[0]

    @property
    def height(self) -> np.ndarray:
        return self._get("ph", lambda: _parent_height(self.degree_seq))[1]

    @property
    def subtree_end(self) -> np.ndarray:
        """e[i]: one past the last vertex of the subtree rooted at i."""

        def build():
            return np.arange(1, self.n + 1, dtype=np.int64) + (_subtree_sizes(self.parent) - 1)

        return self._get("e", build)

    @property
    def lukasiewicz(self) -> np.ndarray:
        def build():
            w = np.empty(self.n + 1, dtype=np.int64)
            w[0] = 0
            np.cumsum(self.degree_seq - 1, out=w[1:])
            return w

        return self._get("w", build)

    @property
    def leaf_count(self) -> int:
        return int(np.count_nonzero(self.degree_seq == 0))

    @property
    def coding_paths(self) -> CodingPaths:
        def build():
            ch, cv = _contour(self.parent, self.height, self.subtree_end)
            return CodingPaths(self.lukasiewicz, self.height, ch, cv)

        return self._get("paths", build)

    # -- structural operations ----------------------------------------------
    def lex_to_contour_index(self, i: int) -> int:
        """b(i) = 2i - H_i: the contour time of the first visit to vertex i."""
        self._check_vertex(i)
        return 2 * i - int(self.height[i])

    def children(self, v: int) -> list:
        self._check_vertex(v)
        e = self.subtree_end
        out = []
        c = v + 1
        while c < e[v]:
            out.append(int(c))
            c = e[c]
        return out

    def mirror(self):
        """The child-order-reversed tree and the old->new vertex index map."""
        newdeg, imap = _mirror(self.degree_seq, self.subtree_end)
        return PlaneTree(newdeg, _validated=True), imap

    def subtree_at(self, v: int) -> "PlaneTree":
        self._check_vertex(v)
        e = int(self.subtree_end[v])
        return PlaneTree(self.degree_seq[v:e].copy(), _validated=True)

    def cut_at(self, v: int) -> "PlaneTree":
        """The tree with the strict descendants of v removed (v becomes a leaf)."""
        self._check_vertex(v)
        if v == 0:
            return PlaneTree(np.zeros(1, dtype=np.int64), _validated=True)
        e = int(self.subtree_end[v])
        deg = np.concatenate([self.degree_seq[:v], [0], self.degree_seq[e:]])
        return PlaneTree(deg, _validated=True)

    def trunk_of(self, v: int) -> TrunkSkeleton:
        self._check_vertex(v)
        if v == 0:
            raise RootHasNoTrunk("the root has no ancestors")
        x, u = _trunk_arrays(self.degree_seq, self.parent, self.subtree_end, self.height, v)
        return TrunkSkeleton(int(self.height[v]), x, u)

    def mrca(self, i: int, j: int) -> int:
        self._check_vertex(i)
        self._check_vertex(j)
        return int(_mrca(self.parent, self.height, i, j))

    def neveu(self, v: int) -> str:
        """Neveu word of a vertex, for debugging displays only."""
        self._check_vertex(v)
        if v == 0:
            return "<>"
        t = self.trunk_of(v)
        return ".".join(str(int(p)) for p in t.spine_pos)

    def _check_vertex(self, v):
        if not (0 <= v < self.n):
            raise IndexError(f"vertex {v} out of range for tree of size {self.n}")


# -- serialization ----------------------------------------------------------


def to_dsv(t: PlaneTree) -> str:
    """DSV1: line 1 the vertex count, line 2 the child counts."""
    return f"{t.n}\n" + " ".join(str(int(k)) for k in t.degree_seq) + "\n"


def from_dsv(text: str) -> PlaneTree:
    lines = text.splitlines()
    if len(lines) < 2:
        raise ValueError("DSV1 needs two lines: count, then child counts")
    n = int(lines[0].strip())
    deg = np.array([int(x) for x in lines[1].split()], dtype=np.int64)
    if len(deg) != n:
        raise ValueError(f"header says {n} vertices, found {len(deg)} child counts")
    return PlaneTree(deg)


def write_dsv(t: PlaneTree, path) -> None:
    with open(path, "w") as f:
        f.write(to_dsv(t))


def read_dsv(path) -> PlaneTree:
    with open(path) as f:
        return from_dsv(f.read())
