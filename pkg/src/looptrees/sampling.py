"""Tree samplers: unconditioned, exact-size, at-least-size, and trunk draws.

Every sampler is a pure function of (law, RandomSource): draws are addressed
by slot, never by call order, so a run is reproducible bit for bit no matter
how the internal buffers grow or how attempts are batched.

The exact-size sampler follows the cycle-lemma route: draw n child counts,
condition on their sum being n - 1, then rotate the sequence so the coded
walk first passes -1 exactly at the end.  For laws whose weight
prod mu(k_i) is constant across all degree sequences of a given size
(geometric families, and two-atom laws {0, c}) the conditioned increment
vector is uniform over its support, so it can be produced directly by a
lattice-path construction with no rejection at all; both shortcuts are
exercised against the generic route in the tests.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .backend import kernel
from .errors import (
    BudgetExhausted,
    InfeasibleSize,
    NotCritical,
    TooLargeToEnumerate,
    TreeTooLarge,
)
from .laws import Geometric, OffspringLaw
from .rng import Stream
from .trees import PlaneTree, TrunkSkeleton

logger = logging.getLogger("looptrees.sampling")

ENUMERATION_CAP = 12
_BGW_CHUNK0 = 64


# ---------------------------------------------------------------------------
# kernels


@kernel
def _partial_shuffle(m, size, u):
    """First m entries of a Fisher-Yates shuffle of range(size), driven by u.

    u[j] in [0, 1) selects the swap target for position j.  Only the prefix
    is needed, so the loop stops after m swaps.
    """
    arr = np.arange(size)
    for j in range(m):
        r = j + np.int64(u[j] * (size - j))
        if r >= size:
            r = size - 1
        tmp = arr[j]
        arr[j] = arr[r]
        arr[r] = tmp
    return arr[:m]


@kernel
def _first_hit(deg, target):
    """First index where the running sum of (deg - 1) equals target, else -1."""
    acc = np.int64(0)
    for i in range(deg.shape[0]):
        acc += deg[i] - 1
        if acc == target:
            return i
    return np.int64(-1)


# ---------------------------------------------------------------------------
# unconditioned BGW


def sample_bgw(law: OffspringLaw, src, max_vertices: int = 2**22) -> PlaneTree:
    """One tree distributed per the BGW law with the given offspring law.

    Child counts are generated in doubling chunks along a single slot range,
    so the result does not depend on the chunk schedule.  The walk coding is
    skip-free downward: the first time the running sum of (k_i - 1) hits -1
    is the tree size, and the prefix up to that point is a valid degree
    sequence by construction.
    """
    if law.mean > 1.0 + 1e-9:
        raise ValueError(
            f"supercritical law (mean {law.mean:.6g}); trees would be infinite "
            "with positive probability"
        )
    stream = src if isinstance(src, Stream) else src.replicate(0)
    chunks = []
    value = 0
    start = 0
    size = _BGW_CHUNK0
    while start < max_vertices:
        count = min(size, max_vertices - start)
        deg = law.draw_batch(stream, 2 * start, count)
        hit = int(_first_hit(deg, np.int64(-1 - value)))
        if hit >= 0:
            chunks.append(deg[: hit + 1])
            return PlaneTree(np.concatenate(chunks), _validated=True)
        chunks.append(deg)
        value += int(deg.sum()) - count
        start += count
        size *= 2
    raise TreeTooLarge(f"tree exceeded {max_vertices} vertices")


# ---------------------------------------------------------------------------
# exact-size conditioning


def _rotate_to_tree(deg: np.ndarray) -> PlaneTree:
    """Apply the unique cyclic rotation making the coded walk first-passage.

    For a sequence of n child counts summing to n - 1 the walk of increments
    k_i - 1 ends at -1, and exactly one rotation is a first-passage path:
    the one starting just after the first global minimum of the partial sums.
    """
    s = np.cumsum(deg - 1)
    i = int(np.argmin(s))
    return PlaneTree(np.roll(deg, -(i + 1)))


def _uniform_composition(stream: Stream, n: int) -> np.ndarray:
    """Uniform vector of n nonnegative integers summing to n - 1.

    Stars-and-bars: place n - 1 stars among 2n - 2 symbols (the rest are
    bars), read off the star runs between consecutive bars.  The star set is
    a uniform (n-1)-subset drawn by partial Fisher-Yates on slots
    [0, n - 1).
    """
    m = n - 1
    u = stream.u01_block(0, m)
    chosen = _partial_shuffle(m, 2 * m, u)
    ind = np.zeros(2 * m, dtype=np.int64)
    ind[chosen] = 1
    stars_before = np.cumsum(ind)
    bars = np.nonzero(ind == 0)[0]
    edges = np.concatenate(([0], stars_before[bars], [m]))
    return np.diff(edges)


def exact_n_route(law: OffspringLaw, n: int) -> str:
    """Which exact-size strategy ``method="auto"`` resolves to."""
    if n == 1:
        return "trivial"
    if isinstance(law, Geometric):
        return "composition"
    support = law.positive_support()
    if support is not None and len(support) == 1:
        return "placement"
    return "rejection"


def sample_bgw_exact_n(
    law: OffspringLaw,
    n: int,
    src,
    method: str = "auto",
    max_attempts: int = 10**6,
) -> PlaneTree:
    """One tree with exactly n vertices, distributed per BGW(. | size = n).

    ``method`` picks the conditioned-increment construction:

    * ``composition``: geometric laws only.  Every degree sequence of size n
      has the same weight, so the conditioned increments are uniform over
      compositions of n - 1 into n parts; sampled directly, no rejection.
    * ``placement``: laws supported on {0, c}.  The (n-1)/c positions of the
      c-children are a uniform subset.
    * ``rejection``: draw n i.i.d. child counts per attempt (attempt a on
      slots [2an, 2(a+1)n)) and keep the first batch summing to n - 1.
    * ``auto``: the cheapest exact route for the law.

    All routes finish with the same cycle rotation and produce the same
    conditional law.
    """
    n = int(n)
    if n < 1:
        raise InfeasibleSize("tree size must be at least 1")
    if not law.feasible_size(n):
        raise InfeasibleSize(f"no tree with {n} vertices under {law.label()}")
    stream = src if isinstance(src, Stream) else src.replicate(0)
    if n == 1:
        return PlaneTree(np.zeros(1, dtype=np.int64), _validated=True)
    if method == "auto":
        method = exact_n_route(law, n)

    if method == "composition":
        if not isinstance(law, Geometric):
            raise ValueError("composition route is exact only for geometric laws")
        return _rotate_to_tree(_uniform_composition(stream, n))

    if method == "placement":
        support = law.positive_support()
        if support is None or len(support) != 1:
            raise ValueError("placement route needs support {0, c}")
        c = int(support[0])
        j = (n - 1) // c
        u = stream.u01_block(0, j)
        deg = np.zeros(n, dtype=np.int64)
        deg[_partial_shuffle(j, n, u)] = c
        return _rotate_to_tree(deg)

    if method == "rejection":
        # attempt a lives on slots [2an, 2(a+1)n), so attempts can be drawn
        # in blocks without changing any accepted sample
        a = 0
        block = 8
        while a < max_attempts:
            b = min(block, max_attempts - a, max(1, 65536 // n))
            deg = law.draw_batch(stream, a * 2 * n, b * n).reshape(b, n)
            hits = np.nonzero(deg.sum(axis=1) == n - 1)[0]
            if hits.size:
                logger.debug(
                    "exact-size n=%d accepted on attempt %d", n, a + int(hits[0]) + 1
                )
                return _rotate_to_tree(deg[int(hits[0])])
            a += b
            block *= 2
        raise BudgetExhausted(
            f"no increment batch summed to {n - 1} in {max_attempts} attempts"
        )

    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# at-least-size conditioning


def sample_bgw_at_least_n(
    law: OffspringLaw,
    n: int,
    src,
    method: str = "auto",
    max_attempts: int = 10**6,
    max_vertices: int = 2**22,
    stats: dict | None = None,
) -> PlaneTree:
    """One tree with at least n vertices, distributed per BGW(. | size >= n).

    ``naive`` redraws whole trees until one is large enough; attempt a runs
    on the child stream tagged a, so the accepted tree is independent of
    max_attempts.  ``stratified`` decomposes on the first child count >= t0
    and is worthwhile for heavy-tailed laws at large n, where the naive
    acceptance rate ~ P(size >= n) is polynomially small.  ``auto`` takes
    the stratified route exactly in that regime.

    When ``stats`` is a dict, the number of attempts used is written to it.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    if max_vertices < n:
        raise ValueError("max_vertices must be at least n")
    stream = src if isinstance(src, Stream) else src.replicate(0)
    if method == "auto":
        heavy = getattr(law, "beta", None)
        big = heavy is not None and math.isfinite(heavy) and law.mean < 1.0
        method = "stratified" if (big and n > 2048) else "naive"
    if method == "stratified":
        from .bigjump import stratified_at_least_n

        return stratified_at_least_n(
            law, n, stream, max_attempts=max_attempts, stats=stats
        )
    if method != "naive":
        raise ValueError(f"unknown method {method!r}")
    for a in range(max_attempts):
        t = sample_bgw(law, stream.child(a), max_vertices=max_vertices)
        if t.n >= n:
            if stats is not None:
                stats["attempts"] = a + 1
            logger.debug(
                "at-least n=%d accepted after %d attempts", n, a + 1
            )
            return t
    raise BudgetExhausted(f"no tree of size >= {n} in {max_attempts} attempts")


# ---------------------------------------------------------------------------
# size-biased trunks and scalar limit laws


def size_biased(law: OffspringLaw):
    """The law j -> j mu(j) / mean, the reweighting seen along a spine."""
    return law.size_biased()


def sample_trunk_star(law: OffspringLaw, h: int, src) -> TrunkSkeleton:
    """A depth-h spine skeleton: sizes i.i.d. size-biased, positions uniform.

    Spine child counts x_i consume slots [0, 2h); the 1-based spine
    positions u_i, uniform on {1..x_i}, consume slots [2h, 3h).
    """
    if not law.is_critical:
        raise NotCritical(
            f"trunk skeletons are defined for critical laws; mean is {law.mean:.6g}"
        )
    h = int(h)
    if h < 1:
        raise ValueError("h must be at least 1")
    stream = src if isinstance(src, Stream) else src.replicate(0)
    x = law.size_biased().draw_batch(stream, 0, h)
    u = stream.u01_block(2 * h, h)
    pos = 1 + np.minimum((u * x).astype(np.int64), x - 1)
    return TrunkSkeleton(h, x, pos)


def sample_J(gamma: float, beta: float, src, slot0: int = 0, count: int | None = None):
    """Draws of the first-passage jump law, P(J >= x) = (gamma/x)^beta, x >= gamma.

    Inverse CDF on 1 - u so the u = 0 slot maps to the left endpoint gamma.
    Scalar when count is None, else an array of ``count`` values on slots
    [slot0, slot0 + count).
    """
    if not beta > 1:
        raise ValueError("need beta > 1")
    if not gamma > 0:
        raise ValueError("need gamma > 0")
    stream = src if isinstance(src, Stream) else src.replicate(0)
    u = stream.u01_block(slot0, 1 if count is None else int(count))
    out = gamma * np.power(1.0 - u, -1.0 / beta)
    return float(out[0]) if count is None else out


def sample_R(src, slot0: int = 0, count: int | None = None):
    """Draws of the Rayleigh-type height limit, density 2x exp(-x^2), x >= 0."""
    stream = src if isinstance(src, Stream) else src.replicate(0)
    u = stream.u01_block(slot0, 1 if count is None else int(count))
    out = np.sqrt(-np.log1p(-u))
    return float(out[0]) if count is None else out


# ---------------------------------------------------------------------------
# exact enumeration (oracle-grade, small n)


def enumerate_trees(law: OffspringLaw, n: int):
    """All plane trees with n vertices paired with their exact BGW weights.

    Child counts are capped at n - 1, which loses nothing: a tree with n
    vertices cannot have a vertex with n children.  Zero-probability counts
    are pruned, so the list covers exactly the support of the conditioned
    law and the weights sum to P(size = n).  Lexicographic order on degree
    sequences.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > ENUMERATION_CAP:
        raise TooLargeToEnumerate(
            f"{n} vertices; enumeration is capped at {ENUMERATION_CAP}"
        )
    cap = n - 1
    if law.max_support is not None:
        cap = min(cap, law.max_support)
    pmf = law.pmf_array(cap + 1)
    ks = [k for k in range(cap + 1) if pmf[k] > 0.0]
    out = []
    seq = np.empty(n, dtype=np.int64)

    def rec(j, value, weight):
        if j == n - 1:
            # the walk sits at ``value``; the final step k - 1 must land on -1
            k = -value
            if 0 <= k <= cap and pmf[k] > 0.0:
                seq[j] = k
                out.append((PlaneTree(seq.copy(), _validated=True), weight * pmf[k]))
            return
        hi = n - j - 1 - value  # keep the walk reachable: value' <= steps left - 1
        for k in ks:
            if k > hi:
                break
            vp = value + k - 1
            if vp >= 0:
                seq[j] = k
                rec(j + 1, vp, weight * pmf[k])

    rec(0, 0, 1.0)
    return out


_PSIZE_CACHE: dict = {}


def tree_size_probability(law: OffspringLaw, n: int) -> float:
    """P(size = n) as an exact enumeration sum (n <= 12)."""
    key = (law.label(), int(n))
    hit = _PSIZE_CACHE.get(key)
    if hit is None:
        hit = math.fsum(w for _, w in enumerate_trees(law, n))
        _PSIZE_CACHE[key] = hit
    return hit


def forest_size_probability(law: OffspringLaw, n: int, k: int) -> float:
    """P(k independent trees total exactly n vertices), by enumeration.

    Convolves the enumerated single-tree size law over compositions of n
    into k positive parts; every part stays within the enumeration cap.
    """
    n, k = int(n), int(k)
    if k < 1:
        raise ValueError("k must be at least 1")
    if n - k + 1 > ENUMERATION_CAP:
        raise TooLargeToEnumerate(
            f"largest part {n - k + 1} exceeds enumeration cap {ENUMERATION_CAP}"
        )
    if k == 1:
        return tree_size_probability(law, n) if n >= 1 else 0.0
    total = 0.0
    for m in range(1, n - k + 2):
        total += tree_size_probability(law, m) * forest_size_probability(
            law, n - m, k - 1
        )
    return total
