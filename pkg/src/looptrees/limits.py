"""Scaling constants, exact identities, and convergence diagnostics.

The checks here come in two flavors.  Exact finite-n identities (the walk
return tables, the trunk bias identity, the cycle-lemma counts) are
computed by enumeration or certified convolution and must agree to float
precision.  Asymptotic statements are replaced by statistics that should
be small at fixed n and shrink along a geometric ladder of n; those land
in EmpiricalLaw objects so callers can take medians, quantiles, and KS
statistics against reference distributions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NoVertexAtHeight,
    NotCritical,
    TooLarge,
    TooLargeToEnumerate,
)
from .laws import OffspringLaw
from .looptree import (
    build_loop,
    distances_from,
    distances_to_set,
    largest_cycle,
    profile_Hcirc,
)
from .rng import Stream
from .sampling import (
    enumerate_trees,
    forest_size_probability,
    sample_bgw_at_least_n,
    sample_bgw_exact_n,
    sample_trunk_star,
    tree_size_probability,
)
from .walks import BinScheme, TVEstimate, windowed_tv

logger = logging.getLogger("looptrees.limits")

_ENUM_CAP = 9


def _stream_of(src) -> Stream:
    return src if isinstance(src, Stream) else src.replicate(0)


@dataclass(frozen=True)
class _ChildSource:
    """Adapts a Stream to the replicate() interface of RandomSource."""

    stream: Stream

    def replicate(self, r: int = 0) -> Stream:
        return self.stream.child(r)


# ---------------------------------------------------------------------------
# sample containers


@dataclass(frozen=True)
class EmpiricalLaw:
    """Sorted sample with weights; the unit for every statistical check.

    ``excluded`` counts draws that produced no usable value (for example a
    zero denominator in a ratio) and were left out of the sample.
    """

    values: np.ndarray
    weights: np.ndarray
    excluded: int = 0

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if v.shape != w.shape or v.ndim != 1:
            raise ValueError("values and weights must be matching vectors")
        if v.size and np.any(np.diff(v) < 0):
            raise ValueError("values must be sorted")
        if v.size and abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @staticmethod
    def from_sample(xs, excluded: int = 0) -> "EmpiricalLaw":
        xs = np.sort(np.asarray(xs, dtype=np.float64))
        n = xs.size
        if n == 0:
            return EmpiricalLaw(xs, xs.copy(), excluded)
        return EmpiricalLaw(xs, np.full(n, 1.0 / n), excluded)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def mean(self) -> float:
        return float(np.sum(self.values * self.weights))

    def quantile(self, q: float) -> float:
        if not self.values.size:
            raise ValueError("empty sample")
        cw = np.cumsum(self.weights)
        return float(self.values[np.searchsorted(cw, q, side="left").clip(0, self.values.size - 1)])

    def median(self) -> float:
        return self.quantile(0.5)

    def cdf(self, x: float) -> float:
        i = np.searchsorted(self.values, x, side="right")
        return float(np.sum(self.weights[:i]))

    def ks_against(self, cdf) -> float:
        """Two-sided KS statistic against a reference CDF callable."""
        if not self.values.size:
            raise ValueError("empty sample")
        cw = np.cumsum(self.weights)
        ref = np.asarray(cdf(self.values), dtype=np.float64)
        upper = np.max(np.abs(cw - ref))
        lower = np.max(np.abs(np.concatenate(([0.0], cw[:-1])) - ref))
        return float(max(upper, lower))


@dataclass(frozen=True)
class MetricSample:
    """A finite metric space as ids plus distances.

    Small spaces carry the full matrix; large ones may carry sampled pairs
    only (rows (i, j, d)), in which case the exact comparators refuse them.
    """

    ids: tuple
    d: np.ndarray | None = None
    pair_dists: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        if (self.d is None) == (self.pair_dists is None):
            raise ValueError("give exactly one of d and pair_dists")
        if self.d is not None:
            m = np.ascontiguousarray(self.d, dtype=np.float64)
            k = len(self.ids)
            if m.shape != (k, k):
                raise ValueError("matrix shape must match ids")
            if np.any(np.diag(m) != 0.0) or not np.allclose(m, m.T, atol=1e-12):
                raise ValueError("need a symmetric matrix with zero diagonal")
            if k <= 24:
                for i in range(k):
                    via = m[:, [i]] + m[[i], :]
                    if np.any(m > via + 1e-9):
                        raise ValueError("triangle inequality fails")
            object.__setattr__(self, "d", m)

    @property
    def size(self) -> int:
        return len(self.ids)

    @staticmethod
    def from_matrix(d, ids=None) -> "MetricSample":
        d = np.asarray(d, dtype=np.float64)
        return MetricSample(ids if ids is not None else tuple(range(d.shape[0])), d=d)


# ---------------------------------------------------------------------------
# constants and scaling


def c_mu(law: OffspringLaw) -> float:
    """Loop-to-tree distance ratio constant; 1/2 in the infinite-variance case."""
    if not law.is_critical:
        raise NotCritical(f"{law.label()} is not critical")
    if not math.isfinite(law.variance):
        return 0.5
    return 0.25 * (law.variance + 4.0 - law.even_mass())


def c_bar_mu(law: OffspringLaw) -> float:
    """Same ratio for loops closed without the parent edge."""
    if not law.is_critical:
        raise NotCritical(f"{law.label()} is not critical")
    if not math.isfinite(law.variance):
        return 0.5
    return 0.25 * (law.variance + law.even_mass())


def c_mu_oracle(law: OffspringLaw, draws: int, src, bar: bool = False):
    """Monte Carlo check of the constants: E over a size-biased child count
    X* and a uniform child slot U of min(U, X* - U + 1) (or min(U, X* - U)
    for the bar variant).  Returns (estimate, standard error)."""
    star = law.size_biased()
    stream = _stream_of(src)
    tot = 0.0
    tot2 = 0.0
    left = int(draws)
    block = 0
    while left > 0:
        c = min(1 << 20, left)
        st = stream.child(block)
        x = star.draw_batch(st, 0, c)
        u = st.u01_block(2 * c, c)
        pos = 1 + np.minimum((u * x).astype(np.int64), x - 1)
        val = np.minimum(pos, x - pos + (0 if bar else 1)).astype(np.float64)
        tot += float(val.sum())
        tot2 += float((val * val).sum())
        left -= c
        block += 1
    mean = tot / draws
    var = max(tot2 / draws - mean * mean, 0.0)
    return mean, math.sqrt(var / draws)


class ScalingSequence:
    """B_n for a critical law: sigma*sqrt(n/2) under finite variance, else
    the solution of n*v(B)/B^2 = 2 with v(m) the variance of the offspring
    variable truncated at m (nondecreasing in n by construction)."""

    def __init__(self, law: OffspringLaw):
        if not law.is_critical:
            raise NotCritical(f"{law.label()} is not critical")
        self.law = law
        self.mode = (
            "finite-variance"
            if math.isfinite(law.variance)
            else "infinite-variance-a2"
        )
        self._s1 = None
        self._s2 = None

    def _truncated_var(self, m: int) -> float:
        m = max(int(m), 1)
        if self._s1 is None or self._s1.size <= m:
            cap = max(2 * m + 2, 1024)
            pmf = self.law.pmf_array(cap)
            k = np.arange(cap, dtype=np.float64)
            self._s1 = np.cumsum(k * pmf)
            self._s2 = np.cumsum(k * k * pmf)
        return float(self._s2[m] - self._s1[m] ** 2)

    def value(self, n: int) -> float:
        n = int(n)
        if n < 1:
            raise ValueError("need n >= 1")
        if self.mode == "finite-variance":
            return math.sqrt(self.law.variance) * math.sqrt(n / 2.0)
        lo, hi = 1.0, 2.0
        while n * self._truncated_var(int(hi)) / (hi * hi) > 2.0:
            hi *= 2.0
            if hi > 1e12:
                raise ValueError("no solution for the scaling equation")
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            if n * self._truncated_var(int(mid)) / (mid * mid) > 2.0:
                lo = mid
            else:
                hi = mid
        return max(hi, 1.0)

    def values(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        out = np.array([self.value(int(n)) for n in ns])
        order = np.argsort(ns, kind="stable")
        out[order] = np.maximum.accumulate(out[order])
        return out


_SCALING_CACHE: dict = {}


def scaling_for(law: OffspringLaw) -> ScalingSequence:
    key = law.label()
    hit = _SCALING_CACHE.get(key)
    if hit is None:
        hit = ScalingSequence(law)
        _SCALING_CACHE[key] = hit
    return hit


def bn_value(law: OffspringLaw, n: int) -> float:
    return scaling_for(law).value(n)


def bn_values(law: OffspringLaw, ns) -> np.ndarray:
    return scaling_for(law).values(ns)


# ---------------------------------------------------------------------------
# exact return tables for the increment walk


@dataclass(frozen=True)
class PhiTable:
    """phi_n(j) = P(W_n = -j) for the n-step increment walk.

    probs[i] = P(W_n = w_lo + i); values above the cap were dropped during
    convolution and their total mass is the certified ``deficit``, a
    uniform bound on how much any stored entry understates the truth.
    """

    n: int
    w_lo: int
    probs: np.ndarray
    deficit: float

    def __call__(self, j) -> float:
        i = -int(j) - self.w_lo
        if 0 <= i < self.probs.shape[0]:
            return float(self.probs[i])
        return 0.0

    def by_j(self):
        """(j values ascending, phi values) over the stored range."""
        w_hi = self.w_lo + self.probs.shape[0] - 1
        return np.arange(-w_hi, -self.w_lo + 1), self.probs[::-1]

    @property
    def total(self) -> float:
        return float(self.probs.sum())


def _conv_trunc(a: np.ndarray, b: np.ndarray, keep: int) -> np.ndarray:
    """Linear convolution keeping the first ``keep`` coefficients."""
    full = a.shape[0] + b.shape[0] - 1
    if min(a.shape[0], b.shape[0]) < 64:
        out = np.convolve(a, b)
    else:
        nfft = 1
        while nfft < full:
            nfft *= 2
        out = np.fft.irfft(np.fft.rfft(a, nfft) * np.fft.rfft(b, nfft), nfft)[:full]
        np.clip(out, 0.0, None, out=out)
    return out[:keep]


_PHI_CACHE: dict = {}


def phi(law: OffspringLaw, n: int, cap: int | None = None) -> PhiTable:
    """Exact distribution table of the n-step walk, certified truncation.

    The walk starts at 0 and takes steps distributed as offspring minus
    one.  Values below -n are impossible; values above ``cap`` are dropped
    and accounted for in the deficit.  The default cap is twenty standard
    deviations (truncated variance when infinite).
    """
    n = int(n)
    if n < 1:
        raise ValueError("need n >= 1")
    if cap is None:
        var = law.variance
        if not math.isfinite(var):
            s = scaling_for(law) if law.is_critical else None
            if s is not None:
                cap = 64 + int(20.0 * s.value(n))
            else:
                pmf = law.pmf_array(n + 1)
                k = np.arange(n + 1, dtype=np.float64)
                var = float(np.sum(k * k * pmf) - np.sum(k * pmf) ** 2)
                cap = 64 + int(20.0 * math.sqrt(n * var))
        else:
            cap = 64 + int(20.0 * math.sqrt(n * var))
    cap = int(cap)
    key = (law.label(), n, cap)
    hit = _PHI_CACHE.get(key)
    if hit is not None:
        return hit
    if n + cap + 1 > 1 << 26:
        raise TooLarge(f"walk table of length {n + cap + 1} exceeds the cap")
    s_hi = cap if law.max_support is None else min(law.max_support - 1, cap)
    step = law.pmf_array(s_hi + 2)  # index k -> step value k - 1
    acc = np.array([1.0])  # zero steps: point mass at value 0
    lo = 0
    if n <= 64:
        for _ in range(n):
            lo -= 1
            acc = _conv_trunc(acc, step, cap - lo + 1)
    else:
        base = step
        blo = -1
        e = n
        while e:
            if e & 1:
                lo += blo
                acc = _conv_trunc(acc, base, cap - lo + 1)
            e >>= 1
            if e:
                blo *= 2
                base = _conv_trunc(base, base, cap - blo + 1)
    deficit = max(0.0, 1.0 - float(acc.sum()))
    tbl = PhiTable(n=n, w_lo=lo, probs=acc, deficit=deficit)
    _PHI_CACHE[key] = tbl
    return tbl


def kemperman_discrepancy(law: OffspringLaw, n: int) -> float:
    """|P(tree size = n) - phi_n(1)/n|, both sides exact."""
    return abs(tree_size_probability(law, n) - phi(law, n)(1) / n)


def forest_discrepancy(law: OffspringLaw, n: int, k: int) -> float:
    """|P(k-tree forest totals n) - (k/n) phi_n(k)|, both sides exact."""
    return abs(forest_size_probability(law, n, k) - (k / n) * phi(law, n)(k))


def llt_check(law: OffspringLaw, n: int) -> float:
    """sup over k of |B_n phi_n(k) - e^{-k^2/(4 B_n^2)}/sqrt(4 pi)|.

    Meaningful for aperiodic critical laws with finite variance; a lattice
    with span 2 (for example the two-atom law on {0, 2}) keeps parity mass
    and the statistic will not shrink.
    """
    if not law.is_critical:
        raise NotCritical(f"{law.label()} is not critical")
    if not math.isfinite(law.variance):
        raise ValueError("needs finite variance")
    b = bn_value(law, n)
    tbl = phi(law, n)
    js, vals = tbl.by_j()
    gauss = np.exp(-(js.astype(np.float64) ** 2) / (4.0 * b * b)) / math.sqrt(4.0 * math.pi)
    stat = float(np.max(np.abs(b * vals - gauss)))
    # beyond the stored window phi is 0 up to the deficit
    edge = math.exp(-(min(abs(js[0]), abs(js[-1])) ** 2) / (4.0 * b * b)) / math.sqrt(4.0 * math.pi)
    return max(stat, edge, b * tbl.deficit)


# ---------------------------------------------------------------------------
# the trunk bias identity, fully enumerated


def _skeleton_weight(law: OffspringLaw, counts) -> float:
    w = 1.0
    for x in counts:
        w *= law.pmf(int(x))
    return w


def bias_identity_check(law: OffspringLaw, n: int) -> float:
    """Exhaustive check of the trunk reweighting identity at size n.

    Left side: enumerate all trees of size n and all vertices, accumulate
    the probability of each observed trunk skeleton under (uniform vertex,
    conditioned tree).  Right side: enumerate skeletons directly and weight
    by Lambda * phi_{n-h}(Lambda) / ((n-h) * phi_n(1)) times the product of
    offspring probabilities of the spine counts.  Returns the largest
    absolute gap over all (height, skeleton) cells.
    """
    n = int(n)
    if n > _ENUM_CAP:
        raise TooLargeToEnumerate(f"bias identity enumerates all trees; n={n} > {_ENUM_CAP}")
    total = tree_size_probability(law, n)
    if total <= 0.0:
        raise ValueError(f"{law.label()} cannot produce a tree of size {n}")
    root_key = (0, (), ())
    lhs: dict = {}
    for t, w in enumerate_trees(law, n):
        for v in range(n):
            key = root_key if v == 0 else t.trunk_of(v).key()
            lhs[key] = lhs.get(key, 0.0) + w / (total * n)

    phi_n1 = phi(law, n, cap=n + 2)(1)
    rhs: dict = {}

    def emit(h, counts, poss):
        lam = sum(counts) - h + 1
        m = n - h
        val = (
            _skeleton_weight(law, counts)
            * lam
            * phi(law, m, cap=n + 2)(lam)
            / (m * phi_n1)
        )
        rhs[(h, tuple(counts), tuple(poss))] = val

    def grow(h_target, counts, poss, budget):
        if len(counts) == h_target:
            emit(h_target, counts, poss)
            return
        for x in range(1, budget + 1):
            if law.pmf(x) <= 0.0:
                continue
            for p in range(1, x + 1):
                grow(h_target, counts + [x], poss + [p], budget - x)

    for h in range(0, n):
        grow(h, [], [], n - 1)

    worst = 0.0
    for key in set(lhs) | set(rhs):
        worst = max(worst, abs(lhs.get(key, 0.0) - rhs.get(key, 0.0)))
    return worst


# ---------------------------------------------------------------------------
# spinal and profile statistics


def _uniform_vertex(stream: Stream, n: int) -> int:
    return min(int(stream.u01(0) * n), n - 1)


def spinal_ratio_stats(law: OffspringLaw, n: int, replicates: int, src) -> EmpiricalLaw:
    """Sample of (loop distance root to V) / (right-branch count of V).

    The denominator equals the increment walk value at the vertex's index;
    draws with a zero denominator are excluded and counted.
    """
    ratios = []
    zeros = 0
    for r in range(replicates):
        rep = src.replicate(r)
        t = sample_bgw_exact_n(law, n, rep.child(0))
        u = _uniform_vertex(rep.child(1), t.n)
        rv = int(t.lukasiewicz[u])
        if rv == 0:
            zeros += 1
            continue
        g = build_loop(t)
        ratios.append(int(profile_Hcirc(g)[u]) / rv)
    return EmpiricalLaw.from_sample(np.asarray(ratios), excluded=zeros)


def profile_coupling_stat(law: OffspringLaw, n: int, src) -> float:
    """|H(U) - c_mu W(U)| / B_n for one conditioned tree and uniform U,
    where H is the loop distance to the root and W the walk value."""
    rep = _stream_of(src)
    t = sample_bgw_exact_n(law, n, rep.child(0))
    u = _uniform_vertex(rep.child(1), t.n)
    g = build_loop(t)
    h = int(profile_Hcirc(g)[u])
    w = int(t.lukasiewicz[u])
    return abs(h - c_mu(law) * w) / bn_value(law, n)


def loop_vs_scaled_tree_distortion(
    law: OffspringLaw, n: int, pair_budget: int, src
) -> EmpiricalLaw:
    """|d_loop(u,v)/B_n - c_mu (B_n/n) d_tree(u,v)| over sampled pairs.

    One conditioned tree per call; BFS from each distinct left endpoint.
    """
    rep = _stream_of(src)
    t = sample_bgw_exact_n(law, n, rep.child(0))
    g = build_loop(t)
    b = bn_value(law, n)
    c = c_mu(law)
    us = (rep.child(1).u01_block(0, pair_budget) * t.n).astype(np.int64)
    vs = (rep.child(1).u01_block(pair_budget, pair_budget) * t.n).astype(np.int64)
    np.clip(us, 0, t.n - 1, out=us)
    np.clip(vs, 0, t.n - 1, out=vs)
    height = t.height
    vals = np.empty(pair_budget, dtype=np.float64)
    for u in np.unique(us):
        darr = distances_from(g, g.vertex_of_tree(int(u)))
        sel = np.nonzero(us == u)[0]
        for i in sel:
            v = int(vs[i])
            dloop = int(darr[g.vertex_of_tree(v)])
            dtree = int(height[u]) + int(height[v]) - 2 * int(height[t.mrca(int(u), v)])
            vals[i] = abs(dloop / b - c * (b / t.n) * dtree)
    return EmpiricalLaw.from_sample(vals)


def height_sample(law: OffspringLaw, n: int, replicates: int, src) -> EmpiricalLaw:
    """Rescaled uniform-vertex heights H(U) B_n / n over conditioned trees."""
    b = bn_value(law, n)
    xs = np.empty(replicates, dtype=np.float64)
    for r in range(replicates):
        rep = src.replicate(r)
        t = sample_bgw_exact_n(law, n, rep.child(0))
        u = _uniform_vertex(rep.child(1), t.n)
        xs[r] = int(t.height[u]) * b / n
    return EmpiricalLaw.from_sample(xs)


def height_law_check(law: OffspringLaw, n: int, replicates: int, src) -> float:
    """KS statistic of rescaled uniform-vertex heights against the law with
    tail e^{-x^2} (the fixed-height limit of the trunk construction)."""
    emp = height_sample(law, n, replicates, src)
    return emp.ks_against(lambda x: 1.0 - np.exp(-x * x))


def trunk_tv_check(
    law: OffspringLaw,
    n: int,
    t: float,
    window: int,
    N: int,
    src,
    bins: BinScheme | None = None,
    stats: dict | None = None,
) -> TVEstimate:
    """Binned TV between trunks of conditioned trees and direct trunk draws.

    Trunks are read at height floor(t*n/B_n); each is summarized by its
    first ``window`` (child count, spine position) pairs, binned per
    coordinate.  Trees without a vertex at the target height are excluded
    and counted in stats; a run of 8N such trees raises NoVertexAtHeight.
    """
    b = bn_value(law, n)
    h = int(t * n / b)
    if h < 1:
        raise ValueError(f"target height floor({t}*{n}/B_n) = {h}; need >= 1")
    if window > h:
        raise ValueError(f"window {window} exceeds trunk height {h}")
    if bins is None:
        bins = BinScheme((2, 3))
    excluded = 0

    def tree_rows(stream, count):
        nonlocal excluded
        rows = np.empty((count, 2 * window), dtype=np.int64)
        filled = 0
        i = 0
        while filled < count:
            if i >= 8 * count + 64:
                raise NoVertexAtHeight(
                    f"no vertex at height {h} in {i} conditioned trees"
                )
            rep = stream.child(i)
            i += 1
            tr = sample_bgw_exact_n(law, n, rep.child(0))
            level = np.nonzero(tr.height == h)[0]
            if level.size == 0:
                excluded += 1
                continue
            pick = min(int(rep.child(1).u01(0) * level.size), level.size - 1)
            sk = tr.trunk_of(int(level[pick]))
            rows[filled, 0::2] = sk.child_counts[:window]
            rows[filled, 1::2] = sk.spine_pos[:window]
            filled += 1
        return rows

    def star_rows(stream, count):
        rows = np.empty((count, 2 * window), dtype=np.int64)
        for i in range(count):
            sk = sample_trunk_star(law, h, stream.child(i))
            rows[i, 0::2] = sk.child_counts[:window]
            rows[i, 1::2] = sk.spine_pos[:window]
        return rows

    source = _ChildSource(src) if isinstance(src, Stream) else src
    est = windowed_tv(tree_rows, star_rows, 2 * window, bins, N, source)
    if stats is not None:
        stats["excluded"] = excluded
        stats["height"] = h
    return est


# ---------------------------------------------------------------------------
# condensation statistics for heavy-tailed conditioning


def pareto_cdf(x, gamma: float, beta: float):
    """CDF of the scaled overshoot law gamma * U^(-1/beta)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= gamma, 1.0 - (gamma / np.maximum(x, gamma)) ** beta, 0.0)
    return out if out.ndim else float(out)


def condensation_stats(law: OffspringLaw, n: int, replicates: int, src, stats: dict | None = None):
    """Per replicate of a tree conditioned to size >= n: the maximum child
    count over n, the largest remaining component after removing that
    vertex over n, and a correspondence upper bound on the GH distance
    between the loop graph over n and a circle of circumference maxdeg/n.

    Returns three EmpiricalLaw objects in that order.
    """
    maxdeg = np.empty(replicates, dtype=np.float64)
    second = np.empty(replicates, dtype=np.float64)
    ghb = np.empty(replicates, dtype=np.float64)
    for r in range(replicates):
        rep = src.replicate(r)
        t = sample_bgw_at_least_n(law, n, rep)
        g = build_loop(t)
        cyc_len, vstar = largest_cycle(g)
        k = int(t.degree_seq[vstar])
        maxdeg[r] = k / n
        end = t.subtree_end
        kids = t.children(vstar)
        sizes = [int(end[c] - c) for c in kids]
        sizes.append(int(t.n - (end[vstar] - vstar)))
        second[r] = max(sizes) / n
        nodes = np.array(
            [g.vertex_of_tree(vstar)] + [g.vertex_of_tree(c) for c in kids],
            dtype=np.int64,
        )
        delta = float(distances_to_set(g, nodes).max()) / n
        j = k / n
        ghb[r] = 0.5 * (2.0 * delta + abs(cyc_len / n - j) + j / max(cyc_len, 1))
    if stats is not None:
        stats["replicates"] = replicates
    return (
        EmpiricalLaw.from_sample(maxdeg),
        EmpiricalLaw.from_sample(second),
        EmpiricalLaw.from_sample(ghb),
    )


# ---------------------------------------------------------------------------
# exact Gromov-Hausdorff on small spaces


def _gh_feasible(da: np.ndarray, db: np.ndarray, tol: float) -> bool:
    na, nb = da.shape[0], db.shape[0]

    def compatible(pair, chosen):
        a, b = pair
        for a2, b2 in chosen:
            if abs(da[a, a2] - db[b, b2]) > tol:
                return False
        return True

    def cover_a(i, chosen):
        if i == na:
            return cover_b(0, chosen)
        for b in range(nb):
            p = (i, b)
            if compatible(p, chosen):
                if cover_a(i + 1, chosen + [p]):
                    return True
        return False

    def cover_b(j, chosen):
        if j == nb:
            return True
        if any(b == j for _, b in chosen):
            return cover_b(j + 1, chosen)
        for a in range(na):
            p = (a, j)
            if compatible(p, chosen):
                if cover_b(j + 1, chosen + [p]):
                    return True
        return False

    return cover_a(0, [])


def gh_exact_small(A, B) -> float:
    """Exact Gromov-Hausdorff distance between spaces of at most 7 points.

    Half the minimum over correspondences of the distortion; the minimum
    is found by binary search over candidate distortion values with a
    backtracking cover search at each threshold.
    """
    da = A.d if isinstance(A, MetricSample) else np.asarray(A, dtype=np.float64)
    db = B.d if isinstance(B, MetricSample) else np.asarray(B, dtype=np.float64)
    if da is None or db is None:
        raise ValueError("exact GH needs full distance matrices")
    if da.shape[0] > 7 or db.shape[0] > 7:
        raise TooLarge("exact GH search supports at most 7 points per space")
    cand = np.unique(np.abs(da.reshape(-1, 1) - db.reshape(1, -1)).ravel())
    lo, hi = 0, cand.size - 1
    if _gh_feasible(da, db, float(cand[0]) + 1e-12):
        return 0.5 * float(cand[0])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _gh_feasible(da, db, float(cand[mid]) + 1e-12):
            hi = mid
        else:
            lo = mid
    return 0.5 * float(cand[hi])
