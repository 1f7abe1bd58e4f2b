"""Offspring distributions and their exact tails, moments, and samplers.

Five families cover the regimes the experiments probe: arbitrary finite
tables, geometric, polynomial-tail laws with finite and infinite variance,
and a parity-skewed polynomial/exponential mixture.  Everything downstream
(walk DPs, alias draws, tail inversions) consumes laws through the same
small surface: ``pmf_array``, ``tail``, ``first_moment_tail``, and
``tables``.

Normalizations and tails are closed-form; polynomial tails use the Hurwitz
zeta function, so ``tail(k)`` is exact to double precision at any ``k``.
Sampling is alias tables over a finite head plus an exact inverse-tail
completion for the rare draw beyond it, so no law is ever truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta as _zeta  # _zeta(s, a) is the Hurwitz zeta

from .backend import jitable

#: largest alias-table head; escapes past it are ~1e-11 per draw at worst
_KCAP_MAX = 1 << 17
_HEAD_TAIL_TARGET = 1e-12
_CRIT_TOL = 1e-12

_E = math.e


@dataclass
class SamplerTables:
    """Plain arrays a kernel needs to draw from and integrate a law.

    ``pmf[k]`` is exact for ``k < K``; ``tails[k] = P(X >= k)`` is exact for
    ``k <= K+1``.  ``head_mass = 1 - tails[K]``; a selector uniform at or
    above it signals the tail-escape path, resolved outside kernels by
    :meth:`OffspringLaw.tail_quantile`.
    """

    K: int
    pmf: np.ndarray
    tails: np.ndarray
    head_mass: float
    alias_prob: np.ndarray
    alias_idx: np.ndarray


def _build_alias(weights: np.ndarray):
    """Vose alias construction; deterministic given the weight vector."""
    K = len(weights)
    scaled = weights * (K / weights.sum())
    prob = np.ones(K, dtype=np.float64)
    alias = np.arange(K, dtype=np.int64)
    small = [i for i in range(K) if scaled[i] < 1.0]
    large = [i for i in range(K) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    return prob, alias


@jitable
def alias_pick(u1, u2, K, head_mass, alias_prob, alias_idx):
    """Map two uniforms to a head value, or -1 for a tail escape."""
    if u1 >= head_mass:
        return -1
    i = int(u1 / head_mass * K)
    if i >= K:
        i = K - 1
    if u2 < alias_prob[i]:
        return i
    return alias_idx[i]


class OffspringLaw:
    """Common behaviour; concrete families fill in the exact formulas."""

    kind: str = "abstract"

    # concrete subclasses set these in __post_init__
    mean: float
    variance: float
    mu0: float
    #: polynomial tail index, or None for light/finite tails
    tail_exponent = None
    #: largest k with positive mass, or None when unbounded
    max_support = None

    # -- exact formulas supplied by each family ---------------------------
    def pmf_array(self, kmax: int) -> np.ndarray:
        """Exact pmf on 0..kmax-1."""
        raise NotImplementedError

    def tail(self, k) -> float:
        """P(X >= k), exact, scalar or elementwise on arrays."""
        raise NotImplementedError

    def first_moment_tail(self, k: int) -> float:
        """Sum over j >= k of j * pmf(j), exact."""
        raise NotImplementedError

    def even_mass(self) -> float:
        """Total mass on even values (0 included)."""
        raise NotImplementedError

    def positive_support(self):
        """Sorted positive values carrying mass; None when all of N does."""
        return None

    # -- shared derived quantities ----------------------------------------
    def _init_cache(self):
        object.__setattr__(self, "_cache", {})

    def pmf(self, k: int) -> float:
        if self.max_support is not None and k > self.max_support:
            return 0.0
        return float(self.pmf_array(k + 1)[k])

    @property
    def sigma2(self) -> float:
        return self.variance

    @property
    def is_critical(self) -> bool:
        return abs(self.mean - 1.0) <= _CRIT_TOL

    def _validate(self):
        if not (self.mu0 > 0.0):
            raise ValueError(f"{self.kind}: needs positive mass at 0, got mu(0)={self.mu0}")
        mu1 = self.pmf(1)
        if not (self.mu0 + mu1 < 1.0):
            raise ValueError(f"{self.kind}: mass must extend past {{0,1}}")

    def second_moment_partial(self, m: int) -> float:
        """E[X^2 ; X <= m], by direct summation of exact pmf values."""
        k = np.arange(m + 1, dtype=np.float64)
        return float(np.dot(k * k, self.pmf_array(m + 1)))

    def first_moment_partial(self, m: int) -> float:
        """E[X ; X <= m]."""
        k = np.arange(m + 1, dtype=np.float64)
        return float(np.dot(k, self.pmf_array(m + 1)))

    def tail_quantile(self, target: float) -> int:
        """Largest k with tail(k) >= target, for target in (0, 1]."""
        if target > 1.0 or target <= 0.0:
            raise ValueError(f"target must be in (0, 1], got {target}")
        k = max(self._tail_guess(target), 0)
        while k > 0 and self.tail(k) < target:
            k -= 1
        for _ in range(100000):
            if self.tail(k + 1) < target:
                return k
            k += 1
        raise RuntimeError("tail_quantile failed to bracket; law tails inconsistent")

    def _tail_guess(self, target: float) -> int:
        return 0

    def conditional_tail_draw(self, u: float, g: int) -> int:
        """Exact draw from P(X = . | X >= g) via inverse tail."""
        t = self.tail(g)
        if t <= 0.0:
            raise ValueError(f"no mass at or above {g}")
        return self.tail_quantile(u * t if u > 0.0 else t)

    # -- sampler tables ----------------------------------------------------
    def _default_kcap(self) -> int:
        if self.max_support is not None:
            return self.max_support + 1
        k = 64
        while k < _KCAP_MAX and self.tail(k) > _HEAD_TAIL_TARGET:
            k *= 2
        return k

    def tables(self, kcap: int | None = None) -> SamplerTables:
        key = ("tables", kcap)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        K = self._default_kcap() if kcap is None else int(kcap)
        pmf = self.pmf_array(K)
        tails = self.tail(np.arange(K + 2)).astype(np.float64)
        head_mass = 1.0 - float(tails[K])
        prob, alias = _build_alias(pmf)
        t = SamplerTables(K, pmf, tails, head_mass, prob, alias)
        self._cache[key] = t
        return t

    def draw_batch(self, stream, slot0: int, count: int) -> np.ndarray:
        """Vectorized draws consuming slots slot0 .. slot0 + 2*count - 1.

        Two slots per draw (selector, alias coin), matching the scalar
        kernel protocol slot for slot and bit for bit.
        """
        t = self.tables()
        u = stream.u01_block(slot0, 2 * count)
        u1, u2 = u[0::2], u[1::2]
        idx = (u1 / t.head_mass * t.K).astype(np.int64)
        np.minimum(idx, t.K - 1, out=idx)
        out = np.where(u2 < t.alias_prob[idx], idx, t.alias_idx[idx])
        for j in np.nonzero(u1 >= t.head_mass)[0]:
            out[j] = self.tail_quantile(1.0 - u1[j])
        return out

    # -- structural helpers -------------------------------------------------
    def feasible_size(self, n: int) -> bool:
        """Whether any plane tree with n vertices has positive probability."""
        if n < 1:
            return False
        if n == 1:
            return True
        support = self.positive_support()
        if support is None:
            return True
        key = ("feas", n)
        hit = self._cache.get(key)
        if hit is None:
            s = n - 1
            reach = np.zeros(s + 1, dtype=bool)
            reach[0] = True
            for v in support:
                for tot in range(v, s + 1):
                    if reach[tot - v]:
                        reach[tot] = True
            hit = bool(reach[s])
            self._cache[key] = hit
        return hit

    def size_biased(self) -> "SizeBiasedLaw":
        return SizeBiasedLaw(self)

    def json_spec(self) -> dict:
        return {
            "kind": self.kind,
            "params": self._params(),
            "derived": {
                "mean": self.mean,
                "variance": self.variance if math.isfinite(self.variance) else "inf",
                "mu0": self.mu0,
            },
        }

    def _params(self) -> dict:
        raise NotImplementedError

    def label(self) -> str:
        p = self._params()
        if not p:
            return self.kind
        inner = ",".join(f"{k}={v}" for k, v in sorted(p.items()))
        return f"{self.kind}({inner})"


@dataclass(frozen=True)
class FiniteTable(OffspringLaw):
    """Law given by an explicit probability table on 0..len(probs)-1."""

    probs: tuple

    kind = "FiniteTable"

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(x) for x in self.probs))
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.ndim != 1 or len(arr) < 2:
            raise ValueError("finite table needs at least mass on {0, ...}")
        if np.any(arr < 0.0):
            raise ValueError("negative probability in table")
        tot = float(arr.sum())
        if abs(tot - 1.0) > 1e-9:
            raise ValueError(f"table sums to {tot}, not 1")
        arr = arr / tot
        ks = np.arange(len(arr), dtype=np.float64)
        object.__setattr__(self, "_arr", arr)
        object.__setattr__(self, "mean", float(np.dot(ks, arr)))
        ex2 = float(np.dot(ks * ks, arr))
        object.__setattr__(self, "variance", ex2 - self.mean**2)
        object.__setattr__(self, "mu0", float(arr[0]))
        nz = np.nonzero(arr)[0]
        object.__setattr__(self, "max_support", int(nz[-1]))
        suffix = np.zeros(len(arr) + 1, dtype=np.float64)
        suffix[:-1] = np.cumsum(arr[::-1])[::-1]
        object.__setattr__(self, "_suffix", suffix)
        self._init_cache()
        self._validate()

    def pmf_array(self, kmax: int) -> np.ndarray:
        out = np.zeros(kmax, dtype=np.float64)
        m = min(kmax, len(self._arr))
        out[:m] = self._arr[:m]
        return out

    def tail(self, k):
        kk = np.minimum(np.maximum(np.asarray(k, dtype=np.int64), 0), len(self._arr))
        res = self._suffix[kk]
        return float(res) if np.isscalar(k) or np.asarray(k).ndim == 0 else res

    def first_moment_tail(self, k: int) -> float:
        if k <= 0:
            return self.mean
        if k > self.max_support:
            return 0.0
        js = np.arange(k, len(self._arr), dtype=np.float64)
        return float(np.dot(js, self._arr[k:]))

    def even_mass(self) -> float:
        return float(self._arr[0::2].sum())

    def positive_support(self):
        return [int(v) for v in np.nonzero(self._arr)[0] if v > 0]

    def _params(self) -> dict:
        return {"probs": list(self.probs)}


@dataclass(frozen=True)
class Geometric(OffspringLaw):
    """mu(k) = (1-p) p^k on k >= 0; critical at p = 1/2."""

    p: float

    kind = "Geometric"

    def __post_init__(self):
        p = float(self.p)
        if not (0.0 < p < 1.0):
            raise ValueError(f"p must be in (0,1), got {p}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "mean", p / (1.0 - p))
        object.__setattr__(self, "variance", p / (1.0 - p) ** 2)
        object.__setattr__(self, "mu0", 1.0 - p)
        self._init_cache()
        self._validate()

    def pmf_array(self, kmax: int) -> np.ndarray:
        return (1.0 - self.p) * self.p ** np.arange(kmax, dtype=np.float64)

    def tail(self, k):
        kk = np.maximum(np.asarray(k, dtype=np.float64), 0.0)
        res = self.p**kk
        return float(res) if np.asarray(k).ndim == 0 else res

    def first_moment_tail(self, k: int) -> float:
        if k <= 0:
            return self.mean
        p = self.p
        return p**k * (k * (1.0 - p) + p) / (1.0 - p)

    def even_mass(self) -> float:
        return 1.0 / (1.0 + self.p)

    def _tail_guess(self, target: float) -> int:
        return int(math.log(target) / math.log(self.p))

    def _params(self) -> dict:
        return {"p": self.p}


@dataclass(frozen=True)
class HeavyTail(OffspringLaw):
    """mu(k) = c k^(-beta-1) on k >= 1, with c set by the mean.

    Finite variance iff beta > 2; beta = 2 with mean 1 is the critical
    infinite-variance case.  Tails are Hurwitz-zeta partial sums, exact.
    """

    beta: float
    target_mean: float

    kind = "HeavyTail"

    def __post_init__(self):
        beta = float(self.beta)
        m = float(self.target_mean)
        if beta <= 1.0:
            raise ValueError("beta must exceed 1 for a finite mean")
        if m > 1.0:
            raise ValueError("supercritical polynomial-tail laws are out of scope")
        c = m / _zeta(beta, 1)
        mu0 = 1.0 - c * _zeta(beta + 1.0, 1)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "target_mean", m)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "mean", m)
        var = c * _zeta(beta - 1.0, 1) - m * m if beta > 2.0 else math.inf
        object.__setattr__(self, "variance", var)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "tail_exponent", beta)
        self._init_cache()
        self._validate()

    def pmf_array(self, kmax: int) -> np.ndarray:
        out = np.empty(kmax, dtype=np.float64)
        out[0] = self.mu0
        if kmax > 1:
            k = np.arange(1, kmax, dtype=np.float64)
            out[1:] = self.c * k ** (-self.beta - 1.0)
        return out

    def tail(self, k):
        karr = np.asarray(k, dtype=np.float64)
        res = np.where(karr <= 0.0, 1.0, self.c * _zeta(self.beta + 1.0, np.maximum(karr, 1.0)))
        return float(res) if karr.ndim == 0 else res

    def first_moment_tail(self, k: int) -> float:
        if k <= 0:
            return self.mean
        return self.c * _zeta(self.beta, max(k, 1))

    def even_mass(self) -> float:
        return self.mu0 + self.c * 2.0 ** (-self.beta - 1.0) * _zeta(self.beta + 1.0, 1)

    def _tail_guess(self, target: float) -> int:
        # tail(k) ~ (c/beta) k^-beta
        return max(1, int((self.c / (self.beta * target)) ** (1.0 / self.beta)))

    def _params(self) -> dict:
        return {"beta": self.beta, "mean": self.target_mean}


def critical_infinite_variance() -> HeavyTail:
    """mu(k) = (6/pi^2) k^-3 on k >= 1: critical, sigma^2 = inf."""
    law = HeavyTail(2.0, 1.0)
    object.__setattr__(law, "kind", "CriticalInfVar")
    return law


@dataclass(frozen=True)
class EvenOddSplit(OffspringLaw):
    """Polynomial mass on even values, exponential on odd ones.

    mu(2k) = t k^(-beta-1) for k >= 1, mu(2k+1) = t e^-k for k >= 0, with
    one scale t fixed by the target mean.  The heavy lattice and the light
    one disagree, which stresses parity-sensitive statistics.
    """

    beta: float
    target_mean: float

    kind = "PathologicalEvenOdd"

    def __post_init__(self):
        beta = float(self.beta)
        m = float(self.target_mean)
        if beta <= 1.0:
            raise ValueError("beta must exceed 1 for a finite mean")
        e1 = _E / (_E - 1.0)  # sum e^-k, k >= 0
        ke = _E / (_E - 1.0) ** 2  # sum k e^-k, k >= 0
        mean_per_t = 2.0 * _zeta(beta, 1) + 2.0 * ke + e1
        t = m / mean_per_t
        mu0 = 1.0 - t * (_zeta(beta + 1.0, 1) + e1)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "target_mean", m)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "mean", m)
        if beta > 2.0:
            # even part: sum (2k)^2 t k^(-beta-1) = 4 t zeta(beta-1)
            # odd part: sum (2k+1)^2 t e^-k = t (4 sum k^2 e^-k + 4 sum k e^-k + sum e^-k)
            k2e = _E * (_E + 1.0) / (_E - 1.0) ** 3
            ex2 = 4.0 * t * _zeta(beta - 1.0, 1) + t * (4.0 * k2e + 4.0 * ke + e1)
            var = ex2 - m * m
        else:
            var = math.inf
        object.__setattr__(self, "variance", var)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "tail_exponent", beta)
        self._init_cache()
        self._validate()

    def pmf_array(self, kmax: int) -> np.ndarray:
        out = np.zeros(kmax, dtype=np.float64)
        out[0] = self.mu0
        if kmax > 2:
            k = np.arange(1, (kmax - 1) // 2 + 1, dtype=np.float64)
            out[2::2] = self.t * k ** (-self.beta - 1.0)
        if kmax > 1:
            k = np.arange(0, (kmax - 2) // 2 + 1, dtype=np.float64)
            out[1::2] = self.t * np.exp(-k)
        return out

    def _tail_scalar(self, x: int) -> float:
        if x <= 0:
            return 1.0
        ke = max(1, (x + 1) // 2)  # smallest k with 2k >= x
        ko = max(0, (x - 1 + 1) // 2)  # smallest k with 2k+1 >= x
        even = self.t * _zeta(self.beta + 1.0, ke)
        odd = self.t * math.exp(-ko) * _E / (_E - 1.0)
        return even + odd

    def tail(self, k):
        karr = np.asarray(k)
        if karr.ndim == 0:
            return self._tail_scalar(int(karr))
        return np.array([self._tail_scalar(int(x)) for x in karr], dtype=np.float64)

    def first_moment_tail(self, k: int) -> float:
        if k <= 0:
            return self.mean
        ke = max(1, (k + 1) // 2)
        ko = max(0, k // 2)
        even = 2.0 * self.t * _zeta(self.beta, ke)
        x = 1.0 / _E
        # sum_{j>=a} j x^j = x^a (a - (a-1) x) / (1-x)^2
        tail_ke = x**ko * (ko - (ko - 1) * x) / (1.0 - x) ** 2
        tail_e = x**ko / (1.0 - x)
        odd = self.t * (2.0 * tail_ke + tail_e)
        return even + odd

    def even_mass(self) -> float:
        return self.mu0 + self.t * _zeta(self.beta + 1.0, 1)

    def _tail_guess(self, target: float) -> int:
        return max(1, 2 * int((self.t / (self.beta * target)) ** (1.0 / self.beta)))

    def _params(self) -> dict:
        return {"beta": self.beta, "mean": self.target_mean}


class SizeBiasedLaw:
    """The law j -> j * mu(j) / m on j >= 1, m the base mean.

    ``normalized_by`` records m; for non-critical bases the biased law is
    still well defined but no longer the local limit reweighting, so
    callers that require criticality check ``is_from_critical``.
    """

    def __init__(self, base: OffspringLaw):
        self.base = base
        self.normalized_by = base.mean
        self.is_from_critical = base.is_critical
        self.mean = None
        if math.isfinite(base.variance):
            # E[X*] = E[X^2] / m
            ex2 = base.variance + base.mean**2
            self.mean = ex2 / base.mean
        self._cache = {}

    def pmf_array(self, kmax: int) -> np.ndarray:
        k = np.arange(kmax, dtype=np.float64)
        return k * self.base.pmf_array(kmax) / self.normalized_by

    def tail(self, k):
        if np.asarray(k).ndim == 0:
            return self.base.first_moment_tail(int(k)) / self.normalized_by
        return np.array(
            [self.base.first_moment_tail(int(x)) for x in np.asarray(k)], dtype=np.float64
        ) / self.normalized_by

    def tail_quantile(self, target: float) -> int:
        k = max(self.base._tail_guess(target), 1)
        while k > 1 and self.tail(k) < target:
            k -= 1
        for _ in range(100000):
            if self.tail(k + 1) < target:
                return k
            k += 1
        raise RuntimeError("size-biased tail_quantile failed to bracket")

    def tables(self, kcap: int | None = None) -> SamplerTables:
        key = ("sb_tables", kcap)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if kcap is None:
            if self.base.max_support is not None:
                K = self.base.max_support + 1
            else:
                K = 64
                while K < _KCAP_MAX and self.tail(K) > _HEAD_TAIL_TARGET:
                    K *= 2
        else:
            K = int(kcap)
        pmf = self.pmf_array(K)
        tails = np.array([self.tail(i) for i in range(K + 2)], dtype=np.float64)
        head_mass = 1.0 - float(tails[K])
        prob, alias = _build_alias(pmf)
        t = SamplerTables(K, pmf, tails, head_mass, prob, alias)
        self._cache[key] = t
        return t

    def draw_batch(self, stream, slot0: int, count: int) -> np.ndarray:
        t = self.tables()
        u = stream.u01_block(slot0, 2 * count)
        u1, u2 = u[0::2], u[1::2]
        idx = (u1 / t.head_mass * t.K).astype(np.int64)
        np.minimum(idx, t.K - 1, out=idx)
        out = np.where(u2 < t.alias_prob[idx], idx, t.alias_idx[idx])
        for j in np.nonzero(u1 >= t.head_mass)[0]:
            out[j] = self.tail_quantile(1.0 - u1[j])
        return out


def binary() -> FiniteTable:
    """mu(0) = mu(2) = 1/2: critical, sigma^2 = 1, all trees full binary."""
    return FiniteTable((0.5, 0.0, 0.5))


def geometric_half() -> Geometric:
    """Geometric with p = 1/2: critical, sigma^2 = 2."""
    return Geometric(0.5)


_NAMED = {
    "binary": binary,
    "geometric": geometric_half,
    "heavytail": lambda: HeavyTail(2.5, 0.6),
    "critinfvar": critical_infinite_variance,
    "evenodd": lambda: EvenOddSplit(2.5, 0.6),
}


def law_from_name(name: str) -> OffspringLaw:
    """Look up a named default law (binary, geometric, heavytail, ...)."""
    try:
        return _NAMED[name]()
    except KeyError:
        raise ValueError(f"unknown law name {name!r}; known: {sorted(_NAMED)}") from None


def law_from_spec(spec: dict) -> OffspringLaw:
    """Build a law from a JSON-style {kind, params} mapping."""
    kind = spec["kind"]
    params = spec.get("params", {})
    if kind in ("FiniteTable", "finite"):
        return FiniteTable(tuple(params["probs"]))
    if kind in ("Geometric", "geometric"):
        return Geometric(params["p"])
    if kind in ("HeavyTail", "heavytail"):
        return HeavyTail(params["beta"], params["mean"])
    if kind in ("PathologicalEvenOdd", "evenodd"):
        return EvenOddSplit(params["beta"], params["mean"])
    if kind in ("CriticalInfVar", "critinfvar"):
        return critical_infinite_variance()
    raise ValueError(f"unknown law kind {kind!r}")
