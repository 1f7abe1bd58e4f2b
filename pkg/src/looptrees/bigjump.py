"""Stratified sampler for trees conditioned to be large, heavy-tail regime.

The naive rejection rate for {size >= n} decays polynomially, which is
hopeless at n ~ 10^4.  This module samples the conditioned walk by forcing
the one large increment that carries almost all of the conditional mass:

* split each path at the first increment >= t0;
* propose the (length, endpoint) of the small-increment prefix from a
  forward survival table f[r, v] (all increments < t0, walk kept in
  [0, vcap]);
* draw the forced increment exactly from the conditional tail, simulate the
  remaining free steps, and reject if the walk dies before step n - 1.

Writing out the proposal density shows the likelihood ratio against the
target is constant over everything the proposal can produce, so accepted
paths follow the conditioned law restricted to the proposal's support.
The three excluded strata (no increment >= t0 at all, first one after
r_pref steps, prefix exceeding vcap) are certified small by exact Chernoff
and Lundberg bounds computed from the truncated transform; the summed
defect divided by the lower bound P(X_1 >= n-1) <= P(size >= n) is the
reported total-variation bound, kept below ``delta``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .backend import kernel
from .errors import BudgetExhausted, CapTooSmall, TreeTooLarge
from .laws import OffspringLaw
from .rng import Stream, rng_u01
from .trees import PlaneTree
from .walks import WalkLaw

logger = logging.getLogger("looptrees.bigjump")

R_PREF_DEFAULT = 4096
_TABLE_CELL_CAP = 2**23
_T0_GRID = [8192, 6144, 4096, 3072, 2048, 1536, 1024, 768, 512, 384, 256,
            192, 128, 96, 64, 48, 32, 24, 16, 12, 8]


# ---------------------------------------------------------------------------
# transforms and certificates


def _mgf_truncated(head: np.ndarray, lam: float) -> float:
    """E[e^{lam X}; X < t0], exact finite sum; head[j] = P(X = j - 1)."""
    x = np.arange(head.shape[0], dtype=np.float64) - 1.0
    return float(np.sum(head * np.exp(lam * x)))


def _best_decay_rate(head: np.ndarray, t0: int):
    """(rate, lam) maximizing -log E[e^{lam X}; X < t0] over a lambda grid."""
    best = (0.0, 0.0)
    for a in np.linspace(0.25, 12.0, 96):
        lam = a / t0
        m = _mgf_truncated(head, lam)
        if m < 1.0 and -math.log(m) > best[0]:
            best = (-math.log(m), lam)
    return best


def _boundary_lambda(head: np.ndarray, q: float, lam_lo: float) -> float:
    """Largest lam with E[e^{lam X} | X < t0] <= 1, by bisection.

    e^{lam S} is then a supermartingale for the small-increment walk, giving
    the overshoot bound P(sup S >= u) <= e^{-lam u}.
    """
    lo = lam_lo
    hi = lam_lo if lam_lo > 0 else 1e-4
    while _mgf_truncated(head, hi) <= 1.0 - q and hi < 1e3:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _mgf_truncated(head, mid) <= 1.0 - q:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class BigJumpCertificate:
    """Exact bounds on the mass the stratified proposal cannot reach."""

    n: int
    t0: int
    q: float
    vcap: int
    r_pref: int
    decay_rate: float
    boundary_lambda: float
    p_lower: float
    defect_no_jump: float
    defect_late_jump: float
    defect_cap: float

    @property
    def tv_bound(self) -> float:
        total = self.defect_no_jump + self.defect_late_jump + self.defect_cap
        return total / self.p_lower

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "t0": self.t0,
            "q": self.q,
            "vcap": self.vcap,
            "r_pref": self.r_pref,
            "decay_rate": self.decay_rate,
            "boundary_lambda": self.boundary_lambda,
            "p_lower": self.p_lower,
            "defect_no_jump": self.defect_no_jump,
            "defect_late_jump": self.defect_late_jump,
            "defect_cap": self.defect_cap,
            "tv_bound": self.tv_bound,
        }


@dataclass
class BigJumpPlan:
    law: OffspringLaw
    walk: WalkLaw
    n: int
    cert: BigJumpCertificate
    head: np.ndarray
    f: np.ndarray
    flat_cumsum: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.flat_cumsum[-1])


def _forward_rows(head: np.ndarray, r_rows: int, vcap: int) -> np.ndarray:
    """f[r, v] = P(jumps < t0, walk stays in [0, vcap] for r steps, S_r = v).

    One FFT convolution with the truncated step kernel per row; mass that
    dies or leaves the cap is dropped, which is exactly what the
    certificate accounts for.
    """
    L = head.shape[0]
    nfft = 1
    while nfft < vcap + 1 + L:
        nfft *= 2
    head_hat = np.fft.rfft(head, nfft)
    f = np.zeros((r_rows + 1, vcap + 1))
    f[0, 0] = 1.0
    for r in range(r_rows):
        conv = np.fft.irfft(np.fft.rfft(f[r], nfft) * head_hat, nfft)
        # conv index c = v + j corresponds to new value c - 1
        row = conv[1 : vcap + 2]
        np.clip(row, 0.0, None, out=row)
        f[r + 1, : row.shape[0]] = row
    return f


_PLAN_CACHE: dict = {}


def plan_big_jump(
    law: OffspringLaw,
    n: int,
    delta: float = 1e-12,
    r_pref: int = R_PREF_DEFAULT,
) -> BigJumpPlan:
    """Search thresholds and build the proposal table with a certificate.

    Scans t0 from large to small and keeps the first threshold whose three
    defect bounds fit within delta * P(X_1 >= n - 1) / 3 each; larger t0
    means a fatter proposal tail and a better acceptance rate, so the first
    hit is the cheapest certified plan.
    """
    n = int(n)
    key = (law.label(), n, float(delta), int(r_pref))
    hit = _PLAN_CACHE.get(key)
    if hit is not None:
        return hit
    if n < 4:
        raise CapTooSmall("stratified sampling needs n >= 4; use the naive sampler")
    walk = WalkLaw.from_offspring(law)
    p_lower = float(walk.tail(n - 1))
    if p_lower <= 0.0:
        raise CapTooSmall(
            f"{law.label()} has no mass at {n - 1}; use the naive sampler"
        )
    budget = delta * p_lower / 3.0
    for t0 in _T0_GRID:
        if t0 > n - 1:
            continue
        q = float(walk.tail(t0))
        if q <= 0.0:
            continue
        head = law.pmf_array(t0 + 1)
        rate, _ = _best_decay_rate(head, t0)
        if rate <= 0.0:
            continue
        no_jump = math.exp(-rate * (n - 1))
        if no_jump > budget:
            continue
        r_rows = min(r_pref, n - 2)
        if r_rows == n - 2:
            late = 0.0
        else:
            m_hat = math.exp(-rate)
            late = q * m_hat ** (r_rows + 1) / (1.0 - m_hat)
            if late > budget:
                continue
        lam_b = _boundary_lambda(head, q, 0.0)
        if lam_b <= 0.0:
            continue
        vcap = int(math.ceil(math.log(1.0 / budget) / lam_b))
        if (r_rows + 1) * (vcap + 1) > _TABLE_CELL_CAP:
            continue
        cap_defect = math.exp(-lam_b * (vcap + 1))
        cert = BigJumpCertificate(
            n=n, t0=t0, q=q, vcap=vcap, r_pref=r_rows,
            decay_rate=rate, boundary_lambda=lam_b, p_lower=p_lower,
            defect_no_jump=no_jump, defect_late_jump=late, defect_cap=cap_defect,
        )
        f = _forward_rows(head, r_rows, vcap)
        plan = BigJumpPlan(
            law=law, walk=walk, n=n, cert=cert, head=head, f=f,
            flat_cumsum=np.cumsum(f.ravel()),
        )
        logger.info(
            "big-jump plan n=%d t0=%d vcap=%d rows=%d tv_bound=%.3g",
            n, t0, vcap, r_rows, cert.tv_bound,
        )
        _PLAN_CACHE[key] = plan
        return plan
    raise CapTooSmall(
        f"no certified threshold for {law.label()} at n={n}, delta={delta}; "
        "use the naive sampler"
    )


# ---------------------------------------------------------------------------
# backward prefix reconstruction


@kernel
def _prefix_fill(f, head, r, v, key, out):
    """Sample the small-increment prefix given its length r and endpoint v.

    Walks the survival table backward: step j takes value x with weight
    f[j-1, v_cur - x] * head[x + 1], one u01 slot per step.  Returns the
    start value, 0 on a consistent path.
    """
    vcap = f.shape[1] - 1
    vcur = v
    for j in range(r, 0, -1):
        u = rng_u01(key, np.uint64(j - 1))
        target = u * f[j, vcur]
        acc = 0.0
        chosen = np.int64(-2)
        fallback = np.int64(-2)
        for jj in range(head.shape[0]):
            x = np.int64(jj - 1)
            w = vcur - x
            if w < 0:
                break
            if w > vcap:
                continue
            wgt = f[j - 1, w] * head[jj]
            if wgt > 0.0:
                fallback = x
            acc += wgt
            if acc > target:
                chosen = x
                break
        if chosen == np.int64(-2):
            chosen = fallback
        if chosen == np.int64(-2):
            return np.int64(-(10**9))
        out[j - 1] = chosen
        vcur = vcur - chosen
    return vcur


def _sample_prefix(plan: BigJumpPlan, r: int, v: int, stream: Stream) -> np.ndarray:
    out = np.zeros(r, dtype=np.int64)
    if r == 0:
        if v != 0:
            raise RuntimeError("empty prefix must start at 0")
        return out
    start = int(_prefix_fill(plan.f, plan.head, np.int64(r), np.int64(v),
                             stream.key_u64, out))
    walkvals = np.cumsum(out)
    if start != 0 or walkvals[-1] != v or walkvals.min() < 0 or out.max() >= plan.cert.t0:
        raise RuntimeError("backward prefix reconstruction left the support")
    return out


# ---------------------------------------------------------------------------
# the sampler


def _run_until_death(walk: WalkLaw, v0: int, stream: Stream, max_steps: int):
    """Free increments until the walk first hits -1, chunk-doubled."""
    chunks = []
    vcur = v0
    pos = 0
    size = 256
    while pos < max_steps:
        c = min(size, max_steps - pos)
        xs = walk.draw_free(stream, 2 * pos, c)
        cs = vcur + np.cumsum(xs)
        hits = np.nonzero(cs == -1)[0]
        if hits.size:
            chunks.append(xs[: hits[0] + 1])
            return np.concatenate(chunks)
        chunks.append(xs)
        vcur = int(cs[-1])
        pos += c
        size *= 2
    return None


def stratified_at_least_n(
    law: OffspringLaw,
    n: int,
    src,
    max_attempts: int = 10**6,
    stats: dict | None = None,
    plan: BigJumpPlan | None = None,
    delta: float = 1e-12,
    max_vertices: int = 2**22,
) -> PlaneTree:
    """One tree from BGW(. | size >= n) via the certified big-jump proposal.

    Attempt a lives on the child stream tagged a: slot 0 picks (r, v) from
    the table, slot 1 the forced increment; nested child streams carry the
    free suffix, the backward prefix, and the continuation to death.  The
    output law is within the plan certificate's tv_bound of exact.
    """
    n = int(n)
    if plan is None:
        plan = plan_big_jump(law, n, delta=delta)
    stream = src if isinstance(src, Stream) else src.replicate(0)
    ncols = plan.cert.vcap + 1
    total = plan.total_mass
    for a in range(max_attempts):
        att = stream.child(a)
        pos = int(np.searchsorted(plan.flat_cumsum, att.u01(0) * total, side="right"))
        pos = min(pos, plan.flat_cumsum.shape[0] - 1)
        r, v = divmod(pos, ncols)
        x = int(plan.walk.conditional_jump(att.u01(1), plan.cert.t0))

        # free suffix: steps r+2 .. n-1 must keep the walk nonnegative
        m = n - 2 - r
        sfx = att.child(1)
        vcur = v + x
        suffix_parts = []
        died = False
        spos = 0
        chunk = 256
        while spos < m:
            c = min(chunk, m - spos)
            xs = plan.walk.draw_free(sfx, 2 * spos, c)
            cs = vcur + np.cumsum(xs)
            if cs.min() < 0:
                died = True
                break
            suffix_parts.append(xs)
            vcur = int(cs[-1])
            spos += c
            chunk *= 2
        if died:
            continue

        prefix = _sample_prefix(plan, r, v, att.child(2))
        tail_budget = max_vertices - (n - 1)
        if tail_budget <= 0:
            raise TreeTooLarge(f"max_vertices={max_vertices} below n={n}")
        cont = _run_until_death(plan.walk, vcur, att.child(3), tail_budget)
        if cont is None:
            raise TreeTooLarge(f"tree exceeded {max_vertices} vertices")
        pieces = [prefix, np.array([x], dtype=np.int64)] + suffix_parts + [cont]
        deg = np.concatenate(pieces) + 1
        if stats is not None:
            stats["attempts"] = a + 1
            stats["certificate"] = plan.cert.as_dict()
        logger.debug("big-jump n=%d accepted after %d attempts", n, a + 1)
        return PlaneTree(deg)
    raise BudgetExhausted(
        f"no surviving suffix in {max_attempts} stratified attempts"
    )
