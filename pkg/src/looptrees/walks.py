"""Negative-drift integer walks: first-passage tails, conditioning, coupling.

The walk starts at 0 with iid integer increments whose mean is -gamma < 0.
In tree mode the increment is X = xi - 1 for an offspring law xi, so the
walk is skip-free downward and zeta = inf{i >= 1 : W_i < 0} satisfies
E[zeta] = 1/gamma exactly (Wald, since W_zeta = -1 a.s.).

Survival probabilities A[r, v] = P(v + S_i >= 0 for i = 1..r) are built as
an exact dynamic program over a value cap R.  For skip-free walks every
state above the cap satisfies A = 1 exactly (a walk at height v >= r
cannot die in r unit-down steps), so the table carries no truncation error.
General lattice walks get a bracket pair (overflow surviving vs absorbed)
whose gap is reported; the surviving variant is the table.

Conditioned-walk sampling runs backward through the table: given m steps
remaining at height v, increment x is drawn with probability proportional
to P(X = x) A[m-1, v+x], which reproduces the rejection law exactly at a
per-step cost.  Jumps past the tabulated head are resolved by an exact
inverse-tail draw outside the kernel (rare; probability P(X > R) per step).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .backend import kernel
from .errors import BudgetExhausted, CapTooSmall, TailTableMissing
from .laws import OffspringLaw, _build_alias, alias_pick
from .rng import Stream, rng_u01

logger = logging.getLogger("looptrees.walks")

R_DEFAULT = 2048
_ESCAPE_TINY = 1e-300

# child-stream tags (fixed so reruns are byte identical)
TAG_I = 0
TAG_SEGMENT = 1
TAG_TAIL = 2
TAG_REJECT = 3


def jump_threshold(gamma: float, n: int) -> int:
    """Smallest integer >= gamma * n, robust to float dust in the product."""
    return max(int(math.ceil(gamma * n - 1e-9)), 1)


# -- walk laws ---------------------------------------------------------------


@dataclass(frozen=True)
class WalkLaw:
    """Integer increment law with negative drift.

    Tree mode wraps an offspring law (X = xi - 1, support bounded below by
    -1, exact closed-form tails).  Free mode is a finite table on
    lo..lo+len(head)-1 for general lattice demos.
    """

    kind: str
    gamma: float
    lo: int
    offspring: OffspringLaw | None = None
    table_probs: np.ndarray | None = None
    beta: float = math.inf

    @staticmethod
    def from_offspring(mu: OffspringLaw) -> "WalkLaw":
        if mu.mean >= 1.0:
            raise ValueError(f"need subcritical offspring for negative drift, mean={mu.mean}")
        if mu.mu0 <= 0.0:
            raise ValueError("offspring law needs mass at 0 so the walk can step down")
        beta = float(getattr(mu, "beta", math.inf))
        return WalkLaw("offspring", 1.0 - mu.mean, -1, offspring=mu, beta=beta)

    @staticmethod
    def from_table(lo: int, probs) -> "WalkLaw":
        p = np.ascontiguousarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.shape[0] == 0 or np.any(p < 0):
            raise ValueError("need a nonempty nonnegative probability row")
        p = p / p.sum()
        lo = int(lo)
        mean = float(np.sum(p * (lo + np.arange(p.shape[0]))))
        if mean >= 0.0:
            raise ValueError(f"need negative drift, E[X]={mean}")
        if lo >= 0:
            raise ValueError("support must reach below 0")
        p.setflags(write=False)
        return WalkLaw("table", -mean, lo, table_probs=p, beta=math.inf)

    @property
    def skip_free(self) -> bool:
        return self.lo == -1

    def head_pmf(self, R: int) -> np.ndarray:
        """P(X = lo + j) for j = 0..L-1 covering increments up to R."""
        if self.kind == "offspring":
            return self.offspring.pmf_array(R + 2)
        if self.lo + self.table_probs.shape[0] - 1 > R:
            raise CapTooSmall("table support exceeds the value cap")
        return self.table_probs

    def tail(self, x) -> float:
        """P(X >= x), exact."""
        if self.kind == "offspring":
            return self.offspring.tail(np.asarray(x) + 1)
        xs = np.asarray(x)
        idx = np.clip(xs - self.lo, 0, self.table_probs.shape[0])
        suffix = np.concatenate([np.cumsum(self.table_probs[::-1])[::-1], [0.0]])
        out = suffix[idx]
        return out if xs.ndim else float(out)

    def conditional_jump(self, u: float, t: int) -> int:
        """Exact draw of X given X >= t from one uniform."""
        if self.kind == "offspring":
            return self.offspring.conditional_tail_draw(u, t + 1) - 1
        mass = self.tail(t)
        if mass <= 0.0:
            raise ValueError(f"no increment mass at or above {t}")
        target = u * mass if u > 0.0 else mass
        acc = 0.0
        for x in range(self.lo + self.table_probs.shape[0] - 1, t - 1, -1):
            acc += float(self.table_probs[x - self.lo])
            if acc >= target:
                return x
        return t

    def draw_free(self, stream: Stream, slot0: int, count: int) -> np.ndarray:
        """count iid increments, two slots per draw."""
        if self.kind == "offspring":
            return self.offspring.draw_batch(stream, slot0, count) - 1
        t = self._table_alias()
        u = stream.u01_block(slot0, 2 * count)
        u1, u2 = u[0::2], u[1::2]
        K = self.table_probs.shape[0]
        idx = np.minimum((u1 * K).astype(np.int64), K - 1)
        out = np.where(u2 < t[0][idx], idx, t[1][idx])
        return out + self.lo

    def _table_alias(self):
        if not hasattr(self, "_alias"):
            object.__setattr__(self, "_alias", _build_alias(self.table_probs))
        return self._alias

    def cache_key(self) -> str:
        if self.kind == "offspring":
            return f"offspring:{self.offspring.label()}"
        return f"table:{self.lo}:{self.table_probs.tobytes().hex()}"

    def label(self) -> str:
        if self.kind == "offspring":
            return f"walk[{self.offspring.label()}]"
        return f"walk[table lo={self.lo} len={self.table_probs.shape[0]}]"


# -- survival table -----------------------------------------------------------


@dataclass
class SurvivalTable:
    """A[r, v] = P(stay >= 0 for r steps | start at height v), 0 <= r, v <= R.

    Entries with v >= r * |lo| are exactly 1 and materialized as such.  The
    stored variant treats states above the cap as surviving; for skip-free
    walks that is exact (truncation_bound == 0).
    """

    law: WalkLaw
    R: int
    A: np.ndarray
    truncation_bound: float

    @property
    def jmax(self) -> int:
        """Largest j with P(zeta >= j) available."""
        return self.R + 1

    def pzeta_ge(self, j) -> float:
        """P(zeta >= j) = A[j-1, 0]; exact for the skip-free table."""
        js = np.asarray(j)
        if np.any(js < 1) or np.any(js > self.R + 1):
            raise TailTableMissing(f"j out of table range 1..{self.R + 1}")
        out = self.A[js - 1, 0]
        return out if js.ndim else float(out)

    def expected_zeta_partial(self) -> float:
        """sum_{j=1}^{jmax} P(zeta >= j): lower bound for E[zeta]."""
        return float(np.sum(self.A[:, 0]))

    def expected_zeta_exact(self) -> float:
        """E[zeta] = 1/gamma by Wald; skip-free walks only."""
        if not self.law.skip_free:
            raise ValueError("exact Wald value needs a skip-free walk")
        return 1.0 / self.law.gamma

    def zeta_tail_defect(self) -> float:
        """Mass of P(zeta >= j) beyond the table, exact for skip-free laws."""
        if not self.law.skip_free:
            return math.nan
        return max(self.expected_zeta_exact() - self.expected_zeta_partial(), 0.0)

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("j,p_zeta_ge,ci_half_width\n")
            for j in range(1, self.R + 2):
                f.write(f"{j},{float(self.A[j - 1, 0])!r},0.0\n")


def read_zeta_csv(path):
    """(j, P(zeta >= j), half-width) columns of a persisted tail table."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return rows[:, 0].astype(np.int64), rows[:, 1], rows[:, 2]


def _dp_pass(head: np.ndarray, lo: int, R: int, lump: np.ndarray, exact_one: int) -> np.ndarray:
    """One survival DP, rows r = 0..R, via FFT row convolution.

    lump[v] is the mass assigned to transitions past the stored columns
    (P(X > R - v) for the surviving bracket, 0 for the absorbed one);
    entries v >= r * exact_one_stride are overwritten with their exact
    value 1 afterwards.
    """
    L = head.shape[0]
    width = R + 1
    nfft = 1
    while nfft < width + L - 1:
        nfft *= 2
    Hf = np.fft.rfft(head[::-1], nfft)
    A = np.ones((R + 1, R + 1), dtype=np.float64)
    off = L - 1 + lo
    for r in range(1, R + 1):
        conv = np.fft.irfft(np.fft.rfft(A[r - 1], nfft) * Hf, nfft)
        row = conv[off : off + width] + lump
        np.clip(row, 0.0, 1.0, out=row)
        lim = min(r * exact_one, R + 1)
        A[r, :lim] = row[:lim]
        A[r, lim:] = 1.0
    return A


_TABLE_CACHE: dict = {}


def survival_table(law: WalkLaw, R: int = R_DEFAULT) -> SurvivalTable:
    """Build (or reuse) the survival DP table with value cap R."""
    key = (law.cache_key(), R)
    hit = _TABLE_CACHE.get(key)
    if hit is not None:
        return hit
    head = law.head_pmf(R)
    # mass past the stored columns: P(X >= R - v + 1) for v = 0..R
    lump_hi = np.asarray(law.tail(R + 1 - np.arange(R + 1)), dtype=np.float64)
    stride = -law.lo
    if law.skip_free:
        A = _dp_pass(head, law.lo, R, lump_hi, 1)
        bound = 0.0
    else:
        # bracket the zeta tails: the true A[r, 0] lies between the
        # overflow-survives and overflow-absorbed passes (entries near the
        # cap itself are loose in the absorbed pass, but only the start
        # column feeds P(zeta >= j))
        A = _dp_pass(head, law.lo, R, lump_hi, stride)
        A_lo = _dp_pass(head, law.lo, R, np.zeros(R + 1), stride)
        bound = float(np.max(A[:, 0] - A_lo[:, 0]))
        if bound > 1e-9:
            raise CapTooSmall(
                f"zeta-tail bracket gap {bound:.3e} exceeds 1e-9; raise the cap R={R}"
            )
    table = SurvivalTable(law, R, A, bound)
    _TABLE_CACHE[key] = table
    return table


def zeta_tail_dp(law: WalkLaw, jmax: int) -> np.ndarray:
    """Exact P(zeta >= j) for j = 1..jmax."""
    table = survival_table(law, max(jmax - 1, 1))
    return table.A[: jmax, 0].copy() if jmax <= table.R + 1 else table.A[:, 0].copy()


# -- walk paths ---------------------------------------------------------------


@dataclass
class WalkPath:
    """Walk values W_0..W_T with the first-passage index if it occurred."""

    values: np.ndarray
    zeta: int | None
    jump_index: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def _first_negative(values: np.ndarray) -> int | None:
    hits = np.nonzero(values[1:] < 0)[0]
    return int(hits[0]) + 1 if hits.size else None


# -- conditioned segment sampling ---------------------------------------------


@kernel
def _segment_fill(A, head, lo, R, m, start, v0, key, out_x, state):
    """Backward-DP draws of increments start..m-1 given survival for m steps.

    One rng slot per step (slot = step index).  Returns 0 when the segment
    is complete; returns 1 when the wanted increment lies past the head, in
    which case state = (step, height, residual target) and the caller
    resolves the tail draw exactly before re-entering at step + 1.
    """
    L = head.shape[0]
    v = v0
    for i in range(start, m):
        u = rng_u01(key, np.uint64(i))
        rem = m - i
        a_here = A[rem, v] if v <= R else 1.0
        target = u * a_here
        acc = 0.0
        chosen = np.int64(-(2**62))
        for j in range(L):
            w = v + lo + j
            if w < 0:
                continue
            if w <= R:
                a = A[rem - 1, w]
            else:
                a = 1.0
            acc += head[j] * a
            if acc > target:
                chosen = lo + j
                break
        if chosen == -(2**62):
            state[0] = i
            state[1] = v
            state[2] = target - acc
            return 1
        out_x[i] = chosen
        v += chosen
    state[1] = v
    return 0


def sample_survival_segment(
    law: WalkLaw, table: SurvivalTable, m: int, stream: Stream, v0: int = 0
):
    """Increments X_1..X_m of the walk from v0 conditioned to stay >= 0.

    Exact: step i uses P(x) proportional to P(X=x) A[m-i-1, v+x].  The rare
    past-head escape reuses the leftover of the step's uniform, so the slot
    budget is exactly one per step either way.
    """
    if m > table.R:
        raise TailTableMissing(f"segment length {m} exceeds table depth R={table.R}")
    out = np.zeros(m, dtype=np.int64)
    if m == 0:
        return out, v0
    head = law.head_pmf(table.R)
    state = np.zeros(3, dtype=np.float64)
    start, v = 0, v0
    t_esc = law.lo + head.shape[0]  # increments >= t_esc lie past the head
    while True:
        status = _segment_fill(
            table.A,
            head,
            np.int64(law.lo),
            np.int64(table.R),
            np.int64(m),
            np.int64(start),
            np.int64(v),
            stream.key_u64,
            out,
            state,
        )
        if status == 0:
            return out, int(state[1])
        i, v_esc = int(state[0]), int(state[1])
        tail_mass = float(law.tail(t_esc))
        resid = max(float(state[2]), _ESCAPE_TINY)
        u2 = min(resid / tail_mass, 1.0) if tail_mass > 0.0 else 1.0
        x = law.conditional_jump(u2, t_esc)
        out[i] = x
        v = v_esc + x
        start = i + 1
        if start >= m:
            return out, v


# -- the conditioned walk W^(n) ------------------------------------------------


def sample_conditioned_walk(
    law: WalkLaw,
    n: int,
    horizon: int,
    src,
    method: str = "auto",
    max_attempts: int = 1_000_000,
    table_R: int = R_DEFAULT,
) -> WalkPath:
    """The walk given zeta >= n (first n values nonnegative), to `horizon`.

    method "dp" draws the conditioned prefix backward through the survival
    table and is exact; "rejection" resamples free paths until the prefix
    survives (also exact, with the acceptance rate logged); "auto" uses dp
    whenever the table covers n.
    """
    if n < 1 or horizon < n:
        raise ValueError("need 1 <= n <= horizon")
    stream = src if isinstance(src, Stream) else src.replicate(0)
    if method == "auto":
        method = "dp" if n - 1 <= table_R else "rejection"
    if method == "dp":
        table = survival_table(law, table_R)
        seg, v_end = sample_survival_segment(law, table, n - 1, stream.child(TAG_SEGMENT))
        free = law.draw_free(stream.child(TAG_TAIL), 0, horizon - (n - 1))
        inc = np.concatenate([seg, free])
        values = np.concatenate([[0], np.cumsum(inc)])
        return WalkPath(values, _first_negative(values), meta={"method": "dp"})
    if method != "rejection":
        raise ValueError(f"unknown method {method!r}")
    rej = stream.child(TAG_REJECT)
    for attempt in range(max_attempts):
        inc = law.draw_free(rej, attempt * 2 * horizon, horizon)
        values = np.concatenate([[0], np.cumsum(inc)])
        if n == 1 or np.min(values[1:n]) >= 0:
            rate = 1.0 / (attempt + 1)
            logger.info("conditioned walk accepted after %d attempts (rate %.3g)", attempt + 1, rate)
            return WalkPath(
                values,
                _first_negative(values),
                meta={"method": "rejection", "attempts": attempt + 1},
            )
    raise BudgetExhausted(
        f"no surviving prefix in {max_attempts} attempts "
        f"(P(zeta>=n) ~ E[zeta] P(X >= gamma n) is tiny at n={n})"
    )


# -- the coupled surrogate Z^(n) ------------------------------------------------


_I_ALIAS_CACHE: dict = {}


def _i_law_alias(law: WalkLaw, table: SurvivalTable):
    """Alias tables for P(I = j) = P(zeta >= j) / E[zeta], truncated at jmax."""
    key = (law.cache_key(), table.R)
    hit = _I_ALIAS_CACHE.get(key)
    if hit is None:
        weights = table.A[:, 0].copy()
        prob, alias = _build_alias(weights)
        defect = table.zeta_tail_defect() * law.gamma  # TV to the untruncated I law
        hit = (prob, alias, weights.shape[0], defect)
        _I_ALIAS_CACHE[key] = hit
    return hit


def sample_coupled_Z(
    law: WalkLaw, n: int, horizon: int, src, table_R: int = R_DEFAULT
) -> WalkPath:
    """The three-block surrogate: conditioned prefix, one big jump, free tail.

    I has law P(zeta >= j)/E[zeta] (truncated at the table depth; the
    truncation defect is recorded in meta); increments 1..I-1 are the walk
    conditioned to stay nonnegative for I-1 steps; increment I is X given
    X >= gamma n; the rest is the free walk.  Blocks use disjoint child
    streams, so they are independent by construction.
    """
    if n < 1 or horizon < 1:
        raise ValueError("need n >= 1 and horizon >= 1")
    if float(law.tail(jump_threshold(law.gamma, n))) <= 0.0:
        raise ValueError(
            f"law has no mass at or above the jump threshold {jump_threshold(law.gamma, n)}; "
            "the big-jump surrogate needs an unbounded (or large enough) upper tail"
        )
    stream = src if isinstance(src, Stream) else src.replicate(0)
    table = survival_table(law, table_R)
    prob, alias, jmax, defect = _i_law_alias(law, table)
    si = stream.child(TAG_I)
    u1, u2 = si.u01(0), si.u01(1)
    I = 1 + int(alias_pick(u1, u2, jmax, 1.0, prob, alias))
    m = min(I - 1, horizon)
    seg, v_end = sample_survival_segment(law, table, m, stream.child(TAG_SEGMENT))
    inc = np.zeros(horizon, dtype=np.int64)
    inc[:m] = seg
    st = stream.child(TAG_TAIL)
    jump_index = None
    if I <= horizon:
        t = jump_threshold(law.gamma, n)
        inc[I - 1] = law.conditional_jump(st.u01(0), t)
        jump_index = I
        free = law.draw_free(st, 2, horizon - I)
        inc[I:] = free
    values = np.concatenate([[0], np.cumsum(inc)])
    return WalkPath(
        values,
        _first_negative(values),
        jump_index=jump_index,
        meta={"I": I, "i_truncation_tv": defect},
    )


def check_Gn(path: WalkPath, n: int, gamma: float) -> bool:
    """True iff exactly one of the first n increments is >= gamma * n."""
    if path.values.shape[0] < n + 1:
        raise ValueError(f"path too short for a window of {n} increments")
    t = jump_threshold(gamma, n)
    inc = np.diff(path.values[: n + 1])
    return int(np.count_nonzero(inc >= t)) == 1


# -- windowed total variation ---------------------------------------------------


@dataclass(frozen=True)
class BinScheme:
    """Monotone integer cuts defining len(cuts)+1 states per coordinate.

    digit(x) = number of cuts <= x, so cuts (c1, .., cs) give the cells
    (-inf, c1), [c1, c2), .., [cs, inf).
    """

    cuts: tuple

    def __post_init__(self):
        c = tuple(int(x) for x in self.cuts)
        if any(b <= a for a, b in zip(c, c[1:])):
            raise ValueError("cuts must be strictly increasing")
        if not c:
            raise ValueError("need at least one cut")
        object.__setattr__(self, "cuts", c)

    @property
    def states(self) -> int:
        return len(self.cuts) + 1

    def digits(self, x: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.asarray(self.cuts), x, side="right")

    def cells(self, windows: np.ndarray) -> np.ndarray:
        """Mixed-radix cell index of each row of an (N, k) window array."""
        d = self.digits(windows)
        k = windows.shape[1]
        out = np.zeros(windows.shape[0], dtype=np.int64)
        for j in range(k):
            out *= self.states
            out += d[:, j]
        return out


@dataclass(frozen=True)
class TVEstimate:
    tv: float
    bias_note: float
    cells: int
    occupied: int

    def __float__(self):
        return self.tv


def windowed_tv(sampler_a, sampler_b, k: int, bins: BinScheme, N: int, src) -> TVEstimate:
    """Plug-in TV between binned first-k increment windows of two samplers.

    Each sampler is called as sampler(stream, N) and must return an (N, k)
    integer array of increments.  The two streams are distinct replicates
    of src, so passing the same sampler twice measures pure sampling noise.
    The plug-in estimate is biased upward by about sqrt(occupied)/sqrt(pi N)
    (reported, not subtracted).
    """
    if k > 20:
        raise ValueError("window too wide to bin reliably")
    cells = bins.states**k
    if cells > 1 << 26:
        raise ValueError("bin scheme too fine for the window")
    wa = np.asarray(sampler_a(src.replicate(1), N))
    wb = np.asarray(sampler_b(src.replicate(2), N))
    if wa.shape != (N, k) or wb.shape != (N, k):
        raise ValueError("samplers must return (N, k) windows")
    ca = np.bincount(bins.cells(wa), minlength=cells)
    cb = np.bincount(bins.cells(wb), minlength=cells)
    tv = 0.5 * float(np.sum(np.abs(ca - cb))) / N
    occupied = int(np.count_nonzero(ca + cb))
    bias = math.sqrt(occupied) / math.sqrt(math.pi * N)
    return TVEstimate(tv, bias, cells, occupied)


# -- rescaled first passage -------------------------------------------------------


def first_passage_scaling(
    law: WalkLaw,
    n: int,
    src,
    tgrid: np.ndarray | None = None,
    step_cap: int = 10_000_000,
    table_R: int = R_DEFAULT,
):
    """Rescaled conditioned-walk profile and its first passage over n.

    Returns (tgrid, profile, zeta_over_n) where profile[j] = W(floor(t_j n))/n
    for the walk conditioned on zeta >= n, frozen at the death value once
    the walk has died, and zeta_over_n = zeta^(n)/n.
    """
    if tgrid is None:
        tgrid = np.linspace(0.0, 2.0, 201)
    stream = src if isinstance(src, Stream) else src.replicate(0)
    table = survival_table(law, table_R)
    seg, v = sample_survival_segment(law, table, n - 1, stream.child(TAG_SEGMENT))
    pieces = [np.concatenate([[0], np.cumsum(seg)])]
    total = n - 1
    zeta = None
    st = stream.child(TAG_TAIL)
    slot = 0
    while zeta is None:
        chunk = max(n, 1024)
        if total + chunk > step_cap:
            raise BudgetExhausted(f"no first passage within {step_cap} steps")
        inc = law.draw_free(st, slot, chunk)
        slot += 2 * chunk
        vals = v + np.cumsum(inc)
        hit = np.nonzero(vals < 0)[0]
        if hit.size:
            cut = int(hit[0]) + 1
            pieces.append(vals[:cut])
            zeta = total + cut
        else:
            pieces.append(vals)
            v = int(vals[-1])
        total += chunk
    values = np.concatenate(pieces)
    idx = np.minimum((np.asarray(tgrid) * n).astype(np.int64), zeta)
    profile = values[idx] / float(n)
    return np.asarray(tgrid), profile, zeta / float(n)


def eq31_ratio(law: WalkLaw, n: int, table: SurvivalTable | None = None) -> float:
    """P(zeta >= n) / (E[zeta] P(X >= gamma n)), which tends to 1."""
    if table is None:
        table = survival_table(law, max(R_DEFAULT, n - 1))
    num = table.pzeta_ge(n)
    den = table.expected_zeta_exact() * float(law.tail(jump_threshold(law.gamma, n)))
    return float(num / den)
