"""Experiment configs, artifact writers, and the verification suites.

Every suite is a pure function of its ExperimentConfig.  Replicate work is
addressed by (seed, stream, replicate), so a checkpointed or resumed run
produces the same artifacts byte for byte as a fresh serial run.  Records
never carry timestamps for the same reason.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .laws import FiniteTable, OffspringLaw, law_from_name, law_from_spec
from .limits import (
    EmpiricalLaw,
    bias_identity_check,
    bn_value,
    c_bar_mu,
    c_mu,
    c_mu_oracle,
    kemperman_discrepancy,
    height_sample,
    llt_check,
    loop_vs_scaled_tree_distortion,
    pareto_cdf,
    profile_coupling_stat,
    spinal_ratio_stats,
    condensation_stats,
    trunk_tv_check,
)
from .looptree import build_loop, dist, profile_Hcirc
from .rng import RandomSource, Stream
from .sampling import sample_bgw_exact_n, sample_trunk_star, tree_size_probability
from .trees import to_dsv
from .walks import (
    BinScheme,
    R_DEFAULT,
    WalkLaw,
    check_Gn,
    first_passage_scaling,
    sample_conditioned_walk,
    sample_coupled_Z,
    survival_table,
    windowed_tv,
)

logger = logging.getLogger("looptrees.experiments")

DEFAULT_SEED = 20260816

# thresholds come from the verification plan; configs may override any of them
DEFAULT_THRESHOLDS = {
    "exact-identities": {
        "kemperman": 1e-12,
        "trunk-identity": 1e-10,
        "leaf-identity-violations": 0.0,
    },
    "structure": {"violations": 0.0},
    "constants": {"se-multiple": 3.0},
    "llt": {"llt-at-5000": 0.02},
    "condensation": {"ks-maxdeg": 0.05, "median-second": 0.05, "median-gh": 0.1},
    "crt": {"spinal-rel-err": 0.05, "coupling-q90": 0.15},
    "coupling": {"final-tv": 0.1, "gn-frequency": 0.9},
    "first-passage": {"ks": 0.05},
    "height": {"ks": 0.05, "trunk-step-slack": 0.004, "trunk-net-drop": 0.01},
    "determinism": {},
    "oracle": {
        "kemperman": 1e-12,
        "forest": 1e-12,
        "trunk-identity": 1e-10,
        "sizebias-mean": 1e-9,
        "leaf-identity-violations": 0.0,
    },
}

_HEAVY_SPEC = {"kind": "heavytail", "params": {"beta": 2.5, "mean": 0.6}}
_GEO_SPEC = {"kind": "geometric", "params": {"p": 0.5}}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a suite name plus everything that parameterizes it.

    ``out`` is deliberately left out of the hash so that redirecting the
    output directory (the one permitted environment override) does not
    change the experiment's identity.
    """

    experiment: str
    law: dict
    ns: tuple
    replicates: int
    seed: int = DEFAULT_SEED
    thresholds: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "ns", tuple(int(n) for n in self.ns))
        if self.replicates < 0:
            raise ValueError("replicates must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def law_object(self) -> OffspringLaw:
        return law_from_spec(self.law)

    def canonical(self) -> str:
        body = {
            "experiment": self.experiment,
            "law": self.law,
            "ns": list(self.ns),
            "replicates": self.replicates,
            "seed": self.seed,
            "thresholds": self.thresholds,
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def threshold(self, key: str) -> float:
        if key in self.thresholds:
            return float(self.thresholds[key])
        return float(DEFAULT_THRESHOLDS[self.experiment][key])

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        return ExperimentConfig(
            experiment=d["experiment"],
            law=d.get("law", _GEO_SPEC),
            ns=tuple(d.get("ns", ())),
            replicates=int(d.get("replicates", 0)),
            seed=int(d.get("seed", DEFAULT_SEED)),
            thresholds=dict(d.get("thresholds", {})),
            out=d.get("out"),
        )

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return ExperimentConfig.from_dict(json.load(f))


def default_config(suite: str, seed: int = DEFAULT_SEED) -> ExperimentConfig:
    """The pinned parameters each verification suite runs with."""
    table = {
        "exact-identities": (_GEO_SPEC, (10,), 100_000),
        "structure": (_GEO_SPEC, (1000,), 10_000),
        "constants": (_GEO_SPEC, (0,), 10_000_000),
        "llt": (_GEO_SPEC, (500, 2000, 5000, 8000), 0),
        "condensation": (_HEAVY_SPEC, (10_000,), 2000),
        "crt": (_GEO_SPEC, (1000, 10_000, 100_000), 200),
        "coupling": (_HEAVY_SPEC, (50, 200, 800), 100_000),
        "first-passage": (_HEAVY_SPEC, (2000,), 500),
        "height": (_GEO_SPEC, (1000, 10_000, 100_000), 2000),
        "determinism": (_GEO_SPEC, (9,), 1),
    }
    if suite not in table:
        raise ValueError(f"unknown suite {suite!r}; known: {sorted(table)}")
    law, ns, reps = table[suite]
    return ExperimentConfig(experiment=suite, law=law, ns=ns, replicates=reps, seed=seed)


# ---------------------------------------------------------------------------
# results and artifact writers


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class SuiteResult:
    suite: str
    config: ExperimentConfig
    checks: list
    records: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _native(v):
    """numpy scalars do not JSON-serialize; records store built-ins only."""
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _record(
    config: ExperimentConfig,
    statistic: str,
    value,
    law: str | None = None,
    n: int | None = None,
    threshold: float | None = None,
    passed: bool | None = None,
) -> dict:
    return {
        "experiment": config.experiment,
        "statistic": statistic,
        "law": law,
        "n": _native(n),
        "value": _native(value),
        "threshold": _native(threshold),
        "passed": _native(passed),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "version": __version__,
    }


_CSV_COLUMNS = (
    "experiment",
    "statistic",
    "law",
    "n",
    "value",
    "threshold",
    "passed",
    "config_hash",
    "seed",
    "version",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            f.write("\n")


def write_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(_CSV_COLUMNS)
        for rec in records:
            w.writerow([_cell(rec.get(c)) for c in _CSV_COLUMNS])


def write_replicate_csv(path, header, rows) -> None:
    """Plot-ready per-replicate values, one row per replicate."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


# ---------------------------------------------------------------------------
# per-replicate checkpoints


class Checkpoint:
    """Append-only store of per-replicate scalar tuples, keyed by config hash.

    The file self-describes with a header line; a file whose header does not
    match the requesting config is ignored rather than trusted.
    """

    def __init__(self, out_dir, suite: str, config_hash: str, tag: str = "reps"):
        d = Path(out_dir) / "checkpoints"
        d.mkdir(parents=True, exist_ok=True)
        self.path = d / f"{suite}-{tag}-{config_hash}.tsv"
        self.header = f"# {suite} {tag} {config_hash}"

    def load(self) -> dict:
        done = {}
        if not self.path.exists():
            return done
        with open(self.path, "r", encoding="utf-8") as f:
            first = f.readline().rstrip("\n")
            if first != self.header:
                logger.warning("checkpoint %s has a stale header; ignoring it", self.path)
                return {}
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                key, _, rest = line.partition("\t")
                done[int(key)] = tuple(json.loads(rest))
        return done

    def append(self, r: int, values) -> None:
        fresh = not self.path.exists()
        with open(self.path, "a", encoding="utf-8") as f:
            if fresh:
                f.write(self.header + "\n")
            f.write(f"{r}\t{json.dumps(list(values))}\n")
            f.flush()


def _gather_replicates(ck: Checkpoint, replicates: int, fn, threads: int) -> dict:
    """done[r] = fn(r) for r < replicates, reusing checkpointed values.

    fn must be a pure function of r.  With threads > 1 the work is chunked
    and results are appended in replicate order, so the checkpoint file is
    identical to the one a serial run writes.
    """
    done = {r: v for r, v in ck.load().items() if r < replicates}
    missing = [r for r in range(replicates) if r not in done]
    if not missing:
        return done
    if threads <= 1:
        for r in missing:
            vals = fn(r)
            ck.append(r, vals)
            done[r] = tuple(vals)
        return done
    chunk = max(8 * threads, 64)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        for at in range(0, len(missing), chunk):
            block = missing[at : at + chunk]
            results = list(ex.map(fn, block))
            for r, vals in zip(block, results):
                ck.append(r, vals)
                done[r] = tuple(vals)
    return done


class _ReplicateAt:
    """Source whose replicate(i) is base replicate r + i; lets batch helpers
    run one replicate at a time without changing any stream addressing."""

    def __init__(self, seed: int, stream: int, r: int):
        self.seed = seed
        self.stream = stream
        self.r = r

    def replicate(self, i: int = 0) -> Stream:
        return Stream.from_seed(self.seed, self.stream, self.r + i)


def _column(done: dict, idx: int) -> np.ndarray:
    return np.array([done[r][idx] for r in sorted(done)], dtype=np.float64)


# ---------------------------------------------------------------------------
# suites


def _suite_exact_identities(config: ExperimentConfig, threads: int) -> SuiteResult:
    truncgeo = FiniteTable((0.5, 0.25, 0.25))
    binl = law_from_name("binary")
    records = []
    checks = []

    worst = 0.0
    for law in (truncgeo, binl):
        v = max(kemperman_discrepancy(law, n) for n in range(1, 11))
        worst = max(worst, v)
        records.append(
            _record(config, "kemperman-discrepancy-max", v, law=law.label(), n=10)
        )
    thr = config.threshold("kemperman")
    checks.append(CheckResult("kemperman n<=10", worst, thr, worst <= thr))

    worst = 0.0
    for law in (truncgeo, binl):
        feasible = [n for n in range(2, 10) if tree_size_probability(law, n) > 0]
        v = max(bias_identity_check(law, n) for n in feasible)
        worst = max(worst, v)
        records.append(
            _record(config, "trunk-identity-max", v, law=law.label(), n=max(feasible))
        )
    thr = config.threshold("trunk-identity")
    checks.append(CheckResult("trunk identity n<=9", worst, thr, worst <= thr))

    geo = law_from_name("geometric")
    violations = 0
    for r in range(config.replicates):
        st = Stream.from_seed(config.seed, 1, r)
        h = 1 + r % 64
        sk = sample_trunk_star(geo, h, st)
        # count leaves of the reconstructed tree, not via the formula itself
        leaves = int(np.count_nonzero(sk.to_tree().degree_seq == 0))
        if leaves != sk.lukasiewicz_star() - h + 1:
            violations += 1
    records.append(
        _record(config, "leaf-identity-violations", violations, law=geo.label(), n=config.replicates)
    )
    thr = config.threshold("leaf-identity-violations")
    checks.append(
        CheckResult(f"leaf identity on {config.replicates} draws", violations, thr, violations <= thr)
    )
    return SuiteResult("exact-identities", config, checks, records)


def _structure_one_tree(law, n: int, rep: Stream) -> int:
    """Violation count of the contour map and both distance bounds on one tree."""
    t = sample_bgw_exact_n(law, n, rep.child(0))
    g = build_loop(t)
    prof = profile_Hcirc(g)
    W = t.lukasiewicz
    H = t.height
    cp = t.coding_paths
    bad = 0

    idx = np.arange(t.n, dtype=np.int64)
    b = 2 * idx - H
    bad += int(np.count_nonzero(cp.contour_vertex[b] != idx))
    bad += int(np.count_nonzero(cp.contour[b] != H))

    us = rep.child(1).u01_block(0, 12)
    for a in range(6):
        j = 1 + min(int(us[a] * (t.n - 1)), t.n - 2) if t.n > 1 else 0
        if j == 0:
            continue
        hops = 1 + min(int(us[6 + a] * H[j]), max(int(H[j]) - 1, 0))
        i = j
        for _ in range(hops):
            i = int(t.parent[i])
        lhs = int(prof[j] - prof[i])
        rhs = int((W[j] - W[i]) + (H[j] - H[i]))
        if not 0 <= lhs <= rhs:
            bad += 1

    vs = rep.child(2).u01_block(0, 12)
    deg = t.degree_seq
    for a in range(6):
        i = min(int(vs[a] * t.n), t.n - 1)
        j = min(int(vs[6 + a] * t.n), t.n - 1)
        m = t.mrca(i, j)
        d = dist(g, i, j)
        approx = int(prof[i] + prof[j] - 2 * prof[m])
        if abs(d - approx) > int(deg[m]):
            bad += 1
    return bad


def _suite_structure(config: ExperimentConfig, threads: int) -> SuiteResult:
    law = config.law_object()
    nmax = max(config.ns)

    def fn(r: int):
        n = 2 + (r * 9973) % (nmax - 1)
        rep = Stream.from_seed(config.seed, 0, r)
        return (_structure_one_tree(law, n, rep),)

    out_dir = config.out or "."
    ck = Checkpoint(out_dir, "structure", config.config_hash())
    done = _gather_replicates(ck, config.replicates, fn, threads)
    violations = int(_column(done, 0).sum())
    thr = config.threshold("violations")
    records = [
        _record(
            config,
            "structure-violations",
            violations,
            law=law.label(),
            n=nmax,
            threshold=thr,
            passed=violations <= thr,
        )
    ]
    checks = [
        CheckResult(
            f"contour map and distance bounds on {config.replicates} trees",
            violations,
            thr,
            violations <= thr,
        )
    ]
    return SuiteResult("structure", config, checks, records)


def _suite_constants(config: ExperimentConfig, threads: int) -> SuiteResult:
    binl = law_from_name("binary")
    geo = law_from_name("geometric")
    records = []
    checks = []
    for name, value, target in (
        ("c_mu-binary", c_mu(binl), 1.0),
        ("c_mu-geometric", c_mu(geo), 4.0 / 3.0),
        ("c_bar_mu-binary", c_bar_mu(binl), 0.5),
    ):
        err = abs(value - target)
        records.append(_record(config, name, value, threshold=0.0, passed=err == 0.0))
        checks.append(CheckResult(f"{name} exact", err, 0.0, err == 0.0))

    mult = config.threshold("se-multiple")
    for law, bar, target in ((binl, False, 1.0), (geo, False, 4.0 / 3.0), (binl, True, 0.5)):
        est, se = c_mu_oracle(law, config.replicates, RandomSource(config.seed, 3), bar=bar)
        err = abs(est - target)
        thr = mult * se + 1e-12
        tag = "c_bar_mu" if bar else "c_mu"
        records.append(
            _record(
                config,
                f"{tag}-oracle-{law.label()}",
                est,
                law=law.label(),
                n=config.replicates,
                threshold=thr,
                passed=err <= thr,
            )
        )
        checks.append(
            CheckResult(f"{tag} oracle {law.label()} at {config.replicates} draws", err, thr, err <= thr)
        )
    return SuiteResult("constants", config, checks, records)


def _suite_llt(config: ExperimentConfig, threads: int) -> SuiteResult:
    law = config.law_object()
    records = []
    vals = {}
    for n in config.ns:
        vals[n] = llt_check(law, n)
        records.append(_record(config, "llt-sup-error", vals[n], law=law.label(), n=n))
    thr = config.threshold("llt-at-5000")
    at5000 = vals.get(5000, llt_check(law, 5000))
    ladder = [n for n in config.ns if n != 5000]
    decreasing = all(vals[a] > vals[b] for a, b in zip(ladder, ladder[1:]))
    checks = [
        CheckResult("llt at n=5000", at5000, thr, at5000 <= thr),
        CheckResult(
            f"llt strictly decreasing over {ladder}", float(decreasing), 1.0, decreasing
        ),
    ]
    return SuiteResult("llt", config, checks, records)


def _suite_condensation(config: ExperimentConfig, threads: int) -> SuiteResult:
    law = config.law_object()
    n = max(config.ns)

    def fn(r: int):
        md, sec, ghb = condensation_stats(law, n, 1, _ReplicateAt(config.seed, 0, r))
        return (float(md.values[0]), float(sec.values[0]), float(ghb.values[0]))

    out_dir = config.out or "."
    ck = Checkpoint(out_dir, "condensation", config.config_hash())
    done = _gather_replicates(ck, config.replicates, fn, threads)
    maxdeg = EmpiricalLaw.from_sample(_column(done, 0))
    second = EmpiricalLaw.from_sample(_column(done, 1))
    ghb = EmpiricalLaw.from_sample(_column(done, 2))

    params = config.law.get("params", {})
    beta = float(params.get("beta", 2.5))
    gamma = 1.0 - float(params.get("mean", 0.6))
    ks = maxdeg.ks_against(lambda x: pareto_cdf(x, gamma, beta))
    med_second = second.median()
    med_gh = ghb.median()

    rows = [(r, done[r][0], done[r][1], done[r][2]) for r in sorted(done)]
    write_replicate_csv(
        Path(out_dir) / f"condensation-replicates-{config.config_hash()}.csv",
        ("replicate", "maxdeg_over_n", "second_over_n", "gh_bound"),
        rows,
    )

    checks = [
        CheckResult("KS maxdeg/n vs Pareto J", ks, config.threshold("ks-maxdeg"), ks <= config.threshold("ks-maxdeg")),
        CheckResult("median second/n", med_second, config.threshold("median-second"), med_second <= config.threshold("median-second")),
        CheckResult("median GH-to-circle bound", med_gh, config.threshold("median-gh"), med_gh <= config.threshold("median-gh")),
    ]
    records = [
        _record(config, "ks-maxdeg-vs-pareto", ks, law=law.label(), n=n, threshold=config.threshold("ks-maxdeg"), passed=checks[0].passed),
        _record(config, "median-second-over-n", med_second, law=law.label(), n=n, threshold=config.threshold("median-second"), passed=checks[1].passed),
        _record(config, "median-gh-bound", med_gh, law=law.label(), n=n, threshold=config.threshold("median-gh"), passed=checks[2].passed),
        _record(config, "median-maxdeg-over-n", maxdeg.median(), law=law.label(), n=n),
    ]
    return SuiteResult("condensation", config, checks, records)


def _crt_law_cases(config: ExperimentConfig):
    geo = law_from_name("geometric")
    binl = law_from_name("binary")
    # the two-atom law only produces odd sizes, so its rungs shift by one
    for law, parity in ((geo, 0), (binl, 1)):
        ns = tuple(n + parity for n in config.ns)
        yield law, ns


def _suite_crt(config: ExperimentConfig, threads: int) -> SuiteResult:
    out_dir = config.out or "."
    records = []
    checks = []
    for case, (law, ns) in enumerate(_crt_law_cases(config)):
        n = max(ns)
        target = c_mu(law)

        def spinal_fn(r: int, law=law, n=n, case=case):
            emp = spinal_ratio_stats(law, n, 1, _ReplicateAt(config.seed, 10 * case, r))
            if emp.size == 0:
                return (math.nan,)
            return (float(emp.values[0]),)

        ck = Checkpoint(out_dir, "crt", config.config_hash(), tag=f"spinal-{law.label()}")
        done = _gather_replicates(ck, config.replicates, spinal_fn, threads)
        ratios = _column(done, 0)
        kept = ratios[~np.isnan(ratios)]
        med = EmpiricalLaw.from_sample(kept).median()
        rel = abs(med - target) / target
        thr = config.threshold("spinal-rel-err")
        ok = rel <= thr
        records.append(
            _record(config, "spinal-ratio-median", med, law=law.label(), n=n, threshold=thr, passed=ok)
        )
        checks.append(CheckResult(f"spinal ratio median vs c_mu ({law.label()})", rel, thr, ok))

        def coupling_fn(r: int, law=law, n=n, case=case):
            return (
                float(
                    profile_coupling_stat(
                        law, n, Stream.from_seed(config.seed, 10 * case + 1, r)
                    )
                ),
            )

        ck = Checkpoint(out_dir, "crt", config.config_hash(), tag=f"coupling-{law.label()}")
        done = _gather_replicates(ck, config.replicates, coupling_fn, threads)
        q90 = EmpiricalLaw.from_sample(_column(done, 0)).quantile(0.9)
        thr = config.threshold("coupling-q90")
        ok = q90 <= thr
        records.append(
            _record(config, "profile-coupling-q90", q90, law=law.label(), n=n, threshold=thr, passed=ok)
        )
        checks.append(CheckResult(f"profile coupling 90th pct ({law.label()})", q90, thr, ok))

        rung_q90 = []
        for rung, rn in enumerate(ns):
            vals = []
            for tree_i in range(20):
                emp = loop_vs_scaled_tree_distortion(
                    law, rn, 200, Stream.from_seed(config.seed, 10 * case + 2, rung * 64 + tree_i)
                )
                vals.append(emp.values)
            q = float(np.quantile(np.concatenate(vals), 0.9))
            rung_q90.append(q)
            records.append(
                _record(config, "distortion-q90", q, law=law.label(), n=rn)
            )
        decreasing = all(a > b for a, b in zip(rung_q90, rung_q90[1:]))
        records.append(
            _record(
                config,
                "distortion-q90-decreasing",
                float(decreasing),
                law=law.label(),
                n=max(ns),
                threshold=1.0,
                passed=decreasing,
            )
        )
        checks.append(
            CheckResult(f"distortion q90 decreasing ({law.label()})", float(decreasing), 1.0, decreasing)
        )
    return SuiteResult("crt", config, checks, records)


def _window_rows(sampler, k: int):
    def rows(stream: Stream, count: int) -> np.ndarray:
        out = np.empty((count, k), dtype=np.int64)
        for i in range(count):
            path = sampler(stream.child(i))
            out[i] = path.increments[:k]
        return out

    return rows


# one cut at zero: each window coordinate contributes only its sign, so the
# occupied cell count stays ~2^k and the plug-in bias ~sqrt(2^k / (pi N))
# sits near 0.03 at N = 1e5 instead of swamping the TV signal
_COUPLING_BINS = BinScheme((0,))
_COUPLING_WINDOW = 10
_GN_REPLICATES = 5000


def _suite_coupling(config: ExperimentConfig, threads: int) -> SuiteResult:
    law = config.law_object()
    wl = WalkLaw.from_offspring(law)
    table_R = max(R_DEFAULT, max(config.ns) - 1)
    survival_table(wl, table_R)  # build once; cached for every sampler below
    records = []
    tvs = []
    for rung, n in enumerate(config.ns):
        w_rows = _window_rows(
            lambda st, n=n: sample_conditioned_walk(wl, n, n, st, table_R=table_R),
            _COUPLING_WINDOW,
        )
        z_rows = _window_rows(
            lambda st, n=n: sample_coupled_Z(wl, n, n, st, table_R=table_R),
            _COUPLING_WINDOW,
        )
        est = windowed_tv(
            w_rows,
            z_rows,
            _COUPLING_WINDOW,
            _COUPLING_BINS,
            config.replicates,
            RandomSource(config.seed, 20 + rung),
        )
        tvs.append(est.tv)
        records.append(
            _record(config, "windowed-tv", est.tv, law=law.label(), n=n)
        )
        records.append(
            _record(config, "windowed-tv-bias-note", est.bias_note, law=law.label(), n=n)
        )
    n_last = config.ns[-1]
    hits = 0
    for r in range(_GN_REPLICATES):
        path = sample_coupled_Z(wl, n_last, n_last, Stream.from_seed(config.seed, 29, r), table_R=table_R)
        hits += bool(check_Gn(path, n_last, wl.gamma))
    freq = hits / _GN_REPLICATES

    thr_tv = config.threshold("final-tv")
    thr_gn = config.threshold("gn-frequency")
    decreasing = all(a > b for a, b in zip(tvs, tvs[1:]))
    checks = [
        CheckResult("windowed TV decreasing over rungs", float(decreasing), 1.0, decreasing),
        CheckResult("windowed TV final rung", tvs[-1], thr_tv, tvs[-1] <= thr_tv),
        CheckResult("G_n frequency at final rung", freq, thr_gn, freq >= thr_gn),
    ]
    records.append(
        _record(config, "gn-frequency", freq, law=law.label(), n=n_last, threshold=thr_gn, passed=freq >= thr_gn)
    )
    return SuiteResult("coupling", config, checks, records)


def _suite_first_passage(config: ExperimentConfig, threads: int) -> SuiteResult:
    law = config.law_object()
    wl = WalkLaw.from_offspring(law)
    n = max(config.ns)
    table_R = max(R_DEFAULT, n - 1)
    survival_table(wl, table_R)

    def fn(r: int):
        _, _, z = first_passage_scaling(
            wl, n, Stream.from_seed(config.seed, 0, r), table_R=table_R
        )
        return (float(z),)

    out_dir = config.out or "."
    ck = Checkpoint(out_dir, "first-passage", config.config_hash())
    done = _gather_replicates(ck, config.replicates, fn, threads)
    zs = EmpiricalLaw.from_sample(_column(done, 0))
    beta = wl.beta
    ks = zs.ks_against(lambda x: pareto_cdf(x, 1.0, beta))
    thr = config.threshold("ks")
    write_replicate_csv(
        Path(out_dir) / f"first-passage-replicates-{config.config_hash()}.csv",
        ("replicate", "zeta_over_n"),
        [(r, done[r][0]) for r in sorted(done) if r < config.replicates],
    )
    records = [
        _record(config, "ks-zeta-vs-pareto", ks, law=law.label(), n=n, threshold=thr, passed=ks <= thr),
        _record(config, "zeta-over-n-median", zs.median(), law=law.label(), n=n),
    ]
    checks = [CheckResult("KS zeta/n vs Pareto(1, beta)", ks, thr, ks <= thr)]
    return SuiteResult("first-passage", config, checks, records)


_TRUNK_T = 2.0
_TRUNK_WINDOW = 5
_TRUNK_N = 20_000
_TRUNK_BINS = BinScheme((2,))


def _suite_height(config: ExperimentConfig, threads: int) -> SuiteResult:
    law = config.law_object()
    n = max(config.ns)

    def fn(r: int):
        emp = height_sample(law, n, 1, _ReplicateAt(config.seed, 0, r))
        return (float(emp.values[0]),)

    out_dir = config.out or "."
    ck = Checkpoint(out_dir, "height", config.config_hash())
    done = _gather_replicates(ck, config.replicates, fn, threads)
    xs = EmpiricalLaw.from_sample(_column(done, 0))
    ks = xs.ks_against(lambda x: 1.0 - np.exp(-np.asarray(x) ** 2))
    thr = config.threshold("ks")
    records = [
        _record(config, "ks-height-vs-rayleigh", ks, law=law.label(), n=n, threshold=thr, passed=ks <= thr)
    ]
    checks = [CheckResult("KS vertex height vs tail exp(-x^2)", ks, thr, ks <= thr)]

    rung_ck = Checkpoint(out_dir, "height", config.config_hash(), tag="trunk-rungs")
    rung_done = rung_ck.load()
    tvs = []
    for rung, rn in enumerate(config.ns):
        if rung in rung_done:
            tv = rung_done[rung][0]
        else:
            est = trunk_tv_check(
                law,
                rn,
                t=_TRUNK_T,
                window=_TRUNK_WINDOW,
                N=_TRUNK_N,
                src=RandomSource(config.seed, 40 + rung),
                bins=_TRUNK_BINS,
            )
            tv = est.tv
            rung_ck.append(rung, (tv, est.bias_note))
        tvs.append(float(tv))
        records.append(_record(config, "trunk-tv", float(tv), law=law.label(), n=rn))
    slack = config.threshold("trunk-step-slack")
    net = config.threshold("trunk-net-drop")
    steps_ok = all(b <= a + slack for a, b in zip(tvs, tvs[1:]))
    net_drop = tvs[0] - tvs[-1]
    ok = steps_ok and net_drop >= net
    records.append(
        _record(config, "trunk-tv-net-drop", net_drop, law=law.label(), n=max(config.ns), threshold=net, passed=ok)
    )
    checks.append(CheckResult("trunk TV decreasing over the ladder", net_drop, net, ok))
    return SuiteResult("height", config, checks, records)


# reduced parameters for the rerun sweep: every suite, same code paths,
# desk-scale sizes (statistical thresholds are not consulted there)
_REDUCED = {
    "exact-identities": ((10,), 2000),
    "structure": ((200,), 300),
    "constants": ((0,), 200_000),
    "llt": ((500, 1000), 0),
    "condensation": ((2100,), 10),
    "crt": ((500, 1000), 8),
    "coupling": ((30, 60), 2000),
    "first-passage": ((200,), 20),
    "height": ((500,), 12),
}


def _dir_digest(root: Path) -> tuple:
    """(relative path, sha256) for every file under root, sorted."""
    out = []
    for p in sorted(root.rglob("*")):
        if p.is_file():
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            out.append((str(p.relative_to(root)), digest))
    return tuple(out)


def _suite_determinism(config: ExperimentConfig, threads: int) -> SuiteResult:
    """Rerun every suite twice at reduced scale into sibling directories and
    demand byte-identical artifact trees (aggregates, replicate CSVs, and
    checkpoints alike); sub-suite pass/fail is irrelevant here.  Also draws
    one DSV tree twice."""
    out_dir = Path(config.out or ".")
    records = []
    checks = []
    for name, (ns, reps) in _REDUCED.items():
        sub = ExperimentConfig(
            experiment=name,
            law=default_config(name, config.seed).law,
            ns=ns,
            replicates=reps,
            seed=config.seed,
        )
        digests = []
        for branch in ("a", "b"):
            d = out_dir / f"determinism-{branch}" / name
            d.mkdir(parents=True, exist_ok=True)
            run_suite(sub, out=str(d), threads=threads)
            digests.append(_dir_digest(d))
        same = digests[0] == digests[1] and len(digests[0]) > 0
        records.append(
            _record(
                config,
                f"rerun-bytes-identical-{name}",
                float(same),
                n=max(ns),
                threshold=1.0,
                passed=same,
            )
        )
        checks.append(CheckResult(f"rerun byte-identical: {name}", float(same), 1.0, same))

    law = law_from_name("binary")
    dsvs = []
    for branch in ("a", "b"):
        tree = sample_bgw_exact_n(law, max(config.ns), RandomSource(config.seed, 7).replicate(0))
        dsv = to_dsv(tree)
        (out_dir / f"determinism-{branch}" / "tree.dsv").write_text(dsv, encoding="utf-8")
        dsvs.append(dsv)
    same = dsvs[0] == dsvs[1]
    records.append(
        _record(config, "rerun-bytes-identical-dsv", float(same), threshold=1.0, passed=same)
    )
    checks.append(CheckResult("rerun byte-identical: dsv tree", float(same), 1.0, same))
    return SuiteResult("determinism", config, checks, records)


_SUITES = {
    "exact-identities": _suite_exact_identities,
    "structure": _suite_structure,
    "constants": _suite_constants,
    "llt": _suite_llt,
    "condensation": _suite_condensation,
    "crt": _suite_crt,
    "coupling": _suite_coupling,
    "first-passage": _suite_first_passage,
    "height": _suite_height,
    "determinism": _suite_determinism,
}

SUITE_NAMES = tuple(_SUITES)


def run_suite(config: ExperimentConfig, out: str | None = None, threads: int = 1) -> SuiteResult:
    """Run one verification suite and write its JSONL/CSV artifacts."""
    if config.experiment not in _SUITES:
        raise ValueError(f"unknown suite {config.experiment!r}; known: {sorted(_SUITES)}")
    out_dir = out or config.out or os.environ.get("LOOPTREES_OUT") or "."
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(
        experiment=config.experiment,
        law=config.law,
        ns=config.ns,
        replicates=config.replicates,
        seed=config.seed,
        thresholds=config.thresholds,
        out=out_dir,
    )
    logger.info("running suite %s (hash %s)", cfg.experiment, cfg.config_hash())
    result = _SUITES[cfg.experiment](cfg, threads)
    write_jsonl(result.records, Path(out_dir) / f"{cfg.experiment}.jsonl")
    write_csv(result.records, Path(out_dir) / f"{cfg.experiment}.csv")
    return result
