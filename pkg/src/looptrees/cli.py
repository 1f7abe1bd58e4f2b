"""Command line front end.

Subcommands expose the samplers (sample-tree, loop, trunk, walk, couple),
the verification suites (verify), and the exact enumeration identities
(oracle).  Every run is driven by an ExperimentConfig, either from a JSON
file via --config or assembled from flags; each numeric output record
carries the config hash, the seed, and the package version.  Reruns with
the same config write byte-identical artifacts.

Stream layout: subcommand s uses Stream.from_seed(seed, TAG_s, replicate)
so adding replicates never shifts existing draws.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import LooptreesError
from .laws import law_from_spec
from .limits import bias_identity_check, forest_discrepancy, kemperman_discrepancy
from .looptree import build_loop, build_loopbar, profile_Hcirc, write_edges_csv
from .rng import RandomSource, Stream
from .sampling import (
    sample_bgw,
    sample_bgw_at_least_n,
    sample_bgw_exact_n,
    sample_trunk_star,
    tree_size_probability,
)
from .trees import write_dsv
from .walks import (
    R_DEFAULT,
    BinScheme,
    WalkLaw,
    sample_conditioned_walk,
    sample_coupled_Z,
    windowed_tv,
)

_NAMED_SPECS = {
    "binary": {"kind": "finite", "params": {"probs": [0.5, 0.0, 0.5]}},
    "geometric": {"kind": "geometric", "params": {"p": 0.5}},
    "heavytail": {"kind": "heavytail", "params": {"beta": 2.5, "mean": 0.6}},
    "critinfvar": {"kind": "critinfvar", "params": {}},
    "evenodd": {"kind": "evenodd", "params": {"beta": 2.5, "mean": 0.6}},
}

# stream tags per subcommand, see module docstring
_TREE_STREAM = 0
_LOOP_STREAM = 1
_TRUNK_STREAM = 2
_WALK_STREAM = 3
_COUPLE_STREAM = 4
_ORACLE_STREAM = 5


def _law_spec(text: str) -> dict:
    """A law flag is either a built-in name or an inline {kind, params} JSON."""
    if text in _NAMED_SPECS:
        return _NAMED_SPECS[text]
    if text.lstrip().startswith("{"):
        spec = json.loads(text)
        law_from_spec(spec)  # validate eagerly so errors name the flag
        return spec
    raise argparse.ArgumentTypeError(
        f"unknown law {text!r}; use one of {sorted(_NAMED_SPECS)} or a JSON spec"
    )


def _cuts(text: str) -> tuple:
    return tuple(int(s) for s in text.split(",") if s != "")


def _pick(flag, cfg_value, fallback):
    if flag is not None:
        return flag
    if cfg_value is not None:
        return cfg_value
    return fallback


def _base_config(args, experiment: str, law, ns, replicates, thresholds=None):
    """Effective config for an ad-hoc subcommand: flags over file over defaults."""
    cfg = ex.ExperimentConfig.from_file(args.config) if args.config else None
    law = _pick(args.law, cfg.law if cfg else None, law)
    seed = _pick(args.seed, cfg.seed if cfg else None, ex.DEFAULT_SEED)
    out = _pick(args.out, cfg.out if cfg else None, None)
    if cfg is not None:
        if cfg.ns:
            ns = cfg.ns
        if cfg.replicates:
            replicates = cfg.replicates
        thresholds = dict(cfg.thresholds) if cfg.thresholds else thresholds
    return ex.ExperimentConfig(
        experiment=experiment,
        law=law,
        ns=tuple(ns),
        replicates=int(replicates),
        seed=int(seed),
        thresholds=thresholds or {},
        out=out,
    )


def _out_dir(config: ex.ExperimentConfig, args) -> Path:
    out = args.out or config.out or os.environ.get("LOOPTREES_OUT") or "."
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit(config: ex.ExperimentConfig, records, out: Path) -> None:
    ex.write_jsonl(records, out / f"{config.experiment}.jsonl")
    ex.write_csv(records, out / f"{config.experiment}.csv")


# ---------------------------------------------------------------------------
# sampling subcommands


def _cmd_sample_tree(args) -> int:
    config = _base_config(
        args, "sample-tree", _NAMED_SPECS["geometric"], (args.n,), args.count
    )
    out = _out_dir(config, args)
    law = config.law_object()
    n = config.ns[0]
    h = config.config_hash()
    records = []
    for r in range(config.replicates):
        st = Stream.from_seed(config.seed, _TREE_STREAM, r)
        if args.exact_size:
            t = sample_bgw_exact_n(law, n, st)
        elif args.at_least:
            t = sample_bgw_at_least_n(law, n, st)
        else:
            t = sample_bgw(law, st)
        path = out / f"tree-{h}-r{r}.dsv"
        write_dsv(t, path)
        records.append(
            ex._record(config, "tree-vertices", t.n, law=law.label(), n=n)
        )
        print(f"{path} vertices={t.n} height={int(t.height.max())}")
    _emit(config, records, out)
    return 0


def _cmd_loop(args) -> int:
    config = _base_config(args, "loop", _NAMED_SPECS["geometric"], (args.n,), 1)
    out = _out_dir(config, args)
    law = config.law_object()
    n = config.ns[0]
    h = config.config_hash()
    st = Stream.from_seed(config.seed, _LOOP_STREAM, 0)
    t = sample_bgw_exact_n(law, n, st)
    g = build_loopbar(t) if args.loopbar else build_loop(t)
    prof = profile_Hcirc(g)
    edges_path = out / f"loop-{h}-edges.csv"
    write_edges_csv(g, edges_path)
    profile_path = out / f"loop-{h}-profile.csv"
    ex.write_replicate_csv(
        profile_path,
        ("vertex", "loop_distance"),
        [(i, int(prof[i])) for i in range(g.n)],
    )
    records = [
        ex._record(config, "loop-vertices", g.n, law=law.label(), n=n),
        ex._record(config, "loop-edges-simple", g.edge_count_simple, law=law.label(), n=n),
        ex._record(config, "loop-eccentricity-root", int(prof.max()), law=law.label(), n=n),
    ]
    _emit(config, records, out)
    print(f"{edges_path} vertices={g.n} edges={g.edge_count_simple} ecc={int(prof.max())}")
    return 0


def _cmd_trunk(args) -> int:
    config = _base_config(
        args, "trunk", _NAMED_SPECS["geometric"], (args.height,), args.count
    )
    out = _out_dir(config, args)
    law = config.law_object()
    height = config.ns[0]
    rows = []
    records = []
    for r in range(config.replicates):
        st = Stream.from_seed(config.seed, _TRUNK_STREAM, r)
        sk = sample_trunk_star(law, height, st)
        for lev in range(sk.h):
            rows.append((r, lev, int(sk.child_counts[lev]), int(sk.spine_pos[lev])))
        records.append(
            ex._record(config, "trunk-leaves", sk.leaf_count, law=law.label(), n=height)
        )
    path = out / f"trunk-{config.config_hash()}.csv"
    ex.write_replicate_csv(path, ("replicate", "level", "child_count", "spine_pos"), rows)
    _emit(config, records, out)
    print(f"{path} replicates={config.replicates} height={height}")
    return 0


def _walk_table_R(n: int) -> int:
    # dp sampling needs the survival table to reach n - 1; cap the table so
    # very long horizons fall back to rejection instead of a huge table
    return max(R_DEFAULT, min(n - 1, 1 << 16))


def _cmd_walk(args) -> int:
    config = _base_config(args, "walk", _NAMED_SPECS["heavytail"], (args.n,), 1)
    out = _out_dir(config, args)
    law = WalkLaw.from_offspring(config.law_object())
    n = config.ns[0]
    horizon = args.horizon if args.horizon is not None else n
    st = Stream.from_seed(config.seed, _WALK_STREAM, 0)
    path = sample_conditioned_walk(
        law, n, horizon, st, method=args.method, table_R=_walk_table_R(n)
    )
    csv_path = out / f"walk-{config.config_hash()}.csv"
    ex.write_replicate_csv(
        csv_path,
        ("step", "value"),
        [(i, int(v)) for i, v in enumerate(path.values)],
    )
    label = config.law_object().label()
    records = [
        ex._record(config, "walk-final-value", int(path.values[-1]), law=label, n=n),
        ex._record(
            config,
            "walk-zeta",
            None if path.zeta is None else int(path.zeta),
            law=label,
            n=n,
        ),
    ]
    _emit(config, records, out)
    print(f"{csv_path} steps={len(path.values) - 1} zeta={path.zeta}")
    return 0


def _cmd_couple(args) -> int:
    config = _base_config(
        args, "couple", _NAMED_SPECS["heavytail"], (args.n,), args.replicates
    )
    out = _out_dir(config, args)
    law = WalkLaw.from_offspring(config.law_object())
    n = config.ns[0]
    horizon = args.horizon if args.horizon is not None else n
    k = args.window
    table_R = _walk_table_R(max(n, horizon))

    def w_rows(stream, count):
        rows = np.empty((count, k), dtype=np.int64)
        for i in range(count):
            p = sample_conditioned_walk(law, n, horizon, stream.child(i), table_R=table_R)
            rows[i] = p.increments[:k]
        return rows

    def z_rows(stream, count):
        rows = np.empty((count, k), dtype=np.int64)
        for i in range(count):
            p = sample_coupled_Z(law, n, horizon, stream.child(i), table_R=table_R)
            rows[i] = p.increments[:k]
        return rows

    est = windowed_tv(
        w_rows,
        z_rows,
        k,
        BinScheme(args.bins),
        config.replicates,
        RandomSource(config.seed, _COUPLE_STREAM),
    )
    label = config.law_object().label()
    records = [
        ex._record(config, "windowed-tv", est.tv, law=label, n=n),
        ex._record(config, "windowed-tv-bias-note", est.bias_note, law=label, n=n),
        ex._record(config, "windowed-tv-occupied", est.occupied, law=label, n=n),
    ]
    _emit(config, records, out)
    print(
        f"tv={est.tv:.6f} bias_note={est.bias_note:.6f} "
        f"occupied={est.occupied} cells={est.cells}"
    )
    return 0


# ---------------------------------------------------------------------------
# verify and oracle


def _print_checks(suite: str, checks) -> None:
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {suite}: {c.name} (value {c.value:.6g}, threshold {c.threshold:.6g})")


def _cmd_verify(args) -> int:
    if args.config:
        config = ex.ExperimentConfig.from_file(args.config)
        if args.suite and args.suite != config.experiment:
            print(f"error: --suite {args.suite} conflicts with config experiment "
                  f"{config.experiment}", file=sys.stderr)
            return 2
        if args.seed is not None:
            config = ex.ExperimentConfig.from_dict(
                {**json.loads(config.canonical()), "seed": args.seed, "out": config.out}
            )
        suites = [config]
    elif args.suite == "all":
        seed = args.seed if args.seed is not None else ex.DEFAULT_SEED
        suites = [ex.default_config(name, seed) for name in ex.SUITE_NAMES]
    elif args.suite:
        seed = args.seed if args.seed is not None else ex.DEFAULT_SEED
        suites = [ex.default_config(args.suite, seed)]
    else:
        print("error: verify needs --suite NAME or --config PATH", file=sys.stderr)
        return 2
    ok = True
    for config in suites:
        result = ex.run_suite(config, out=args.out, threads=args.threads)
        _print_checks(result.suite, result.checks)
        ok = ok and result.all_passed
    return 0 if ok else 1


def _sizebias_mean_gap(law) -> float | None:
    """|E[X*] - (1 + sigma^2)| by numeric summation; None when undefined."""
    if not law.is_critical or not np.isfinite(law.sigma2):
        return None
    kmax = 1 << 10
    while True:
        p = law.pmf_array(kmax)
        if 1.0 - p.sum() < 1e-13 or kmax >= (1 << 22):
            break
        kmax *= 4
    j = np.arange(p.size, dtype=np.float64)
    mean_star = float(np.sum(j * j * p))  # E[X^2] = E[X*] at mean 1
    return abs(mean_star - (1.0 + law.sigma2))


def _cmd_oracle(args) -> int:
    config = _base_config(
        args, "oracle", _NAMED_SPECS["geometric"], (args.n,), args.draws
    )
    out = _out_dir(config, args)
    law = config.law_object()
    label = law.label()
    n = config.ns[0]
    records = []
    checks = []

    v = max(kemperman_discrepancy(law, m) for m in range(1, n + 1))
    thr = config.threshold("kemperman")
    records.append(ex._record(config, "kemperman-discrepancy-max", v, law=label, n=n,
                              threshold=thr, passed=v <= thr))
    checks.append(ex.CheckResult(f"kemperman n<={n}", v, thr, v <= thr))

    v = max(forest_discrepancy(law, m, k) for m in range(1, n + 1) for k in (2, 3))
    thr = config.threshold("forest")
    records.append(ex._record(config, "forest-discrepancy-max", v, law=label, n=n,
                              threshold=thr, passed=v <= thr))
    checks.append(ex.CheckResult(f"forest n<={n} k<=3", v, thr, v <= thr))

    feasible = [m for m in range(2, min(n, 9) + 1) if tree_size_probability(law, m) > 0]
    if feasible:
        v = max(bias_identity_check(law, m) for m in feasible)
        thr = config.threshold("trunk-identity")
        records.append(ex._record(config, "trunk-identity-max", v, law=label,
                                  n=max(feasible), threshold=thr, passed=v <= thr))
        checks.append(ex.CheckResult(f"trunk identity n<={max(feasible)}", v, thr, v <= thr))

    gap = _sizebias_mean_gap(law)
    if gap is None:
        print(f"SKIP oracle: size-biased mean (law {label} not critical "
              "with finite variance)")
    else:
        thr = config.threshold("sizebias-mean")
        records.append(ex._record(config, "sizebias-mean-gap", gap, law=label, n=None,
                                  threshold=thr, passed=gap <= thr))
        checks.append(ex.CheckResult("size-biased mean = 1 + sigma^2", gap, thr, gap <= thr))

    if law.is_critical:
        violations = 0
        for r in range(config.replicates):
            st = Stream.from_seed(config.seed, _ORACLE_STREAM, r)
            sk = sample_trunk_star(law, 1 + r % 64, st)
            leaves = int(np.count_nonzero(sk.to_tree().degree_seq == 0))
            if leaves != sk.lukasiewicz_star() - sk.h + 1:
                violations += 1
        thr = config.threshold("leaf-identity-violations")
        records.append(ex._record(config, "leaf-identity-violations", violations,
                                  law=label, n=config.replicates,
                                  threshold=thr, passed=violations <= thr))
        checks.append(ex.CheckResult(
            f"leaf identity on {config.replicates} draws", violations, thr,
            violations <= thr))

    _emit(config, records, out)
    _print_checks("oracle", checks)
    return 0 if all(c.passed for c in checks) else 1


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, law_default_help: str) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON experiment config")
    p.add_argument("--seed", type=int, metavar="U64", help="base RNG seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="replicate-level worker threads")
    p.add_argument("--law", type=_law_spec, metavar="LAW",
                   help=f"law name or JSON spec (default {law_default_help})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="looptrees",
        description="Samplers and verification suites for conditioned "
        "Bienayme-Galton-Watson trees, their looptrees, and negative-drift walks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-tree", help="sample a BGW tree to a DSV1 file")
    _add_common(p, "geometric")
    p.add_argument("--n", type=int, required=True, help="target size")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact-size", action="store_true",
                      help="condition on exactly n vertices")
    mode.add_argument("--at-least", action="store_true",
                      help="condition on at least n vertices")
    p.add_argument("--count", type=int, default=1, help="number of trees")
    p.set_defaults(fn=_cmd_sample_tree)

    p = sub.add_parser("loop", help="build the looptree of a conditioned tree")
    _add_common(p, "geometric")
    p.add_argument("--n", type=int, required=True, help="tree size")
    p.add_argument("--loopbar", action="store_true",
                   help="contract each last-child edge (Loop-bar)")
    p.set_defaults(fn=_cmd_loop)

    p = sub.add_parser("trunk", help="sample size-biased trunk skeletons")
    _add_common(p, "geometric")
    p.add_argument("--height", type=int, required=True, help="spine height h")
    p.add_argument("--count", type=int, default=1, help="number of skeletons")
    p.set_defaults(fn=_cmd_trunk)

    p = sub.add_parser("walk", help="sample a conditioned negative-drift walk")
    _add_common(p, "heavytail")
    p.add_argument("--n", type=int, required=True, help="condition on zeta >= n")
    p.add_argument("--horizon", type=int, help="steps to emit (default n)")
    p.add_argument("--method", choices=("auto", "dp", "rejection"), default="auto")
    p.set_defaults(fn=_cmd_walk)

    p = sub.add_parser("couple", help="windowed TV between W^(n) and the surrogate Z^(n)")
    _add_common(p, "heavytail")
    p.add_argument("--n", type=int, required=True, help="condition on zeta >= n")
    p.add_argument("--horizon", type=int, help="sampled path length (default n)")
    p.add_argument("--window", type=int, default=10, help="increments compared")
    p.add_argument("--bins", type=_cuts, default=(0,),
                   help="comma-separated bin cuts per increment")
    p.add_argument("--replicates", type=int, default=20000,
                   help="paths sampled per law")
    p.set_defaults(fn=_cmd_couple)

    p = sub.add_parser("verify", help="run a verification suite")
    _add_common(p, "per suite")
    p.add_argument("--suite", metavar="NAME",
                   help=f"one of {', '.join(ex.SUITE_NAMES)}, or all")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("oracle", help="exact enumeration identities for one law")
    _add_common(p, "geometric")
    p.add_argument("--n", type=int, default=8, help="max size for enumerations")
    p.add_argument("--draws", type=int, default=100000,
                   help="trunk draws for the leaf identity")
    p.set_defaults(fn=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except LooptreesError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
