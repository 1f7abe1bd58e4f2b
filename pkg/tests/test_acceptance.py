"""The ten acceptance criteria, one test and one printed line each.

Every criterion runs its verification suite at the pinned full-scale
configuration (seed 20260816, the date this gate was frozen) and asserts
each sub-check at its stated tolerance.  Suites checkpoint per replicate
under artifacts/acceptance, so a rerun of this module resumes from disk
instead of recomputing; a fresh run takes roughly twenty minutes, most of
it in criteria 5 and 9.

Criterion 6 is split by law.  The geometric legs pass.  The binary legs
are recorded as strict expected failures: along the spine, one looptree
step has mean c_mu per level while the right-branch count R grows by
sigma^2 / 2 per level, so d_loop / R concentrates at (2 / sigma^2) c_mu.
For geometric offspring sigma^2 = 2 and the ratio is c_mu as the check
demands; for binary offspring sigma^2 = 1 and the ratio is 2 c_mu
(measured median 1.9935 at n = 1e5 + 1), so a bar of c_mu +- 5% cannot be
met and the c_mu-scaled distortion grows instead of shrinking.  The FAIL
lines below report that honestly rather than rescaling the check to fit.
"""

from pathlib import Path

import pytest

from conftest import acceptance_line
from looptrees import experiments as ex

_OUT = Path(__file__).resolve().parent.parent / "artifacts" / "acceptance"

_RESULTS = {}


def _suite(name: str) -> ex.SuiteResult:
    if name not in _RESULTS:
        cfg = ex.default_config(name)
        _RESULTS[name] = ex.run_suite(cfg, out=str(_OUT / name))
    return _RESULTS[name]


def _line(criterion: str, checks) -> bool:
    ok = all(c.passed for c in checks)
    body = "; ".join(f"{c.name} = {c.value:.6g} (bar {c.threshold:g})" for c in checks)
    acceptance_line(f"{'PASS' if ok else 'FAIL'} {criterion}: {body}")
    return ok


def test_criterion_01_exact_identities():
    """Kemperman <= 1e-12, trunk identity <= 1e-10, leaf identity exact."""
    res = _suite("exact-identities")
    assert _line("criterion 1 (exact identities)", res.checks)


def test_criterion_02_structural_bounds():
    """Ancestor and MRCA distance bounds plus the contour map, 1e4 trees."""
    res = _suite("structure")
    assert _line("criterion 2 (structural bounds)", res.checks)


def test_criterion_03_constants():
    """c_mu, c_bar_mu: exact formula values and the 1e7-draw oracle."""
    res = _suite("constants")
    assert _line("criterion 3 (constants)", res.checks)


def test_criterion_04_local_limit():
    """llt_check <= 0.02 at n = 5000 and strictly decreasing on the ladder."""
    res = _suite("llt")
    assert _line("criterion 4 (local limit)", res.checks)


def test_criterion_05_condensation():
    """KS(maxdeg/n vs Pareto) <= 0.05; second/n and GH bound medians small."""
    res = _suite("condensation")
    assert _line("criterion 5 (condensation)", res.checks)


def test_criterion_06_crt_geometric():
    """Spinal ratio, profile coupling, distortion ladder for geometric."""
    res = _suite("crt")
    checks = [c for c in res.checks if "Geometric" in c.name]
    assert len(checks) == 3
    assert _line("criterion 6 (CRT surrogate, geometric)", checks)


@pytest.mark.xfail(
    strict=True,
    reason="binary offspring has sigma^2 = 1, so the spinal looptree-to-R "
    "ratio concentrates at (2 / sigma^2) c_mu = 2 c_mu, not c_mu; the three "
    "c_mu-scaled sub-checks cannot pass as stated (measured spinal median "
    "1.9935, profile q90 1.659, distortion q90 increasing at n up to 1e5 + 1)",
)
def test_criterion_06_crt_binary():
    """Same three checks for binary: expected failure, reported honestly."""
    res = _suite("crt")
    checks = [c for c in res.checks if "FiniteTable" in c.name]
    assert len(checks) == 3
    assert _line("criterion 6 (CRT surrogate, binary)", checks)


def test_criterion_07_coupling():
    """Windowed TV decreasing over n = 50/200/800, final <= 0.1, G_n >= 0.9."""
    res = _suite("coupling")
    assert _line("criterion 7 (big-jump coupling)", res.checks)


def test_criterion_08_first_passage():
    """KS(zeta/n vs Pareto(1, beta)) <= 0.05 at n = 2000, 500 replicates."""
    res = _suite("first-passage")
    assert _line("criterion 8 (first-passage scaling)", res.checks)


def test_criterion_09_height_law():
    """Uniform-vertex height KS <= 0.05 at n = 1e5; trunk TV decreasing."""
    res = _suite("height")
    assert _line("criterion 9 (height law and trunk TV)", res.checks)


def test_criterion_10_determinism():
    """Every suite rerun at same config writes byte-identical artifacts."""
    res = _suite("determinism")
    assert _line("criterion 10 (determinism)", res.checks)
