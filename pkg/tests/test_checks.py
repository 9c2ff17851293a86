import json

import numpy as np
import pytest

from mkdv_exact.checks import DEFAULT_TOLERANCES, CheckRecord, InvariantReport, run_checks
from mkdv_exact.marchenko import MarchenkoSolutions
from mkdv_exact.solution import GridSpec, SolutionEvaluator

from conftest import complex_triplet

SMALL_GRID = GridSpec(-3.0, 3.0, 31, np.array([-0.5, 0.0, 0.5]))


@pytest.fixture(scope="module")
def report1(ev1):
    return run_checks(ev1)


@pytest.fixture(scope="module")
def report2(ev2):
    return run_checks(ev2)


def test_example1_all_pass(report1):
    assert report1.ok, report1.table()


def test_example2_all_pass(report2):
    assert report2.ok, report2.table()


def test_complex_triplet_all_pass():
    rep = run_checks(SolutionEvaluator.from_triplet(complex_triplet()), grid=SMALL_GRID)
    assert rep.ok, rep.table()


def test_every_default_tolerance_is_exercised(report2):
    names = {r.name for r in report2.records}
    assert set(DEFAULT_TOLERANCES) - {"oracle"} <= names


def test_oracle_is_opt_in(ev2):
    rep = run_checks(ev2, grid=SMALL_GRID, oracle=True)
    assert rep["oracle"].passed
    assert rep["oracle"].max_residual <= 1e-8


def test_printed_logdet_form_is_diagnostic(report2):
    rec = report2["logdet_printed"]
    assert rec.diagnostic and rec.passed is None
    assert rec.max_residual > 1e-3


def test_corrupted_p_fails_nq(ev2):
    sols = ev2.sols
    bad = MarchenkoSolutions(sols.P + 1e-3, sols.Q, sols.N)
    rep = run_checks(SolutionEvaluator(ev2.triplet, bad), grid=SMALL_GRID)
    assert not rep.ok
    assert "nq_p2" in rep.failures
    assert rep["nq_p2"].max_residual > 1e-5


def test_tolerance_override_can_fail_a_check(ev1):
    rep = run_checks(ev1, {"pde": 1e-30}, grid=SMALL_GRID)
    assert rep.failures == ["pde"]
    assert rep["pde"].tolerance == 1e-30


def test_unknown_tolerance_key(ev1):
    with pytest.raises(KeyError):
        run_checks(ev1, {"no_such_check": 1.0})


def test_worst_location_is_reported(report2):
    loc = report2["pde"].location
    assert set(loc) == {"x", "t"}
    assert -3 <= loc["x"] <= 3 and -1 <= loc["t"] <= 1


def test_table_and_dict(report2):
    table = report2.table()
    assert table.splitlines()[-1] == "overall: pass"
    assert "nq_p2" in table
    doc = json.loads(json.dumps(report2.to_dict()))
    assert doc["ok"] is True
    assert len(doc["checks"]) == len(report2.records)


def test_overall_pass_iff_every_record_passes():
    good = CheckRecord("a", 0.0, 1.0, True)
    bad = CheckRecord("b", 2.0, 1.0, False)
    diag = CheckRecord("c", 5.0, None, None)
    assert InvariantReport([good, diag]).ok
    assert not InvariantReport([good, bad, diag]).ok
    assert InvariantReport([good, bad]).failures == ["b"]
    with pytest.raises(KeyError):
        InvariantReport([good])["zzz"]


def test_checks_are_seed_deterministic(ev2):
    a = run_checks(ev2, grid=SMALL_GRID, seed=3).to_dict()
    b = run_checks(ev2, grid=SMALL_GRID, seed=3).to_dict()
    assert a == b
