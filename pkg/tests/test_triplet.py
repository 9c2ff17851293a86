import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkdv_exact.triplet import (ComplexBlock, RealBlock, Triplet, assemble_canonical,
                                canonical_complex_block, canonical_real_block,
                                check_admissible, check_minimality, check_positive_stable)

from conftest import EX2_A, EX2_B, EX2_C, canonical_triplets, example1, example2


def test_triplet_shapes_validated():
    with pytest.raises(ValueError, match="B must be 2x1"):
        Triplet(np.eye(2), [[1.0]], [[1.0, 0.0]])
    with pytest.raises(ValueError, match="C must be 1x2"):
        Triplet(np.eye(2), [[1.0], [0.0]], [[1.0]])
    with pytest.raises(ValueError):
        Triplet([[1.0, 2.0]], [[1.0]], [[1.0]])


def test_triplet_is_read_only():
    t = example2()
    with pytest.raises(ValueError):
        t.A[0, 0] = 5.0


def test_to_dict_round_trip():
    t = example2()
    again = Triplet(**t.to_dict())
    assert np.array_equal(again.A, t.A) and np.array_equal(again.C, t.C)


def test_example2_is_admissible():
    rep = check_admissible(example2())
    assert (rep.observability_rank, rep.controllability_rank) == (3, 3)
    assert rep.minimal and rep.positive_stable and rep.sylvester_solvable and rep.ok
    assert rep.messages == []


def test_symmetric_eigenvalues_rejected():
    rep = check_admissible(Triplet(np.diag([1.0, -1.0]), [[1.0], [1.0]], [[1.0, 1.0]]))
    assert not rep.sylvester_solvable and not rep.ok
    assert any("eigenvalues symmetric about imaginary axis" in m for m in rep.messages)


def test_zero_eigenvalue_rejected():
    rep = check_admissible(Triplet([[0.0]], [[1.0]], [[1.0]]))
    assert not rep.sylvester_solvable and not rep.positive_stable and not rep.ok


def test_non_minimal_reported():
    rep = check_admissible(Triplet(np.eye(2), [[1.0], [0.0]], [[1.0, 0.0]]))
    assert not rep.minimal
    assert rep.observability_rank == 1 and rep.controllability_rank == 1


def test_negative_eigenvalue_not_positive_stable():
    t = Triplet([[-2.0]], [[1.0]], [[1.0]])
    assert not check_positive_stable(t)
    rep = check_admissible(t)
    assert rep.sylvester_solvable and not rep.positive_stable


def _eig_positive(A):
    return bool(np.all(np.roots(np.poly(A)).real > 0))


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 4).flatmap(
    lambda n: st.lists(st.floats(-3, 3), min_size=n * n, max_size=n * n).map(
        lambda v: np.array(v).reshape(n, n))))
def test_positive_stability_matches_characteristic_roots(A):
    # the oracle: roots of the characteristic polynomial
    roots = np.roots(np.poly(A))
    if np.abs(roots.real).min() < 1e-3:
        return
    p = A.shape[0]
    t = Triplet(A, np.ones((p, 1)), np.ones((1, p)))
    assert check_positive_stable(t) == _eig_positive(A)


def test_real_block_shape():
    A, B, C = canonical_real_block(1.0, [0.5, 2.0, 1.0])
    assert np.array_equal(A, EX2_A)
    assert np.array_equal(B, EX2_B)
    assert np.array_equal(C, EX2_C)


def test_complex_block_shape():
    A, B, C = canonical_complex_block(1.0, 1.0, [1.0], [0.0])
    assert np.array_equal(A, [[1.0, 1.0], [-1.0, 1.0]])
    assert np.array_equal(B, [[0.0], [1.0]])
    assert np.array_equal(C, [[1.0, 0.0]])


def test_complex_block_order_two():
    A, B, C = canonical_complex_block(2.0, 3.0, [1.0, 4.0], [5.0, 6.0])
    lam = np.array([[2.0, 3.0], [-3.0, 2.0]])
    assert np.array_equal(A[:2, :2], lam) and np.array_equal(A[2:, 2:], lam)
    assert np.array_equal(A[:2, 2:], -np.eye(2))
    assert np.array_equal(C, [[4.0, 6.0, 1.0, 5.0]])


@pytest.mark.parametrize("bad", [
    lambda: RealBlock(0.0, [1.0]),
    lambda: RealBlock(1.0, []),
    lambda: RealBlock(1.0, [1.0, 0.0]),
    lambda: ComplexBlock(-1.0, 1.0, [1.0], [1.0]),
    lambda: ComplexBlock(1.0, 1.0, [1.0, 2.0], [1.0]),
    lambda: ComplexBlock(1.0, 1.0, [0.0], [0.0]),
])
def test_block_preconditions(bad):
    with pytest.raises(ValueError):
        bad()


def test_duplicate_eigenvalues_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        assemble_canonical([RealBlock(1.0, [1.0]), RealBlock(1.0, [2.0])])
    with pytest.raises(ValueError, match="duplicate"):
        assemble_canonical([ComplexBlock(1.0, 2.0, [1.0], [0.0]),
                            ComplexBlock(1.0, -2.0, [1.0], [1.0])])


def test_assembly_is_block_diagonal():
    t = assemble_canonical([RealBlock(2.0, [3.0]), RealBlock(1.0, [0.5, 2.0, 1.0])])
    assert t.p == 4
    assert np.array_equal(t.A[1:, 1:], EX2_A)
    assert np.array_equal(t.A[0], [2.0, 0.0, 0.0, 0.0])
    assert np.array_equal(t.C, [[3.0, 1.0, 2.0, 0.5]])


def test_example1_triplet():
    t = assemble_canonical([RealBlock(1.0, [2.0])])
    assert np.array_equal(t.A, example1().A) and np.array_equal(t.C, example1().C)


@settings(max_examples=30, deadline=None)
@given(canonical_triplets())
def test_canonical_triplets_are_admissible(t):
    assert check_admissible(t).ok


@settings(max_examples=30, deadline=None)
@given(canonical_triplets(), st.integers(0, 10_000))
def test_similarity_preserves_admissibility(t, seed):
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(t.p, t.p)) + 3 * np.eye(t.p)
    s = t.similar(S)
    assert check_admissible(s).ok
    assert check_minimality(s) == (t.p, t.p)
