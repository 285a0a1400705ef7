import math

import numpy as np
import pytest

from conftest import (
    EX1_P1,
    EX1_P2,
    EX1_Q1,
    EX1_Q2,
    EX2_Q1,
    EX2_Q2,
    EX3_Q1,
    EX3_Q2,
    random_lifted,
    random_product_initial,
    random_stochastic,
)
from stplds.algebra import kron, power_reduce_matrix, stp, stp_chain
from stplds.consistency import (
    NON_STOCHASTIC_NOTE,
    ExactCapError,
    HOperator,
    check_all,
    check_consistency_exact,
    check_consistency_sampled,
    check_corollary_matrix,
    check_structural_sufficient,
    corollary_matrix,
    h_apply_power,
    h_apply_reduced,
    point_consistency,
)
from stplds.evolution import compare_models
from stplds.model import assemble_global

P0 = np.array([0.2, 0.2, 0.3, 0.3])
EX1 = HOperator((EX1_Q1, EX1_Q2))
EX2 = HOperator((EX2_Q1, EX2_Q2))
EX3 = HOperator((EX3_Q1, EX3_Q2))


def materialize_h(lifted):
    k = lifted[0].shape[1]
    return stp_chain(*(kron(np.eye(k ** i), q) for i, q in enumerate(lifted)))


def materialize_reduce_power(k, times):
    r = power_reduce_matrix(k).to_dense()
    out = np.eye(k)
    for _ in range(times):
        out = stp(r, out)
    return out


def power(p, n):
    out = p
    for _ in range(n - 1):
        out = np.kron(out, p)
    return out


def random_instance(rng, structured):
    n = int(rng.integers(1, 4))
    alphabets = [int(a) for a in rng.integers(1, 3, size=n)]
    while math.prod(alphabets) > 8:
        alphabets[-1] = 1
    constant = ()
    if structured and n > 1:
        constant = tuple(rng.choice(np.arange(1, n + 1), size=n - 1, replace=False).tolist())
    return random_lifted(rng, alphabets, constant)


# ---------------------------------------------------------------------------
# factored applications


def test_h_apply_power_examples():
    np.testing.assert_allclose(h_apply_power(EX1, P0), [0.2496, 0.2704, 0.2304, 0.2496], atol=1e-12)
    q = random_stochastic(np.random.default_rng(1), 3, 3)
    p = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(h_apply_power(HOperator((q,)), p), q @ p, atol=1e-12)


def test_h_apply_reduced_examples(rng):
    np.testing.assert_allclose(h_apply_reduced(EX1, P0), [0.236, 0.284, 0.244, 0.236], atol=1e-12)
    q = random_stochastic(rng, 3, 3)
    p = random_stochastic(rng, 3, 1)[:, 0]
    np.testing.assert_allclose(h_apply_reduced(HOperator((q,)), p), q @ p, atol=1e-12)


def test_vertex_agreement_between_sides(rng):
    for _ in range(10):
        lifted = random_lifted(rng, [2, 2, 2, 2])
        h = HOperator(tuple(lifted))
        cols = []
        for r in range(16):
            col = lifted[0][:, r]
            for q in lifted[1:]:
                col = np.kron(col, q[:, r])
            cols.append(col)
        brute = np.column_stack(cols)
        np.testing.assert_allclose(h_apply_power(h, np.eye(16)), brute, atol=1e-12)
        np.testing.assert_allclose(h_apply_reduced(h, np.eye(16)), brute, atol=1e-12)


def test_factored_matches_materialized(rng):
    for _ in range(20):
        lifted = random_instance(rng, structured=False)
        h = HOperator(tuple(lifted))
        big_h = materialize_h(lifted)
        assert big_h.shape == (h.k, h.k ** h.n)
        p = random_stochastic(rng, h.k, 1)[:, 0]
        np.testing.assert_allclose(h_apply_power(h, p), big_h @ power(p, h.n), atol=1e-12)
        reduce = materialize_reduce_power(h.k, h.n - 1)
        np.testing.assert_allclose(h_apply_reduced(h, p), big_h @ reduce @ p, atol=1e-12)
        np.testing.assert_allclose(h.reduced, big_h @ reduce, atol=1e-12)


# ---------------------------------------------------------------------------
# checkers on the worked examples


def test_sampled_examples():
    v = check_consistency_sampled(EX3, 1000, seed=5)
    assert v.status == "consistent-at-samples" and v.residual <= 1e-12
    v = check_consistency_sampled(EX1, 1000, seed=5)
    assert v.status == "inconsistent" and v.residual >= 1e-3
    assert point_consistency(EX1, v.witness) == pytest.approx(v.residual, abs=1e-15)
    q = random_stochastic(np.random.default_rng(0), 4, 4)
    assert check_consistency_sampled(HOperator((q,)), 200).status == "consistent-at-samples"


def test_exact_examples(rng):
    assert check_consistency_exact(EX3).status == "consistent"
    v = check_consistency_exact(EX1)
    assert v.status == "inconsistent"
    assert point_consistency(EX1, v.witness) > v.tolerance
    c = [np.repeat(random_stochastic(rng, a, 1), 6, axis=1) for a in (2, 3)]
    assert check_consistency_exact(HOperator(tuple(c))).status == "consistent"


def test_exact_cap():
    lifted = random_lifted(np.random.default_rng(0), [2, 2, 2])
    with pytest.raises(ExactCapError, match="sampled"):
        check_consistency_exact(HOperator(tuple(lifted)), cap=100)


def test_structural_examples():
    v = check_structural_sufficient(EX3)
    assert v.status == "consistent" and v.structural_nodes == (1,)
    assert check_structural_sufficient(EX1).status == "inconclusive"
    assert check_structural_sufficient([EX1_Q1[:, :2]]).status == "consistent"


def test_corollary_on_consistent_example():
    v = check_corollary_matrix(EX3, 200, seed=3)
    assert v.status == "consistent-at-samples" and v.residual <= 1e-12


def test_corollary_matrix_definition(rng):
    # H p^{n-1} under the semi-tensor product, against the materialized operator
    for alphabets in ([2, 2], [2, 2, 2], [3, 2]):
        lifted = random_lifted(rng, alphabets)
        h = HOperator(tuple(lifted))
        p = random_stochastic(rng, h.k, 1)[:, 0]
        expected = stp(materialize_h(lifted), power(p, h.n - 1))
        np.testing.assert_allclose(corollary_matrix(h, p), expected, atol=1e-12)


def test_corollary_example_two():
    p = [0.0, 0.5, 0.0, 0.5]
    assert point_consistency(EX2, p) <= 1e-12
    v = check_corollary_matrix(EX2, points=[p])
    assert v.status == "inconclusive" and v.residual >= 0.01
    assert NON_STOCHASTIC_NOTE in v.notes


def test_corollary_fails_for_generic_factor(rng):
    k = 4
    q2 = np.eye(2)[:, [0, 1, 0, 1]]  # node 2 copies itself
    q1 = random_stochastic(rng, 2, k)
    v = check_corollary_matrix(HOperator((q1, q2)), 50, seed=1)
    assert v.status == "inconclusive" and v.residual > 1e-3


def test_point_consistency_examples():
    p = np.array([0.0, 0.5, 0.0, 0.5])
    # hand product: Q1 p = [0.35, 0.45], Q2 p = [0.3, 0.7]
    np.testing.assert_allclose(h_apply_power(EX2, p), np.kron([0.35, 0.45], [0.3, 0.7]), atol=1e-12)
    np.testing.assert_allclose(h_apply_power(EX2, p), [0.105, 0.245, 0.135, 0.315], atol=1e-12)
    np.testing.assert_allclose(h_apply_reduced(EX2, p), [0.105, 0.245, 0.135, 0.315], atol=1e-12)
    printed_gap = np.max(np.abs(np.array([0.2496, 0.2704, 0.2304, 0.2496]) - [0.236, 0.284, 0.244, 0.236]))
    assert point_consistency(EX1, P0) == pytest.approx(printed_gap, abs=1e-12)
    assert point_consistency(EX1, P0) == pytest.approx(0.0136, abs=1e-12)
    for r in range(4):
        assert point_consistency(EX1, np.eye(4)[r]) <= 1e-12


# ---------------------------------------------------------------------------
# invariants over random instances


def test_soundness_chain(rng):
    for i in range(50):
        lifted = random_instance(rng, structured=bool(i % 2))
        h = HOperator(tuple(lifted))
        structural = check_structural_sufficient(h).status == "consistent"
        exact = check_consistency_exact(h).status == "consistent"
        sampled = check_consistency_sampled(h, 200, seed=i).status == "consistent-at-samples"
        if structural:
            assert exact
        if exact:
            assert sampled
        assert exact == sampled


def test_inconsistent_witnesses_reverify(rng):
    for i in range(30):
        h = HOperator(tuple(random_instance(rng, structured=False)))
        for v in (check_consistency_exact(h), check_consistency_sampled(h, 200, seed=i)):
            if v.status == "inconsistent":
                assert point_consistency(h, v.witness) > v.tolerance


def test_consistent_models_have_equal_trajectories(rng):
    done = 0
    for i in range(40):
        lifted = random_instance(rng, structured=True)
        h = HOperator(tuple(lifted))
        if check_consistency_exact(h).status != "consistent":
            continue
        alphabets = [q.shape[0] for q in lifted]
        for _ in range(10):
            report = compare_models(lifted, random_product_initial(rng, alphabets), 100)
            assert report.max <= 1e-9
        done += 1
    assert done >= 10


def test_check_all_order():
    assert check_all(EX3).method == "structural"
    assert check_all(EX1).method == "exact"
    assert check_all(EX1, cap=10).method == "sampled"


def test_example_one_divergence_matches_checker():
    report = compare_models([EX1_Q1, EX1_Q2], [EX1_P1, EX1_P2], 1)
    assert report.distances[1] == pytest.approx(
        np.abs(h_apply_power(EX1, P0) - h_apply_reduced(EX1, P0)).sum(), abs=1e-12
    )


def test_h_operator_from_model():
    g = assemble_global([EX1_Q1, EX1_Q2])
    h = HOperator.from_system(g)
    assert h.k == 4 and h.n == 2 and h.stochastic
    assert not EX2.stochastic
