import numpy as np
import pytest

from compound_krylov.linearise import (
    BudgetExceededError,
    NormalForm,
    apply_linearisation,
    explicit_linearisation_power,
    normal_form,
    normal_form_step,
)
from compound_krylov.paramsys import DimensionError, ParametricMatrix, apply, kron_power
from oracles import dense_matrix, explicit_power, random_spd_terms


def _instance(seed, n=8, s=3):
    rng = np.random.default_rng(seed)
    terms = random_spd_terms(rng, n, s)
    return ParametricMatrix(terms), terms, rng.standard_normal(n), rng


def test_single_column_block():
    P, terms, b, _ = _instance(0, s=2)
    np.testing.assert_array_equal(apply_linearisation(P, b),
                                  np.column_stack([P.terms[0] @ b, P.terms[1] @ b]))


def test_shape_law_and_linearity():
    P, _, _, rng = _instance(1)
    C1, C2 = rng.standard_normal((8, 4)), rng.standard_normal((8, 4))
    out = apply_linearisation(P, C1)
    assert out.shape == (8, 12)
    np.testing.assert_allclose(apply_linearisation(P, C1 + C2),
                               out + apply_linearisation(P, C2), rtol=0, atol=1e-13)


def test_contraction_with_sigma_is_apply():
    P, _, b, rng = _instance(2)
    sigma = rng.standard_normal(3)
    ref = apply(P, sigma, b)
    assert np.linalg.norm(apply_linearisation(P, b) @ sigma - ref) <= 1e-12 * np.linalg.norm(ref)


def test_budget_guard():
    P, _, b, _ = _instance(3)
    with pytest.raises(BudgetExceededError):
        apply_linearisation(P, np.ones((8, 5)), max_columns=10)
    with pytest.raises(BudgetExceededError):
        explicit_linearisation_power(P, b, 5, max_columns=100)
    with pytest.raises(DimensionError):
        apply_linearisation(P, np.ones(7))


def test_explicit_power_small_cases():
    P, terms, b, _ = _instance(4)
    np.testing.assert_array_equal(explicit_linearisation_power(P, b, 1), apply_linearisation(P, b))
    P1 = ParametricMatrix(terms[:1])
    np.testing.assert_allclose(explicit_linearisation_power(P1, b, 3)[:, 0],
                               np.linalg.matrix_power(P1.terms[0], 3) @ b, rtol=1e-12)


def test_explicit_power_identity_n6_s2_k3():
    P, terms, b, rng = _instance(5, n=6, s=2)
    sigma = rng.standard_normal(2)
    L3 = explicit_linearisation_power(P, b, 3)
    ref = np.linalg.matrix_power(dense_matrix(P.terms, sigma), 3) @ b
    assert np.linalg.norm(L3 @ kron_power(sigma, 3) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_powers_match_oracle_construction():
    P, terms, b, _ = _instance(6)
    for k in range(1, 4):
        np.testing.assert_allclose(explicit_linearisation_power(P, b, k),
                                   explicit_power(P.terms, b, k), rtol=1e-13, atol=1e-14)


def test_normal_form_base_and_single_term():
    P, terms, b, _ = _instance(7, s=1)
    nf = normal_form_step(P, NormalForm.initial(b))
    A = P.terms[0]
    np.testing.assert_allclose(nf.M, A @ np.outer(b, b) @ A.T, rtol=1e-13, atol=1e-14)
    assert nf.k == 1


def test_normal_form_symmetric_psd():
    P, _, b, _ = _instance(8)
    nf = normal_form(P, b, 3)
    M = nf.M
    assert np.linalg.norm(M - M.T) <= 1e-12 * np.linalg.norm(M)
    assert np.linalg.eigvalsh(M)[0] >= -1e-10 * np.linalg.norm(M, 2)
    sv = nf.singular_values()
    assert np.all(np.diff(sv) <= 0) and sv[-1] >= 0


def test_normal_form_matches_explicit_n5_s2_k2():
    P, _, b, _ = _instance(9, n=5, s=2)
    L2 = explicit_linearisation_power(P, b, 2)
    M = normal_form(P, b, 2).M
    assert np.linalg.norm(M - L2 @ L2.T) <= 1e-10 * np.linalg.norm(L2 @ L2.T)


def test_range_containment():
    P, _, b, rng = _instance(10, n=8, s=2)
    L2 = explicit_linearisation_power(P, b, 2)
    for _ in range(5):
        sigma = rng.random(2)
        v = np.linalg.matrix_power(dense_matrix(P.terms, sigma), 2) @ b
        coef, *_ = np.linalg.lstsq(L2, v, rcond=None)
        assert np.linalg.norm(L2 @ coef - v) <= 1e-10 * np.linalg.norm(v)


def test_normal_form_dimension_check():
    P, _, b, _ = _instance(11)
    with pytest.raises(DimensionError):
        normal_form_step(P, NormalForm(np.eye(5), 0))
