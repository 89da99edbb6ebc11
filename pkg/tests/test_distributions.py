import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riskcontract import (
    BinomialRansomware, DiscreteDistribution, DomainError, ParameterError, binomial_model,
    cdf, check_density_convexity, check_fosd, distribution_at, expectation,
    load_tabulated_csv, tabulated_model,
)
from riskcontract.distributions import write_tabulated_csv

import oracles


# --- DiscreteDistribution ---------------------------------------------------------


def test_rejects_bad_probabilities():
    with pytest.raises(ValueError, match="sum"):
        DiscreteDistribution([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError, match="nonnegative"):
        DiscreteDistribution([0.0, 1.0], [1.5, -0.5])


def test_rejects_unsorted_or_negative_support():
    with pytest.raises(ValueError, match="increasing"):
        DiscreteDistribution([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(ValueError, match="nonnegative"):
        DiscreteDistribution([-1.0, 0.0], [0.5, 0.5])


def test_arrays_are_read_only():
    d = DiscreteDistribution([0.0, 1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        d.probs[0] = 1.0


def test_from_outcomes_merges_duplicates():
    d = DiscreteDistribution.from_outcomes([3.0, 1.0, 3.0], [0.25, 0.5, 0.25])
    assert list(d.support) == [1.0, 3.0]
    assert list(d.probs) == [0.5, 0.5]


@pytest.mark.parametrize("t, expected", [(0.0, 0.5), (-1.0, 0.0), (10.0, 1.0), (5.0, 0.5)])
def test_cdf_two_point(t, expected):
    assert cdf(DiscreteDistribution([0.0, 10.0], [0.5, 0.5]), t) == expected


@pytest.mark.parametrize("dist, expected", [
    (DiscreteDistribution([0.0, 10.0], [0.5, 0.5]), 5.0),
    (DiscreteDistribution.point_mass(7.0), 7.0),
    (DiscreteDistribution([1.0, 2.0, 3.0, 4.0], [0.25] * 4), 2.5),
])
def test_expectation(dist, expected):
    assert expectation(dist) == pytest.approx(expected, abs=1e-12)


# --- families ------------------------------------------------------------------------


def test_binomial_no_investment_is_point_mass_at_n():
    d = distribution_at(binomial_model(2, 0.8), 0.0)
    assert np.allclose(d.probs, [0.0, 0.0, 1.0], atol=1e-15)


def test_binomial_single_computer_full_investment():
    d = distribution_at(binomial_model(1, 0.8), 1.0)
    assert np.allclose(d.probs, [0.8, 0.2], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 20), kappa=st.floats(0.05, 1.0), x=st.floats(0.0, 1.0))
def test_binomial_matches_enumeration(n, kappa, x):
    got = BinomialRansomware(n, kappa).pmf(x)
    assert got.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(got, oracles.binomial_pmf(n, kappa, x), atol=1e-12)


def test_binomial_parameter_validation():
    with pytest.raises(ParameterError):
        BinomialRansomware(0)
    with pytest.raises(ParameterError):
        BinomialRansomware(5, 1.5)


def test_action_outside_set_is_domain_error(case_model):
    with pytest.raises(DomainError):
        case_model.pmf(1.5)
    with pytest.raises(DomainError):
        distribution_at(case_model, -0.1)


def test_single_entry_table_is_constant(constant_model):
    for x in (0.0, 0.3, 1.0):
        assert np.allclose(constant_model.pmf(x), [0.2, 0.3, 0.5])


def test_tabulated_interpolates_linearly(affine_model):
    assert np.allclose(affine_model.pmf(0.5), [0.45, 0.25, 0.3])


def test_tabulated_rejects_bad_rows():
    with pytest.raises(ParameterError, match="x=1"):
        tabulated_model([0.0, 1.0], [0.0, 1.0], [[0.5, 0.5], [0.5, 0.6]])
    with pytest.raises(ParameterError, match="shape"):
        tabulated_model([0.0, 1.0], [0.0, 1.0], [[0.5, 0.5]])


def test_csv_round_trip(tmp_path, affine_model):
    path = tmp_path / "family.csv"
    write_tabulated_csv(affine_model, path)
    back = load_tabulated_csv(path)
    for x in (0.0, 0.25, 1.0):
        assert np.array_equal(back.pmf(x), affine_model.pmf(x))


def test_csv_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,0,1\n0,0.5,0.5\n1,0.5,oops\n")
    with pytest.raises(ParameterError, match=r"bad\.csv:3"):
        load_tabulated_csv(path)


# --- first-order dominance -------------------------------------------------------------


def test_fosd_case_study_pair(case_model):
    report = check_fosd(case_model, 0.2, 0.8)
    expected = oracles.fosd_holds(oracles.binomial_pmf(10, 0.8, 0.2),
                                  oracles.binomial_pmf(10, 0.8, 0.8))
    assert expected and report.passed and report.max_gap == 0.0


def test_fosd_identical_actions(case_model, affine_model):
    for model in (case_model, affine_model):
        r = check_fosd(model, 0.4, 0.4)
        assert r.passed and r.max_gap == 0.0


def test_fosd_reversed_family_fails(reversed_model):
    r = check_fosd(reversed_model, 0.0, 1.0)
    assert not r.passed
    assert r.max_gap == pytest.approx(0.5)
    assert r.worst_loss == 0.0


def test_fosd_agrees_with_oracle_on_grid(case_model):
    xs = np.linspace(0, 1, 11)
    for a in xs:
        for b in xs[xs >= a]:
            ok = oracles.fosd_holds(oracles.binomial_pmf(10, 0.8, a), oracles.binomial_pmf(10, 0.8, b))
            assert check_fosd(case_model, a, b).passed == ok


# --- density convexity -------------------------------------------------------------------


def test_affine_family_is_convex(affine_model):
    r = check_density_convexity(affine_model, np.linspace(0, 1, 11), 1e-3)
    assert r.passed
    assert np.max(np.abs(r.second_differences)) < 1e-6


def test_concave_entry_fails():
    # middle pmf entry rises then falls: concave in the action
    model = tabulated_model([0.0, 0.5, 1.0], [0.0, 1.0, 2.0],
                            [[0.5, 0.0, 0.5], [0.2, 0.6, 0.2], [0.5, 0.0, 0.5]])
    r = check_density_convexity(model, [0.25, 0.5, 0.75], 1e-3)
    assert not r.passed and r.min_value < 0


def test_case_study_convexity_is_reported(case_model):
    # the binomial family is not convex in the action; the check reports it
    r = check_density_convexity(case_model, np.linspace(0, 1, 21), 1e-3)
    assert not r.passed
    d = r.to_dict()
    assert d["grid_points"] == 21 and d["min_second_difference"] < 0


def test_convexity_needs_three_points(affine_model):
    with pytest.raises(ValueError):
        check_density_convexity(affine_model, [0.0, 1.0])
