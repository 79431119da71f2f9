"""
Tests for the closed-form constants and their comparisons.
"""

import math

import pytest

from app.services import constants
from app.services.specfun import unit_ball_volume
from app.services.suites import verification_service
from app.utils.errors import DomainError


def test_aubin_talenti_quadratic_case():
    expected = (4.0 / math.sqrt(math.pi)) ** (1.0 / 3.0) / math.sqrt(3.0 * math.pi)
    assert constants.aubin_talenti(3, 2.0) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_aubin_talenti_tends_to_the_isoperimetric_constant(n):
    limit = 1.0 / (n * unit_ball_volume(n) ** (1.0 / n))
    assert constants.aubin_talenti(n, 1.0 + 1e-6) == pytest.approx(limit, rel=1e-4)


def test_s_tilde_tends_to_the_volume_ratio():
    limit = (unit_ball_volume(4) / unit_ball_volume(7)) ** (1.0 / 3.0) / 3.0
    assert constants.sobolev_s_tilde(3, 4, 1.0 + 1e-6) == pytest.approx(limit, rel=1e-3)


def test_michael_simon():
    assert constants.michael_simon(2) == pytest.approx(4.0 ** 3 / math.sqrt(math.pi), rel=1e-12)


@pytest.mark.parametrize("m", [1, 2])
def test_isoperimetric_constant_surfaces(m):
    assert constants.brendle_c(2, m) == pytest.approx(1.0 / (2.0 * math.sqrt(math.pi)), rel=1e-12)


def test_active_branch():
    # the inverse-ball branch wins for m <= 2, the volume ratio for m >= 3
    assert constants.active_branch(2, 1) == 2
    assert constants.active_branch(2, 2) == 2
    assert constants.active_branch(3, 5) == 1


def test_brendle_needs_codimension():
    with pytest.raises(DomainError):
        constants.brendle_c(3, 0)


def test_nash_codimensions():
    assert constants.nash_codim(3, compact=True) == 27
    assert constants.nash_codim(3, compact=False) == 117


def test_j_bound():
    assert constants.j_bound(2, 1, 1.5) == pytest.approx(3.0)
    assert constants.j_bound(3, 0, 2.0) == pytest.approx(3.0)


def test_young_cap():
    assert constants.young_cap(2.0) == pytest.approx(0.5, rel=1e-14)
    assert constants.young_maximizer(2.0) == pytest.approx(1.0)
    x, cap = constants.young_cap_numeric(3.0, 0.5)
    assert cap == pytest.approx(constants.young_cap(3.0, 0.5), rel=1e-9)
    assert x == pytest.approx(constants.young_maximizer(3.0, 0.5), rel=1e-4)


def test_k_log_and_linear_agree():
    for n, m, p, t in [(3, 1, 3.0, 0.5), (4, 2, 2.5, 0.3), (5, 7, 4.0, 0.9)]:
        assert constants.k_of_t(n, m, p, t) == pytest.approx(constants.k_of_t_linear(n, m, p, t), rel=1e-12)


def test_k_at_quadratic_exponent_is_m_free():
    for m in (0, 1, 5, 50):
        assert constants.k_of_t(4, m, 2.0, 0.4) == pytest.approx(math.pi ** -2, rel=1e-12)


def test_k_argmin():
    assert constants.k_argmin_numeric(4, 2, 3.0) == pytest.approx(4.0 / 6.0, abs=1e-6)


def test_k_opt_approaches_limit():
    gap = abs(constants.log_k_opt(3, 10 ** 6, 3.0) - constants.log_k_limit(3, 3.0))
    assert gap <= 1e-4


def test_k_needs_p_at_least_two():
    with pytest.raises(DomainError):
        constants.k_of_t(3, 1, 1.5, 0.5)


def test_sobolev_equals_tilde_at_p_two():
    assert constants.log_sobolev_s_tilde(5, 3, 2.0) == pytest.approx(constants.log_sobolev_s(5, 2.0), abs=1e-12)


def test_c_tilde_two_paths():
    for n, m, p in [(2, 1, 1.5), (3, 4, 2.0), (6, 2, 1.2)]:
        assert constants.log_c_tilde(n, m, p) == pytest.approx(
            constants.log_c_tilde_from_normalizer(n, m, p), abs=1e-11)


def test_talenti_normalizer_m_zero():
    # c_{n,0,p} is finite and positive
    assert constants.talenti_normalizer(3, 0, 2.0) > 0


def test_codimension_zero_uses_a_unit_point_ball():
    assert constants.k_of_t(3, 0, 2.0, 0.3) == pytest.approx(math.pi ** -1.5, rel=1e-12)
    assert math.isfinite(constants.log_c_tilde(3, 0, 1.5))


def test_chain_is_strictly_ordered():
    reports = constants.compare_chain(3)
    assert [r.compact for r in reports] == [True, False]
    assert all(r.strictly_ordered and all(x > 0 for x in r.log_ratios) for r in reports)
    assert [e.name for e in reports[0].entries] == ["MS", "C", "S", "AT"]


def test_huge_dimension_stays_in_log_domain():
    log_ms = constants.log_michael_simon(10 ** 6)
    assert math.isfinite(log_ms)
    assert constants.michael_simon(10 ** 6) == math.inf


class TestWindows:

    def test_sobolev_needs_p_at_least_two(self):
        with pytest.raises(DomainError):
            constants.sobolev_s(3, 1.5)
        assert math.isfinite(constants.sobolev_s(3, 1.5, permissive=True))

    def test_sobolev_needs_n_at_least_three(self):
        with pytest.raises(DomainError):
            constants.sobolev_s(2, 1.5)

    def test_tilde_needs_p_at_most_two(self):
        with pytest.raises(DomainError):
            constants.sobolev_s_tilde(4, 1, 2.5)

    def test_aubin_talenti_needs_p_below_n(self):
        with pytest.raises(DomainError):
            constants.aubin_talenti(3, 3.0)


class TestConstantTable:

    def test_euclidean_rows(self):
        table = constants.constant_table(3, 0, 2.0)
        assert {row.name for row in table.rows} == {"AT", "c_nmp", "j_bound"}
        assert table.verdicts == []

    def test_crossover_below(self):
        table = constants.constant_table(3, 4, 1.5)
        verdict = next(v for v in table.verdicts if v.name == "S_tilde below both legacy constants")
        assert verdict.passed

    def test_crossover_above(self):
        table = constants.constant_table(3, 4, 1.01)
        verdict = next(v for v in table.verdicts if v.name == "S_tilde below both legacy constants")
        assert not verdict.passed

    def test_branch_note(self):
        table = constants.constant_table(2, 1, 1.5)
        c_row = next(r for r in table.rows if r.name == "C")
        assert c_row.note == "active branch 2"
        assert c_row.value == pytest.approx(1.0 / (2.0 * math.sqrt(math.pi)), rel=1e-12)

    def test_split_rows(self):
        table = constants.constant_table(4, 2, 3.0, t=0.5)
        names = {row.name for row in table.rows}
        assert {"K_opt", "K_limit", "K_t", "C_t", "S"} <= names
        assert "S_tilde" not in names

    def test_permissive_marks_out_of_theorem(self):
        table = constants.constant_table(4, 2, 3.0, permissive=True)
        s_tilde = next(r for r in table.rows if r.name == "S_tilde")
        assert s_tilde.out_of_theorem

    def test_chain_verdict(self):
        table = constants.constant_table(3, 1, 2.0, chain=True)
        assert len(table.chains) == 2
        assert any(v.name == "MS > C > S > AT" and v.passed for v in table.verdicts)


def test_ball_volume_relation():
    for n in range(2, 20):
        assert (n + 2) * unit_ball_volume(n + 2) == pytest.approx(2.0 * math.pi * unit_ball_volume(n), rel=1e-12)


def test_identities_suite_passes():
    report = verification_service.run("identities")
    failed = [c.name for c in report.checks if not c.passed]
    assert report.passed, failed
