import math

import numpy as np
import pytest

from measured_ising.core.exceptions import OracleSizeError, ParameterError, VerificationError
from measured_ising.services.couplings import (
    cube_correlator,
    couplings_from_times,
    premeasurement_correlator,
    string_correlator,
)
from measured_ising.services.lattice_builder import build_lattice, designated_wilson_path
from measured_ising.services.oracle import (
    enumerate_ensemble,
    exact_ea,
    oned_bond_prob,
    oned_correlation_length,
    oned_q,
    premeasurement_check,
    sample_chain_direct,
    two_body_ensemble,
    two_body_strong_limit_check,
    verify_nishimori,
)

QUARTER = math.pi / 4


# -- chain closed forms -------------------------------------------------------------

@pytest.mark.parametrize("L", [4, 8, 16, 32])
def test_oned_q_on_nishimori_cut(L):
    for t_A in (0.05 * math.pi, 0.12 * math.pi, 0.2 * math.pi):
        assert oned_q(t_A, QUARTER, L) == pytest.approx(math.sin(2 * t_A) ** L, rel=1e-10)


@pytest.mark.parametrize("L", [4, 8, 16])
def test_oned_q_on_diagonal_cut(L):
    for t in (0.1 * math.pi, 0.17 * math.pi):
        c2 = math.cos(2 * t) ** 2
        expected = ((1 - c2) / (1 + c2)) ** (L // 2)
        assert oned_q(t, t, L) == pytest.approx(expected, rel=1e-10)


def test_oned_q_limits():
    assert oned_q(0.1, 0.3, 0) == 1.0
    assert oned_q(QUARTER, QUARTER, 16) == pytest.approx(1.0)
    assert oned_q(0.0, QUARTER, 4) == 0.0


def test_oned_q_needs_even_length():
    with pytest.raises(ParameterError):
        oned_q(0.1, QUARTER, 5)
    with pytest.raises(ParameterError):
        oned_q(0.1, QUARTER, -2)


@pytest.mark.parametrize("t_A,t_B", [
    (0.1 * math.pi, QUARTER), (0.3, 0.5), (0.15 * math.pi, 0.15 * math.pi),
])
def test_chain_enumeration_matches_closed_form(chain4, t_A, t_B):
    params = couplings_from_times(t_A, t_B)
    assert exact_ea(chain4, params) == pytest.approx(oned_q(t_A, t_B, 4), abs=1e-12)


def test_chain_bond_probability_matches_enumeration():
    graph = build_lattice("chain", 1)
    t_A, t_B = 0.2, 0.6
    ensemble = enumerate_ensemble(graph, couplings_from_times(t_A, t_B))
    expected = oned_bond_prob(t_A, t_B)
    assert ensemble.probability_of(np.array([1])) == pytest.approx(expected, abs=1e-12)


def test_correlation_length():
    t_A = 0.12 * math.pi
    xi = oned_correlation_length(t_A, QUARTER)
    assert xi == pytest.approx(-1.0 / math.log(math.sin(2 * t_A)), rel=1e-12)
    for L in (4, 8, 16):
        assert oned_q(t_A, QUARTER, L) == pytest.approx(math.exp(-L / xi), rel=1e-10)
    assert oned_correlation_length(QUARTER, QUARTER) == math.inf
    assert oned_correlation_length(0.0, QUARTER) == 0.0


def test_direct_sampling_agrees_with_closed_form():
    t = 0.17 * math.pi
    q, err = sample_chain_direct(t, t, 8, 20000, np.random.default_rng(31))
    assert err > 0
    assert abs(q - oned_q(t, t, 8)) < 4 * err


def test_direct_sampling_is_deterministic_on_nishimori_cut(rng):
    # every bond contributes sin^2(2 t_A) whatever its outcome
    t_A = 0.12 * math.pi
    q, err = sample_chain_direct(t_A, QUARTER, 8, 500, rng)
    assert q == pytest.approx(oned_q(t_A, QUARTER, 8), rel=1e-10)
    assert err == pytest.approx(0.0, abs=1e-12)


def test_direct_sampling_validates_input(rng):
    with pytest.raises(ParameterError):
        sample_chain_direct(0.1, QUARTER, 3, 100, rng)
    with pytest.raises(ParameterError):
        sample_chain_direct(0.1, QUARTER, 4, 1, rng)


# -- enumeration ----------------------------------------------------------------------

def test_probabilities_are_normalised(lieb2, nishimori_params):
    ensemble = enumerate_ensemble(lieb2, nishimori_params)
    assert ensemble.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(ensemble.probabilities >= 0)
    assert ensemble.configs.shape == (1 << lieb2.n_bonds, lieb2.n_bonds)
    assert ensemble.pair == (lieb2.pinned_corner, lieb2.central_site)


def test_outcome_reversal_symmetry_only_on_quarter_lines(lieb2):
    n = lieb2.n_bonds
    complement = np.arange(1 << n) ^ ((1 << n) - 1)
    on_line = enumerate_ensemble(lieb2, couplings_from_times(0.1 * math.pi, QUARTER)).probabilities
    np.testing.assert_allclose(on_line, on_line[complement], atol=1e-14)
    off_params = couplings_from_times(0.1 * math.pi, 0.2 * math.pi)
    off_line = enumerate_ensemble(lieb2, off_params).probabilities
    assert not np.allclose(off_line, off_line[complement], atol=1e-8)


def test_ea_limits(lieb2):
    assert exact_ea(lieb2, couplings_from_times(QUARTER, QUARTER)) == pytest.approx(1.0, abs=1e-12)
    assert exact_ea(lieb2, couplings_from_times(0.0, QUARTER)) == pytest.approx(0.0, abs=1e-12)


def test_ea_grows_along_nishimori_cut(lieb2):
    values = [exact_ea(lieb2, couplings_from_times(t, QUARTER))
              for t in (0.05 * math.pi, 0.1 * math.pi, 0.15 * math.pi, 0.2 * math.pi)]
    assert values == sorted(values)


def test_size_guard():
    with pytest.raises(OracleSizeError):
        enumerate_ensemble(build_lattice("lieb_square", 3), couplings_from_times(0.1, 0.2))


def test_ea_needs_planar_lattice(cube):
    with pytest.raises(ParameterError):
        exact_ea(cube, couplings_from_times(0.1, 0.2))


# -- premeasurement correlators ---------------------------------------------------------

@pytest.mark.parametrize("t_A,t_B", [(0.3, 0.5), (0.1 * math.pi, QUARTER), (0.4, 1.1)])
def test_premeasurement_checks_match_closed_forms(lieb2, t_A, t_B):
    params = couplings_from_times(t_A, t_B)
    path = designated_wilson_path(lieb2)[0]
    assert premeasurement_check(lieb2, params, "single_s") == pytest.approx(
        premeasurement_correlator(t_A, t_B, 1), abs=1e-12)
    assert premeasurement_check(lieb2, params, "plaquette") == pytest.approx(
        string_correlator(lieb2, t_A, t_B, lieb2.plaquettes[0]), abs=1e-12)
    assert premeasurement_check(lieb2, params, "string") == pytest.approx(
        string_correlator(lieb2, t_A, t_B, path), abs=1e-12)
    assert premeasurement_check(lieb2, params, "decorated_string") == pytest.approx(
        string_correlator(lieb2, t_A, t_B, path, decorated=True), abs=1e-12)


def test_premeasurement_on_heavy_hexagon(hex2):
    params = couplings_from_times(0.3, 0.6)
    face = hex2.plaquettes[0]
    assert premeasurement_check(hex2, params, "plaquette", face) == pytest.approx(
        string_correlator(hex2, 0.3, 0.6, face), abs=1e-12)


def test_premeasurement_rejects_bad_requests(lieb2, cube):
    params = couplings_from_times(0.1, 0.2)
    with pytest.raises(ParameterError):
        premeasurement_check(lieb2, params, "magnetization")
    with pytest.raises(ParameterError):
        premeasurement_check(cube, params, "plaquette")
    with pytest.raises(ParameterError):
        premeasurement_check(lieb2, params, "cube_product")
    with pytest.raises(ParameterError):
        premeasurement_check(lieb2, params, "string", [99])


@pytest.mark.parametrize("t_A,t_B", [(0.3, 0.5), (0.7, 0.2), (0.1 * math.pi, QUARTER)])
def test_cube_product(cube, t_A, t_B):
    params = couplings_from_times(t_A, t_B)
    assert premeasurement_check(cube, params, "cube_product") == pytest.approx(
        cube_correlator(t_A, t_B), abs=1e-10)
    assert premeasurement_check(cube, params, "single_s") == pytest.approx(
        premeasurement_correlator(t_A, t_B, 1), abs=1e-10)


def test_cube_product_on_nishimori_cut(cube):
    for t_A in np.linspace(0.02, QUARTER, 5):
        value = premeasurement_check(cube, couplings_from_times(t_A, QUARTER), "cube_product")
        assert value == pytest.approx(math.sin(2 * t_A) ** 6, abs=1e-10)


# -- identity checks ---------------------------------------------------------------------

@pytest.mark.parametrize("fraction", [0.05, 0.1, 0.15, 0.2])
def test_nishimori_identities_hold_on_line(lieb2, fraction):
    report = verify_nishimori(lieb2, fraction * math.pi)
    assert report.passed
    names = [check.name for check in report.checks]
    assert names == ["proportional_to_partition_function", "gauge_invariance", "ea_identity",
                     "linear_average_vanishes"]
    for check in report.checks:
        assert check.max_deviation <= 1e-10
    assert report.check("gauge_invariance").detail["group_size"] == 2 ** (lieb2.n_sites - 1)


def test_nishimori_identities_on_chain(chain4):
    assert verify_nishimori(chain4, 0.13 * math.pi).passed


def test_gauge_invariance_breaks_off_line(lieb2):
    report = verify_nishimori(lieb2, 0.1 * math.pi, math.pi / 5)
    assert not report.passed
    assert not report.check("gauge_invariance").passed
    with pytest.raises(VerificationError) as info:
        verify_nishimori(lieb2, 0.1 * math.pi, math.pi / 5, strict=True)
    assert info.value.report.context["t_B"] == pytest.approx(math.pi / 5)


def test_report_serialises(lieb2):
    data = verify_nishimori(lieb2, 0.1 * math.pi).to_dict()
    assert data["passed"] is True
    assert len(data["checks"]) == 4


def test_two_body_strong_limit(cube):
    report = two_body_strong_limit_check(cube)
    assert report.passed
    assert {check.name for check in report.checks} == {"plaquette_projector",
                                                       "flipped_two_term_ensemble"}


def test_two_body_ensemble_is_normalised(cube):
    ensemble = two_body_ensemble(cube, 0.3, 0.5)
    assert ensemble.probabilities.sum() == pytest.approx(1.0, abs=1e-12)


def test_two_body_protocol_needs_cubic_lattice(lieb2):
    with pytest.raises(ParameterError):
        two_body_strong_limit_check(lieb2)
