import math

import numpy as np
import pytest
from scipy.signal import lfilter

from measured_ising.core.exceptions import AnalysisError, InsufficientDataError
from measured_ising.services.analysis import (
    binning_error,
    binning_levels,
    collapse_fit,
    collapse_quality,
    crossing_side,
    disorder_average,
    rescale,
)

T_C = 0.15 * math.pi
NU = 1.3
BETA_OVER_NU = 0.25
SIZES = (6, 8, 12, 16, 24)


def _ar1(phi, n, seed):
    noise = np.random.default_rng(seed).standard_normal(n)
    return lfilter([1.0], [1.0, -phi], noise)


def _synthetic_datasets(noise=0.01, seed=41):
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.1 * math.pi, 0.2 * math.pi, 11)
    datasets = {}
    for L in SIZES:
        x = (grid - T_C) * L ** (1.0 / NU)
        q = L ** -BETA_OVER_NU * (0.6 + 0.5 * np.tanh(x))
        err = noise * q
        noisy = q + err * rng.standard_normal(len(q))
        datasets[L] = list(zip(grid, noisy, err))
    return datasets


def test_uncorrelated_series():
    result = binning_error(np.random.default_rng(1).standard_normal(1 << 16))
    assert result.tau_int == pytest.approx(0.5, rel=0.25)
    assert result.stderr == pytest.approx(1.0 / math.sqrt(1 << 16), rel=0.2)
    # blocks of 8 already cover twelve times tau = 1/2
    assert result.plateau_level == 3


@pytest.mark.parametrize("phi", [0.5, 0.8, 0.9])
def test_autoregressive_series(phi):
    series = _ar1(phi, 1 << 17, seed=2)
    result = binning_error(series)
    assert result.tau_int == pytest.approx(0.5 * (1 + phi) / (1 - phi), rel=0.25)
    levels = result.level_errors[:4]
    assert all(b > a for a, b in zip(levels, levels[1:]))


def test_plateau_starts_later_for_longer_correlations():
    short = binning_error(_ar1(0.5, 1 << 16, seed=4))
    long = binning_error(_ar1(0.95, 1 << 16, seed=4))
    assert long.plateau_level > short.plateau_level
    assert long.tau_int > short.tau_int


def test_short_series_uses_the_first_level():
    data = np.random.default_rng(6).standard_normal(10)
    result = binning_error(data)
    assert result.plateau_level == 0
    assert result.stderr == pytest.approx(np.std(data, ddof=1) / math.sqrt(10))


def test_binning_levels_halve_the_series():
    errors = binning_levels(np.arange(16, dtype=float))
    assert len(errors) == 4
    errors = binning_levels(np.arange(17, dtype=float))
    assert len(errors) == 4


def test_constant_series():
    result = binning_error(np.full(64, 0.3))
    assert result.mean == pytest.approx(0.3)
    assert result.stderr == 0.0
    assert result.tau_int == 0.5


def test_binning_rejects_bad_series():
    with pytest.raises(InsufficientDataError):
        binning_error([1.0, 2.0, 3.0])
    with pytest.raises(AnalysisError):
        binning_error([1.0] * 10 + [math.nan])
    with pytest.raises(AnalysisError):
        binning_error(np.ones((4, 4)))


def test_disorder_average():
    rng = np.random.default_rng(3)
    chains = [rng.normal(0.4, 0.1, size=n) for n in (400, 500, 600)]
    mean, err = disorder_average(chains)
    pooled = np.concatenate(chains)
    assert mean == pytest.approx(pooled.mean(), abs=1e-12)
    assert 0 < err < 0.05
    assert abs(mean - 0.4) < 5 * err


def test_disorder_average_discards_prefix():
    chains = [np.r_[np.full(10, 100.0), np.full(20, value)] for value in (1.0, 3.0)]
    mean, err = disorder_average(chains, discard=10)
    assert mean == pytest.approx(2.0)
    assert err == pytest.approx(1.0)


def test_disorder_average_needs_two_chains():
    with pytest.raises(InsufficientDataError):
        disorder_average([[1.0, 2.0, 3.0]])
    with pytest.raises(InsufficientDataError):
        disorder_average([[1.0], [2.0]], discard=1)


def test_quality_is_smallest_at_true_parameters():
    datasets = _synthetic_datasets(noise=0.01)
    best = collapse_quality((T_C, 1.0 / NU, BETA_OVER_NU), datasets)
    worse = collapse_quality((T_C + 0.01 * math.pi, 1.0 / NU, BETA_OVER_NU), datasets)
    assert best < worse


def test_collapse_recovers_synthetic_exponents():
    datasets = _synthetic_datasets()
    fit = collapse_fit(datasets, (0.1 * math.pi, 0.2 * math.pi), init=(0.15 * math.pi, 1.4, 0.3))
    assert abs(fit.t_c - T_C) < 0.002 * math.pi
    assert fit.nu == pytest.approx(NU, rel=0.1)
    assert fit.beta_over_nu == pytest.approx(BETA_OVER_NU, rel=0.1)
    assert fit.sizes == list(SIZES)
    assert fit.n_points == len(SIZES) * 11


def test_quality_ignores_dataset_order():
    datasets = _synthetic_datasets()
    params = (T_C + 0.003 * math.pi, 0.8, 0.3)
    reordered = {L: list(reversed(datasets[L])) for L in reversed(SIZES)}
    assert collapse_quality(params, reordered) == pytest.approx(
        collapse_quality(params, datasets), rel=1e-12)


def test_quality_follows_a_shift_in_t():
    datasets = _synthetic_datasets()
    shift = 0.37
    shifted = {L: [(t + shift, q, e) for t, q, e in points] for L, points in datasets.items()}
    for t_c in (T_C, T_C - 0.01 * math.pi):
        original = collapse_quality((t_c, 1.0 / NU, BETA_OVER_NU), datasets)
        moved = collapse_quality((t_c + shift, 1.0 / NU, BETA_OVER_NU), shifted)
        assert moved == pytest.approx(original, rel=1e-8)


def test_collapse_fit_is_reproducible():
    window = (0.1 * math.pi, 0.2 * math.pi)
    init = (0.15 * math.pi, 1.4, 0.3)
    first = collapse_fit(_synthetic_datasets(seed=7), window, init=init)
    second = collapse_fit(_synthetic_datasets(seed=7), window, init=init)
    assert first.to_dict() == second.to_dict()


def test_collapse_needs_several_sizes():
    datasets = _synthetic_datasets()
    with pytest.raises(InsufficientDataError):
        collapse_fit({8: datasets[8]}, (0.1 * math.pi, 0.2 * math.pi))
    with pytest.raises(AnalysisError):
        collapse_fit(datasets, (0.2, 0.1))
    with pytest.raises(AnalysisError):
        collapse_fit(datasets, (0.1 * math.pi, 0.2 * math.pi), init=(0.15 * math.pi, -1.0, 0.2))


def test_rescale_rows():
    datasets = _synthetic_datasets(noise=0.0)
    fit = collapse_fit(datasets, (0.1 * math.pi, 0.2 * math.pi), init=(T_C, NU, BETA_OVER_NU))
    rows = rescale(datasets, fit)
    assert len(rows) == len(SIZES) * 11
    assert set(rows[0]) == {"L", "t", "q", "x", "y", "y_err"}
    for row in rows:
        assert row["y"] == pytest.approx(row["q"] * row["L"] ** fit.beta_over_nu)


def test_crossing_side():
    datasets = _synthetic_datasets(noise=0.0)
    assert crossing_side(datasets) == (-1, -1)
    scaled = {L: [(t, q * L ** BETA_OVER_NU, e) for t, q, e in points]
              for L, points in datasets.items()}
    assert crossing_side(scaled) == (-1, 1)
    with pytest.raises(InsufficientDataError):
        crossing_side({8: datasets[8]})
