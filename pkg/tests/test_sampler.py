import math
import pickle

import numpy as np
import pytest
from scipy import stats

from measured_ising.core.exceptions import ChainFailedError, InsufficientDataError, SamplingError
from measured_ising.models.records import ChainSchedule
from measured_ising.services.analysis import disorder_average
from measured_ising.services.couplings import couplings_from_times
from measured_ising.services.lattice_builder import build_lattice, plaquette_products
from measured_ising.services.oracle import enumerate_ensemble, oned_q
from measured_ising.services.sampler import (
    ChainState,
    _accepts,
    chain_rng,
    estimate_ea,
    init_config,
    measure,
    metropolis_sweep,
    run_chain,
    summarize_chains,
)

QUARTER = math.pi / 4


def test_chain_rng_is_keyed():
    a = chain_rng(7, 1, 2).random(5)
    assert np.array_equal(a, chain_rng(7, 1, 2).random(5))
    assert not np.array_equal(a, chain_rng(7, 2, 2).random(5))
    assert not np.array_equal(a, chain_rng(7, 1, 3).random(5))


def test_init_modes(lieb2, rng):
    assert np.all(init_config(lieb2, "uniform_plus", rng) == 1)
    assert np.all(init_config(lieb2, "uniform_minus", rng) == -1)
    random = init_config(lieb2, "random", rng)
    assert set(np.unique(random)) <= {-1, 1}
    for _ in range(5):
        s = init_config(lieb2, "random_flux_free", rng)
        assert np.all(plaquette_products(lieb2, s) == 1)


def test_init_rejects_unknown_mode_and_gauge_lattice(lieb2, cube, rng):
    with pytest.raises(SamplingError):
        init_config(lieb2, "checkerboard", rng)
    with pytest.raises(SamplingError):
        init_config(cube, "uniform_plus", rng)


def test_sweep_rejects_unknown_proposal(lieb2, nishimori_params, rng):
    state = ChainState.create(lieb2, nishimori_params, np.ones(lieb2.n_bonds), rng)
    with pytest.raises(SamplingError):
        metropolis_sweep(state, "heatbath")


def test_raster_and_random_sweeps_keep_valid_outcomes(lieb2, rng):
    params = couplings_from_times(0.3, 0.5)
    state = ChainState.create(lieb2, params, init_config(lieb2, "random", rng), rng)
    for proposal in ("raster", "random", "raster"):
        accepted = metropolis_sweep(state, proposal)
        assert 0 <= accepted <= lieb2.n_bonds
        assert set(np.unique(state.s)) <= {-1, 1}
    assert state.sweep_count == 3
    values = measure(state)
    assert set(values) == {"m_c", "wilson_line", "mean_plaquette", "mean_s"}
    assert -1.0 <= values["m_c"] <= 1.0


def test_measure_after_raster_matches_fresh_contraction(lieb2, rng):
    params = couplings_from_times(0.12 * math.pi, QUARTER)
    state = ChainState.create(lieb2, params, init_config(lieb2, "random", rng), rng)
    metropolis_sweep(state, "raster")
    cached = measure(state)
    state.bottoms = None
    fresh = measure(state)
    for name in cached:
        assert cached[name] == pytest.approx(fresh[name], abs=1e-10)


def test_run_chain_records_schedule(lieb2, nishimori_params):
    schedule = ChainSchedule(n_sweeps=20, n_discard=4, thin=2, snapshot_every=2)
    record = run_chain(lieb2, nishimori_params, schedule, seed=3, chain_index=1, point_index=2)
    assert list(record.sweep_index) == list(range(4, 20, 2))
    assert len(record) == 8
    assert record.snapshots.shape == (4, lieb2.n_bonds)
    assert record.metadata["point_index"] == 2
    assert record.metadata["lattice"] == "lieb_square"
    assert len(record.metadata["final_s"]) == lieb2.n_bonds
    assert list(record.columns()) == ["sweep_index", "m_c", "wilson_line", "mean_plaquette",
                                      "mean_s", "acceptance_rate"]


def test_run_chain_is_deterministic(lieb2, nishimori_params):
    schedule = ChainSchedule(n_sweeps=15)
    first = run_chain(lieb2, nishimori_params, schedule, seed=11, chain_index=4)
    second = run_chain(lieb2, nishimori_params, schedule, seed=11, chain_index=4)
    other = run_chain(lieb2, nishimori_params, schedule, seed=11, chain_index=5)
    for name, series in first.columns().items():
        assert np.array_equal(series, second.columns()[name])
    assert first.metadata["final_s"] == second.metadata["final_s"]
    assert not np.array_equal(first.m_c, other.m_c)


@pytest.mark.parametrize("schedule", [
    ChainSchedule(n_sweeps=0),
    ChainSchedule(n_sweeps=10, n_discard=10),
    ChainSchedule(n_sweeps=10, thin=0),
    ChainSchedule(n_sweeps=10, proposal="sideways"),
])
def test_invalid_schedules(lieb2, nishimori_params, schedule):
    with pytest.raises(SamplingError):
        run_chain(lieb2, nishimori_params, schedule, seed=0)


def test_failed_chain_carries_index(cube, nishimori_params):
    with pytest.raises(ChainFailedError) as info:
        run_chain(cube, nishimori_params, ChainSchedule(n_sweeps=2), seed=0, chain_index=6)
    assert info.value.chain_index == 6
    restored = pickle.loads(pickle.dumps(info.value))
    assert restored.chain_index == 6


def test_ties_are_taken_half_the_time(chain4):
    # with no entanglement both outcomes weigh the same, so every proposal is a tie
    params = couplings_from_times(0.0, QUARTER)
    schedule = ChainSchedule(n_sweeps=200, init_mode="uniform_plus")
    record = run_chain(chain4, params, schedule, seed=1)
    assert 0.4 < record.acceptance_rate.mean() < 0.6
    # raster sweeps do not simply flip every bond back and forth
    assert len(set(record.mean_s.tolist())) > 2
    assert np.any(np.diff(record.mean_s) == 0.0)


def test_tie_acceptance_rule():
    assert _accepts(1.0, 0.49)
    assert not _accepts(1.0, 0.51)
    assert _accepts(1.0 + 1e-14, 0.49)
    assert not _accepts(1.0 - 1e-14, 0.51)
    assert _accepts(2.0, 0.99)
    assert _accepts(0.3, 0.29)
    assert not _accepts(0.3, 0.31)
    assert not _accepts(0.0, 0.0)


def test_strong_limit_stays_flux_free(lieb2):
    params = couplings_from_times(QUARTER, QUARTER)
    schedule = ChainSchedule(n_sweeps=5, init_mode="uniform_minus")
    record = run_chain(lieb2, params, schedule, seed=2)
    assert np.all(record.acceptance_rate == 0.0)
    np.testing.assert_allclose(record.m_c, 1.0, atol=1e-8)
    np.testing.assert_allclose(record.mean_plaquette, 1.0)


def test_summaries(lieb2, nishimori_params):
    schedule = ChainSchedule(n_sweeps=12)
    records = [run_chain(lieb2, nishimori_params, schedule, seed=5, chain_index=c)
               for c in range(3)]
    row = summarize_chains(records, lieb2, nishimori_params)
    for key in ("t_A", "t_B", "L", "q", "q_err", "m_c", "m_c_err", "mean_s", "mean_plaquette",
                "wilson_line", "acceptance", "max_discarded_weight", "max_bond_dim",
                "mean_s_exact", "mean_plaquette_exact", "wilson_line_exact", "q_exact"):
        assert key in row
    assert row["L"] == 2
    assert 0.0 <= row["q"] <= 1.0
    assert math.isnan(row["q_exact"])
    assert row["mean_s_exact"] == pytest.approx(0.0, abs=1e-12)
    assert estimate_ea(records)[0] == pytest.approx(row["q"])
    with pytest.raises(InsufficientDataError):
        estimate_ea(records[:1])


@pytest.mark.slow
def test_chain_on_nishimori_cut_matches_closed_form():
    graph = build_lattice("chain", 8)
    t_A = 0.12 * math.pi
    params = couplings_from_times(t_A, QUARTER)
    schedule = ChainSchedule(n_sweeps=2000, n_discard=100, proposal="random")
    records = [run_chain(graph, params, schedule, seed=17, chain_index=c) for c in range(4)]
    row = summarize_chains(records, graph, params)
    # the squared correlation is the same for every outcome here
    assert row["q"] == pytest.approx(oned_q(t_A, QUARTER, 8), rel=1e-8)
    assert row["q_exact"] == pytest.approx(math.sin(2 * t_A) ** 8, rel=1e-10)
    assert abs(row["m_c"]) < 4 * row["m_c_err"] + 1e-3
    assert abs(row["mean_s"]) < 4 * row["mean_s_err"] + 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("L", [4, 8, 16, 32])
def test_chain_on_diagonal_cut_matches_closed_form(L):
    graph = build_lattice("chain", L)
    t = 0.17 * math.pi
    params = couplings_from_times(t, t)
    schedule = ChainSchedule(n_sweeps=3000, n_discard=300)
    records = [run_chain(graph, params, schedule, seed=23, chain_index=c) for c in range(4)]
    row = summarize_chains(records, graph, params)
    assert abs(row["q"] - oned_q(t, t, L)) < 4 * row["q_err"]
    assert abs(row["mean_s"] - row["mean_s_exact"]) < 4 * row["mean_s_err"]


@pytest.mark.slow
def test_stationary_distribution_matches_enumeration(lieb1):
    params = couplings_from_times(0.3, 0.5)
    schedule = ChainSchedule(n_sweeps=3000, n_discard=100, thin=10, snapshot_every=1,
                             init_mode="random")
    ensemble = enumerate_ensemble(lieb1, params)
    counts = np.zeros(len(ensemble.probabilities))
    for c in range(8):
        record = run_chain(lieb1, params, schedule, seed=29, chain_index=c)
        for s in record.snapshots:
            counts[ensemble.index_of(s)] += 1
    probabilities = ensemble.probabilities
    expected = probabilities * counts.sum()
    _, p_value = stats.chisquare(counts, expected)
    assert p_value > 0.01
    assert 0.5 * np.abs(counts / counts.sum() - probabilities).sum() < 0.05


@pytest.mark.slow
def test_lieb_correlators_match_closed_forms():
    graph = build_lattice("lieb_square", 4)
    t_A = 0.12 * math.pi
    params = couplings_from_times(t_A, QUARTER)
    schedule = ChainSchedule(n_sweeps=600, n_discard=60)
    records = [run_chain(graph, params, schedule, seed=37, chain_index=c) for c in range(4)]
    row = summarize_chains(records, graph, params)
    assert row["mean_plaquette_exact"] == pytest.approx(math.sin(2 * t_A) ** 4, rel=1e-10)
    for name in ("mean_s", "mean_plaquette", "wilson_line"):
        assert abs(row[name] - row[f"{name}_exact"]) < 4 * row[f"{name}_err"] + 1e-3, name


def _disjoint_bonds(graph):
    first = graph.bonds[0]
    other = next(bond for bond in graph.bonds if not set(bond.sites) & set(first.sites))
    return first.index, other.index


def _pooled(records, statistic):
    return disorder_average([np.array([statistic(s) for s in r.snapshots]) for r in records])


@pytest.mark.slow
def test_stationary_distribution_on_lieb2(lieb2):
    # few outcomes carry most of the weight here, so 8e4 snapshots pin the law down
    params = couplings_from_times(0.15, 0.08)
    schedule = ChainSchedule(n_sweeps=10000, n_discard=100, snapshot_every=1, init_mode="random")
    ensemble = enumerate_ensemble(lieb2, params)
    counts = np.zeros(len(ensemble.probabilities))
    for c in range(8):
        record = run_chain(lieb2, params, schedule, seed=53, chain_index=c)
        for s in record.snapshots:
            counts[ensemble.index_of(s)] += 1
    distance = 0.5 * np.abs(counts / counts.sum() - ensemble.probabilities).sum()
    assert distance < 0.02


@pytest.mark.slow
def test_outcome_symmetries_on_the_nishimori_cut(lieb2):
    params = couplings_from_times(0.12 * math.pi, QUARTER)
    schedule = ChainSchedule(n_sweeps=3000, n_discard=100, snapshot_every=1, init_mode="random")
    records = [run_chain(lieb2, params, schedule, seed=59, chain_index=c) for c in range(8)]

    # s and -s are equally frequent
    mean, err = _pooled(records, lambda s: float(np.sign(s.sum())))
    assert err > 0.0
    assert abs(mean) < 4 * err

    # a gauge move at an endpoint of bond a flips s_a and leaves s_c alone
    a, c = _disjoint_bonds(lieb2)
    mean, err = _pooled(records, lambda s: float(s[a] * s[c]))
    assert err > 0.0
    assert abs(mean) < 4 * err


@pytest.mark.slow
def test_gauge_statistic_is_biased_off_the_nishimori_cut(lieb2):
    # [s] = cos 2t_A cos 2t_B is about 0.6 here, so distant bonds are positively correlated
    params = couplings_from_times(0.12 * math.pi, 0.1 * math.pi)
    a, c = _disjoint_bonds(lieb2)
    schedule = ChainSchedule(n_sweeps=2000, n_discard=100, snapshot_every=1, init_mode="random")
    records = [run_chain(lieb2, params, schedule, seed=67, chain_index=k) for k in range(4)]
    mean, err = _pooled(records, lambda s: float(s[a] * s[c]))
    assert mean > 4 * err


@pytest.mark.slow
def test_lieb6_correlators_match_closed_forms():
    graph = build_lattice("lieb_square", 6)
    t_A = 0.12 * math.pi
    params = couplings_from_times(t_A, QUARTER)
    schedule = ChainSchedule(n_sweeps=500, n_discard=50)
    records = [run_chain(graph, params, schedule, seed=71, chain_index=c) for c in range(4)]
    row = summarize_chains(records, graph, params)
    assert row["mean_plaquette_exact"] == pytest.approx(math.sin(2 * t_A) ** 4, rel=1e-10)
    for name in ("mean_s", "mean_plaquette", "wilson_line"):
        assert abs(row[name] - row[f"{name}_exact"]) < 4 * row[f"{name}_err"] + 1e-3, name


@pytest.mark.slow
def test_ea_order_separates_the_phases_on_lieb6():
    graph = build_lattice("lieb_square", 6)
    schedule = ChainSchedule(n_sweeps=300, n_discard=30)
    q = {}
    for point, t_A in enumerate((0.10 * math.pi, 0.20 * math.pi)):
        params = couplings_from_times(t_A, QUARTER)
        records = [run_chain(graph, params, schedule, seed=73, chain_index=c, point_index=point)
                   for c in range(4)]
        q[t_A], _ = estimate_ea(records)
    assert q[0.10 * math.pi] < 0.1
    assert q[0.20 * math.pi] > 0.5
