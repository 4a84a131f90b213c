"""
Metropolis sampling of measurement outcomes.

A sweep proposes one flip per bond. Acceptance ratios <W, B^{-s}> / <W, B^{s}> come from
bond environments of the contraction engine; in raster order the environments of a row
share one set of cached boundary states, so a sweep costs a few row contractions per row.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..core.exceptions import (
    ChainFailedError,
    InsufficientDataError,
    MeasuredIsingError,
    SamplingError,
)
from ..models.lattice import LatticeGraph
from ..models.params import CircuitParams
from ..models.records import ChainRecord, ChainSchedule
from .analysis import disorder_average
from .contraction import BondEnvironment, BoundaryState, ContractionSettings, TensorNetwork
from .couplings import premeasurement_correlator, string_correlator
from .lattice_builder import bond_endpoints, designated_wilson_path, plaquette_products
from .oracle import oned_q

logger = logging.getLogger(__name__)

INIT_MODES = ("uniform_plus", "uniform_minus", "random", "random_flux_free")
PROPOSALS = ("raster", "random")
# discarded singular weight above which a chain is flagged in the log
_DISCARDED_WARNING = 1e-6
# mean acceptance below which chains are likely stuck in one gauge valley
_TRAPPING_ACCEPTANCE = 0.01
# |log ratio| at or below this counts as a tie; symmetric under s <-> s'
_TIE_TOLERANCE = 1e-12


def chain_rng(seed: int, chain_index: int = 0, point_index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, chain index, point index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chain_index, point_index])))


def init_config(graph: LatticeGraph, mode: str, rng: np.random.Generator) -> np.ndarray:
    """Initial outcome configuration.

    ``random_flux_free`` draws a random sign per site and sets s_ij = tau_i tau_j, so every
    plaquette product is +1.
    """
    if graph.is_gauge_lattice:
        raise SamplingError(f"{graph.kind} lattices are not sampled")
    if mode == "uniform_plus":
        return np.ones(graph.n_bonds, dtype=np.int8)
    if mode == "uniform_minus":
        return -np.ones(graph.n_bonds, dtype=np.int8)
    if mode == "random":
        return (1 - 2 * rng.integers(0, 2, size=graph.n_bonds)).astype(np.int8)
    if mode == "random_flux_free":
        tau = 1 - 2 * rng.integers(0, 2, size=graph.n_sites)
        i, j = bond_endpoints(graph)
        return (tau[i] * tau[j]).astype(np.int8)
    raise SamplingError(f"Unknown init mode '{mode}'. Available: {', '.join(INIT_MODES)}")


@dataclass
class ChainState:
    network: TensorNetwork
    rng: np.random.Generator
    sweep_count: int = 0
    # bottom boundary states of the last raster sweep, valid until the next flip
    bottoms: Optional[List[BoundaryState]] = None

    @classmethod
    def create(cls, graph: LatticeGraph, params: CircuitParams, s: Sequence[int],
               rng: np.random.Generator, settings: Optional[ContractionSettings] = None) -> "ChainState":
        return cls(TensorNetwork(graph, params, s, settings, pinned=True), rng)

    @property
    def s(self) -> np.ndarray:
        return self.network.s

    @property
    def graph(self) -> LatticeGraph:
        return self.network.graph


def _accepts(ratio: float, u: float) -> bool:
    """Metropolis test with lazy ties: a flip with ratio 1 is taken with probability 1/2."""
    if ratio > 0.0 and abs(math.log(ratio)) <= _TIE_TOLERANCE:
        return u < 0.5
    return u < ratio


def _propose(state: ChainState, bond: int, environment: BondEnvironment) -> bool:
    network = state.network
    current = int(network.s[bond])
    ratio = environment.flip_ratio(network.bond_matrix(bond), network.params.bond_matrix(-current))
    if _accepts(ratio, state.rng.random()):
        network.set_bond(bond, -current)
        return True
    return False


def _raster_sweep(state: ChainState) -> int:
    network = state.network
    rows = network.graph.rows
    tops = network.top_stack()
    below = network.boundary()
    bottoms = []
    accepted = 0
    for r in range(network.n_rows):
        above = tops[r + 1]
        if rows[r].horizontal_bonds:
            sweeper = network.row_sweeper(r, below, above)
            for c in range(network.width - 1):
                bond = network.horizontal_bond(r, c)
                if bond is not None:
                    accepted += _propose(state, bond, sweeper.environment(c))
                sweeper.advance(c)
        below = network.apply_row(below, r, "up")
        bottoms.append(below)
        if r + 1 < network.n_rows and rows[r].vertical_bonds:
            rungs = network.rung_sweeper(r, below, above)
            for c in range(network.width):
                bond = network.vertical_bond(r, c)
                if bond is not None:
                    accepted += _propose(state, bond, rungs.environment(c))
                if c < network.width - 1:
                    rungs.advance(c)
    state.bottoms = bottoms
    return accepted


def _random_sweep(state: ChainState) -> int:
    network = state.network
    accepted = 0
    for _ in range(network.graph.n_bonds):
        bond = int(state.rng.integers(network.graph.n_bonds))
        accepted += _propose(state, bond, network.bond_environment(bond))
    state.bottoms = None
    return accepted


def metropolis_sweep(state: ChainState, proposal: str = "raster") -> int:
    """One sweep of n_bonds single-flip proposals; returns the number accepted.

    Every proposal draws one uniform number. Ties (ratio 1) are accepted with probability
    1/2, so sweeps stay aperiodic where every ratio is 1 (t_A = 0 at t_B = pi/4, or a
    chain on the Nishimori cut).
    """
    if proposal == "raster":
        accepted = _raster_sweep(state)
    elif proposal == "random":
        accepted = _random_sweep(state)
    else:
        raise SamplingError(f"Unknown proposal '{proposal}'. Available: {', '.join(PROPOSALS)}")
    state.sweep_count += 1
    return accepted


def measure(state: ChainState) -> Dict[str, float]:
    """Observables of the current configuration."""
    network = state.network
    graph = network.graph
    center_row = graph.sites[graph.central_site].row
    below = None
    if state.bottoms is not None and center_row > 0:
        below = state.bottoms[center_row - 1]
    m_c, wilson = network.central_observables(below)
    plaquettes = plaquette_products(graph, network.s)
    return {
        "m_c": m_c,
        "wilson_line": wilson,
        "mean_plaquette": float(plaquettes.mean()) if len(plaquettes) else math.nan,
        "mean_s": float(network.s.mean()),
    }


def _validate_schedule(schedule: ChainSchedule):
    if schedule.n_sweeps < 1:
        raise SamplingError(f"n_sweeps must be positive, got {schedule.n_sweeps}")
    if not 0 <= schedule.n_discard < schedule.n_sweeps:
        raise SamplingError(
            f"n_discard must lie in [0, n_sweeps), got {schedule.n_discard} of {schedule.n_sweeps}")
    if schedule.thin < 1:
        raise SamplingError(f"thin must be at least 1, got {schedule.thin}")
    if schedule.proposal not in PROPOSALS:
        raise SamplingError(f"Unknown proposal '{schedule.proposal}'")


def run_chain(graph: LatticeGraph, params: CircuitParams, schedule: ChainSchedule, seed: int,
              chain_index: int = 0, point_index: int = 0,
              settings: Optional[ContractionSettings] = None) -> ChainRecord:
    """Run one Markov chain and record observables on every retained sweep.

    Deterministic given (seed, chain_index, point_index). Any failure is raised as
    ChainFailedError carrying the chain index.
    """
    _validate_schedule(schedule)
    rng = chain_rng(seed, chain_index, point_index)
    series: Dict[str, List[float]] = {
        "sweep_index": [], "m_c": [], "wilson_line": [], "mean_plaquette": [], "mean_s": [],
        "acceptance_rate": [],
    }
    snapshots = []
    logger.info(f"Chain {chain_index} (point {point_index}): {schedule.n_sweeps} sweeps on "
                f"{graph.kind} {graph.extents} at t_A={params.t_A:.6f}, t_B={params.t_B:.6f}")
    try:
        state = ChainState.create(graph, params, init_config(graph, schedule.init_mode, rng), rng,
                                  settings)
        for sweep in range(schedule.n_sweeps):
            accepted = metropolis_sweep(state, schedule.proposal)
            acceptance = accepted / graph.n_bonds
            logger.debug(f"Chain {chain_index} sweep {sweep}: acceptance {acceptance:.3f}")
            if sweep < schedule.n_discard or (sweep - schedule.n_discard) % schedule.thin:
                continue
            values = measure(state)
            series["sweep_index"].append(sweep)
            series["acceptance_rate"].append(acceptance)
            for name, value in values.items():
                series[name].append(value)
            if schedule.snapshot_every and len(series["sweep_index"]) % schedule.snapshot_every == 0:
                snapshots.append(state.s.copy())
    except MeasuredIsingError as e:
        logger.error(f"Chain {chain_index} failed: {e}")
        raise ChainFailedError(chain_index, str(e)) from e
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        logger.error(f"Chain {chain_index} failed in linear algebra: {e}")
        raise ChainFailedError(chain_index, str(e)) from e

    network = state.network
    if network.max_discarded > _DISCARDED_WARNING:
        logger.warning(f"Chain {chain_index}: truncation discarded up to {network.max_discarded:.2e} "
                       f"of the singular weight; consider a larger chi_max")
    record = ChainRecord(
        chain_index=chain_index,
        seed=seed,
        sweep_index=np.array(series["sweep_index"], dtype=np.int64),
        m_c=np.array(series["m_c"]),
        wilson_line=np.array(series["wilson_line"]),
        mean_plaquette=np.array(series["mean_plaquette"]),
        mean_s=np.array(series["mean_s"]),
        acceptance_rate=np.array(series["acceptance_rate"]),
        snapshots=np.array(snapshots, dtype=np.int8) if snapshots else None,
        max_discarded_weight=network.max_discarded,
        max_bond_dim=network.max_bond_dim,
        metadata={"point_index": point_index, "lattice": graph.kind,
                  "extents": list(graph.extents), "t_A": params.t_A, "t_B": params.t_B,
                  "final_s": network.s.tolist()},
    )
    logger.info(f"Chain {chain_index} done: mean acceptance {record.acceptance_rate.mean():.3f}, "
                f"max bond dimension {record.max_bond_dim}")
    return record


def _check_consistent(records: Sequence[ChainRecord]):
    if len(records) < 2:
        raise InsufficientDataError(f"Need at least 2 chains, got {len(records)}")
    keys = {(r.metadata.get("lattice"), tuple(r.metadata.get("extents", ()))) for r in records}
    if len(keys) > 1:
        raise SamplingError(f"Chains come from different lattices: {sorted(keys)}")


def estimate_ea(records: Sequence[ChainRecord]):
    """(q, stderr) for q = [<sigma_0 sigma_c>^2] from the per-sweep m_c^2 of every chain."""
    _check_consistent(records)
    return disorder_average([r.m_c ** 2 for r in records])


def summarize_chains(records: Sequence[ChainRecord], graph: LatticeGraph,
                     params: CircuitParams) -> Dict[str, Any]:
    """One aggregated row: sampled averages with errors, then closed-form references."""
    _check_consistent(records)
    q, q_err = estimate_ea(records)
    row: Dict[str, Any] = {
        "t_A": params.t_A,
        "t_B": params.t_B,
        "L": graph.extents[0],
        "q": q,
        "q_err": q_err,
    }
    for name in ("m_c", "mean_s", "mean_plaquette", "wilson_line"):
        chains = [getattr(r, name) for r in records]
        if all(np.all(np.isnan(c)) for c in chains):
            row[name], row[f"{name}_err"] = math.nan, math.nan
        else:
            row[name], row[f"{name}_err"] = disorder_average(chains)
    row["acceptance"] = float(np.mean(np.concatenate([r.acceptance_rate for r in records])))
    if row["acceptance"] < _TRAPPING_ACCEPTANCE:
        logger.warning(f"Mean acceptance {row['acceptance']:.4f} at t_A={params.t_A:.6f}: chains may be "
                       f"trapped in one gauge valley; gauge-dependent observables can differ between chains")
    row["max_discarded_weight"] = max(r.max_discarded_weight for r in records)
    row["max_bond_dim"] = max(r.max_bond_dim for r in records)

    row["mean_s_exact"] = premeasurement_correlator(params.t_A, params.t_B, 1)
    if graph.plaquettes:
        row["mean_plaquette_exact"] = string_correlator(graph, params.t_A, params.t_B,
                                                        graph.plaquettes[0])
    else:
        row["mean_plaquette_exact"] = math.nan
    path = designated_wilson_path(graph)[0]
    row["wilson_line_exact"] = string_correlator(graph, params.t_A, params.t_B, path, decorated=True)
    if graph.kind == "chain" and graph.extents[0] % 2 == 0:
        row["q_exact"] = oned_q(params.t_A, params.t_B, graph.extents[0])
    else:
        row["q_exact"] = math.nan
    return row
