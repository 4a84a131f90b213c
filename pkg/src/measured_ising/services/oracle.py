"""
Exact results for small systems and closed forms for the chain.

Enumeration sums the measurement ensemble over every spin and outcome configuration.
Planar lattices carry their spins on sites and their outcomes on bonds; the cubic gauge
lattice carries spins on edges and outcomes on plaquettes, each plaquette weighing the
product of its four edge spins.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import OracleSizeError, ParameterError, VerificationError
from ..models.lattice import LatticeGraph
from ..models.params import CircuitParams
from ..models.records import CheckResult, ExactEnsemble, VerificationReport
from .couplings import bond_matrices, couplings_from_times, nishimori_params
from .lattice_builder import designated_wilson_path, path_endpoints

logger = logging.getLogger(__name__)

MAX_ORACLE_SPINS = 24
OBSERVABLES = ("single_s", "string", "plaquette", "decorated_string", "cube_product")
# entries per block of the (outcome, spin) weight table
_BLOCK_ELEMENTS = 1 << 20
_TOLERANCE = 1e-10


@dataclass(frozen=True)
class _Structure:
    n_vars: int
    terms: Tuple[Tuple[int, ...], ...]
    pair: Optional[Tuple[int, int]]


def _structure(graph: LatticeGraph, pair: Optional[Tuple[int, int]] = None) -> _Structure:
    if graph.total_spins > MAX_ORACLE_SPINS:
        raise OracleSizeError(
            f"{graph.kind} {graph.extents} has {graph.total_spins} spins; enumeration is limited "
            f"to {MAX_ORACLE_SPINS}")
    if graph.is_gauge_lattice:
        return _Structure(graph.n_bonds, tuple(tuple(p) for p in graph.plaquettes), pair)
    if pair is None:
        pair = (graph.pinned_corner, graph.central_site)
    return _Structure(graph.n_sites, tuple(b.sites for b in graph.bonds), pair)


def _configs(n: int) -> np.ndarray:
    """All 2^n configurations of n +-1 variables; row k has entry v = 1 - 2 * bit_v(k)."""
    k = np.arange(1 << n, dtype=np.int64)
    bits = (k[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def _term_products(structure: _Structure, sigma: np.ndarray) -> np.ndarray:
    """(n_terms, n_sigma) product of each term's spins."""
    return np.array([np.prod(sigma[:, list(term)], axis=1) for term in structure.terms],
                    dtype=float).reshape(len(structure.terms), len(sigma))


def _two_term_tables(products: np.ndarray, params: CircuitParams):
    plus, minus = params.bond_matrix_plus, params.bond_matrix_minus
    f_plus = np.where(products > 0, plus[0, 0], plus[0, 1])
    f_minus = np.where(products > 0, minus[0, 0], minus[0, 1])
    return f_plus, f_minus


def _rbim_tables(products: np.ndarray, beta: float):
    """Normalised random-bond Ising weights exp(-beta s O) / (2 cosh beta) for s = +1, -1."""
    if math.isinf(beta) or beta > 50.0:
        tanh = 1.0 if math.isinf(beta) else math.tanh(beta)
        return (1.0 - products * tanh) / 2.0, (1.0 + products * tanh) / 2.0
    norm = 2.0 * math.cosh(beta)
    return np.exp(-beta * products) / norm, np.exp(beta * products) / norm


def _two_body_tables(structure: _Structure, sigma: np.ndarray, t_A: float, t_B: float):
    """|M_+|^2 = cos^2(theta) and |M_-|^2 = sin^2(theta), theta = t_A(l + u) + t_B(r + d)."""
    theta = np.array([
        t_A * (sigma[:, l] + sigma[:, u]) + t_B * (sigma[:, r] + sigma[:, d])
        for l, u, r, d in structure.terms
    ], dtype=float)
    return np.cos(theta) ** 2, np.sin(theta) ** 2


def _contract(f_plus: np.ndarray, f_minus: np.ndarray, insertion: Optional[np.ndarray] = None):
    """Z_s = sum_sigma prod_t f^{s_t}(sigma) for every outcome configuration s, and the
    insertion-weighted sums when an insertion vector is given."""
    n_terms, n_sigma = f_plus.shape
    n_outcomes = 1 << n_terms
    block = max(1, _BLOCK_ELEMENTS // n_sigma)
    z = np.empty(n_outcomes)
    numerators = np.empty(n_outcomes) if insertion is not None else None
    shifts = np.arange(n_terms, dtype=np.int64)
    for start in range(0, n_outcomes, block):
        k = np.arange(start, min(start + block, n_outcomes), dtype=np.int64)
        minus = ((k[:, None] >> shifts) & 1).astype(bool)
        weights = np.ones((len(k), n_sigma))
        for t in range(n_terms):
            weights *= np.where(minus[:, t, None], f_minus[t][None, :], f_plus[t][None, :])
        z[k] = weights.sum(axis=1)
        if insertion is not None:
            numerators[k] = weights @ insertion
    return z, numerators


def _ratio(numerators: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.divide(numerators, z, out=np.zeros_like(z), where=z > 0)


def _ensemble(structure: _Structure, f_plus, f_minus, sigma) -> ExactEnsemble:
    insertion = None
    if structure.pair is not None:
        a, b = structure.pair
        insertion = (sigma[:, a] * sigma[:, b]).astype(float)
    z, numerators = _contract(f_plus, f_minus, insertion)
    probabilities = z * 0.5 ** structure.n_vars
    total = float(probabilities.sum())
    if abs(total - 1.0) > 1e-9:
        logger.warning(f"Enumerated probabilities sum to {total:.12f}")
    return ExactEnsemble(
        configs=_configs(len(structure.terms)),
        probabilities=probabilities,
        partition_functions=z,
        correlators=_ratio(numerators, z) if numerators is not None else None,
        pair=structure.pair,
    )


def enumerate_ensemble(graph: LatticeGraph, params: CircuitParams,
                       pair: Optional[Tuple[int, int]] = None) -> ExactEnsemble:
    """Every outcome configuration with its Born probability and <sigma_a sigma_b>_s.

    The pair defaults to (pinned corner, central site) on planar lattices.
    """
    structure = _structure(graph, pair)
    sigma = _configs(structure.n_vars)
    f_plus, f_minus = _two_term_tables(_term_products(structure, sigma), params)
    logger.debug(f"Enumerating {graph.kind} {graph.extents}: 2^{len(structure.terms)} outcomes x "
                 f"2^{structure.n_vars} spin configurations")
    return _ensemble(structure, f_plus, f_minus, sigma)


def two_body_ensemble(graph: LatticeGraph, t_A: float, t_B: float) -> ExactEnsemble:
    """The cubic lattice ensemble when each plaquette ancilla couples to its four edges by
    separate two-body evolutions."""
    if not graph.is_gauge_lattice:
        raise ParameterError("The two-body plaquette protocol is defined on the cubic lattice only")
    structure = _structure(graph)
    sigma = _configs(structure.n_vars)
    f_plus, f_minus = _two_body_tables(structure, sigma, t_A, t_B)
    return _ensemble(structure, f_plus, f_minus, sigma)


def exact_ea(graph: LatticeGraph, params: CircuitParams) -> float:
    """q = sum_s p_s <sigma_0 sigma_c>_s^2."""
    if graph.is_gauge_lattice:
        raise ParameterError("The two-point EA order parameter is defined on planar lattices only")
    ensemble = enumerate_ensemble(graph, params)
    return float(np.sum(ensemble.probabilities * ensemble.correlators ** 2))


# -- chain closed forms --------------------------------------------------------------

def oned_bond_prob(t_A: float, t_B: float) -> float:
    """Probability of s = +1 for one bond of the chain (bonds are independent)."""
    return 0.5 * (1.0 + math.cos(2 * t_A) * math.cos(2 * t_B))


def _oned_ratio(t_A: float, t_B: float) -> float:
    c = math.cos(2 * t_A) * math.cos(2 * t_B)
    s = math.sin(2 * t_A) * math.sin(2 * t_B)
    denominator = 1.0 - c * c
    if denominator <= 1e-15:
        return 0.0
    return min(1.0, s * s / denominator)


def oned_q(t_A: float, t_B: float, L: int) -> float:
    """EA order parameter between the end and the centre of a chain of L bonds."""
    if L < 0 or L % 2:
        raise ParameterError(f"The chain closed form needs an even number of bonds, got {L}")
    return _oned_ratio(t_A, t_B) ** (L // 2)


def oned_correlation_length(t_A: float, t_B: float) -> float:
    """xi with q = exp(-L / xi)."""
    ratio = _oned_ratio(t_A, t_B)
    if ratio <= 0.0:
        return 0.0
    if ratio >= 1.0:
        return math.inf
    return -2.0 / math.log(ratio)


def sample_chain_direct(t_A: float, t_B: float, L: int, n_samples: int,
                        rng: np.random.Generator) -> Tuple[float, float]:
    """(q, stderr) from independent outcome draws on the chain.

    Each draw picks the L/2 bonds between the end and the centre independently and
    multiplies their squared bond correlations.
    """
    if L < 0 or L % 2:
        raise ParameterError(f"Direct chain sampling needs an even number of bonds, got {L}")
    if n_samples < 2:
        raise ParameterError(f"Need at least 2 samples, got {n_samples}")
    plus, minus = bond_matrices(t_A, t_B)

    def correlation(matrix: np.ndarray) -> float:
        total = matrix[0, 0] + matrix[0, 1]
        return float((matrix[0, 0] - matrix[0, 1]) / total) if total > 0 else 0.0

    r_plus, r_minus = correlation(plus), correlation(minus)
    outcomes_plus = rng.random((n_samples, L // 2)) < oned_bond_prob(t_A, t_B)
    values = np.where(outcomes_plus, r_plus ** 2, r_minus ** 2).prod(axis=1)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n_samples))


# -- premeasurement correlators -----------------------------------------------------------

def premeasurement_check(graph: LatticeGraph, params: CircuitParams, observable: str,
                         bonds: Optional[Sequence[int]] = None) -> float:
    """<psi| prod s^x (sigma^z_a sigma^z_b) |psi> by enumeration.

    Defaults: the first bond (single_s), the designated central-row path (string,
    decorated_string), the first plaquette (plaquette) or the first cube (cube_product).
    On the cubic lattice outcome indices are plaquette indices.
    """
    if observable not in OBSERVABLES:
        raise ParameterError(f"Unknown observable '{observable}'. Available: {', '.join(OBSERVABLES)}")
    planar_only = ("string", "plaquette", "decorated_string")
    if observable in planar_only and graph.is_gauge_lattice:
        raise ParameterError(f"'{observable}' is defined on planar lattices only")
    if observable == "cube_product" and not graph.cubes:
        raise ParameterError("'cube_product' needs a lattice with cubes")

    if bonds is None:
        if observable == "single_s":
            bonds = [0]
        elif observable == "plaquette":
            if not graph.plaquettes:
                raise ParameterError(f"{graph.kind} {graph.extents} has no plaquettes")
            bonds = graph.plaquettes[0]
        elif observable == "cube_product":
            bonds = graph.cubes[0]
        else:
            bonds = designated_wilson_path(graph)[0]
    bonds = [int(b) for b in bonds]
    n_outcomes = graph.n_plaquettes if graph.is_gauge_lattice else graph.n_bonds
    if any(not 0 <= b < n_outcomes for b in bonds):
        raise ParameterError(f"Outcome indices out of range: {bonds}")

    pair = None
    if observable == "decorated_string":
        ends = path_endpoints(graph, bonds)
        if len(ends) != 2:
            raise ParameterError("A decorated string needs an open path with two endpoints")
        pair = (ends[0], ends[1])
    ensemble = enumerate_ensemble(graph, params, pair)
    product = np.prod(ensemble.configs[:, bonds].astype(float), axis=1) if bonds else 1.0
    weights = ensemble.probabilities * product
    if observable == "decorated_string":
        weights = weights * ensemble.correlators
    return float(np.sum(weights))


# -- identity checks -------------------------------------------------------------------

def _gauge_group(structure: _Structure) -> np.ndarray:
    """All outcome bit masks reachable by products of single-variable gauge flips."""
    generators = set()
    for v in range(structure.n_vars):
        mask = 0
        for t, term in enumerate(structure.terms):
            if term.count(v) % 2:
                mask |= 1 << t
        if mask:
            generators.add(mask)
    seen, queue = {0}, deque([0])
    while queue:
        element = queue.popleft()
        for mask in generators:
            other = element ^ mask
            if other not in seen:
                seen.add(other)
                queue.append(other)
    return np.array(sorted(seen), dtype=np.int64)


def _orbit_spread(probabilities: np.ndarray, group: np.ndarray) -> Tuple[float, int]:
    k = np.arange(len(probabilities), dtype=np.int64)
    labels = k.copy()
    for element in group:
        np.minimum(labels, k ^ element, out=labels)
    highest = np.full(len(probabilities), -np.inf)
    lowest = np.full(len(probabilities), np.inf)
    np.maximum.at(highest, labels, probabilities)
    np.minimum.at(lowest, labels, probabilities)
    orbits = np.unique(labels)
    top, bottom = highest[orbits], lowest[orbits]
    spread = np.divide(top - bottom, top, out=np.zeros_like(top), where=top > 0)
    return float(spread.max()), len(orbits)


def verify_nishimori(graph: LatticeGraph, t_A: float, t_B: float = math.pi / 4,
                     strict: bool = False) -> VerificationReport:
    """Check the Nishimori-line identities by enumeration.

    (a) p_s / Z_s is the same for every outcome, with Z_s the random-bond Ising partition
        function at beta = ln|tan(t_A + pi/4)|;
    (b) p_s is constant on every gauge orbit;
    (c) [<sigma_0 sigma_c>^2] equals [<sigma_0 sigma_c>]' under independent bond disorder
        with P(s = +1) = p_flip;
    (d) the linear average [<sigma_0 sigma_c>] vanishes.
    Checks (c) and (d) apply to planar lattices. Passing t_B away from pi/4 shows the
    identities failing.
    """
    nishimori = nishimori_params(t_A)
    params = couplings_from_times(t_A, t_B)
    structure = _structure(graph)
    sigma = _configs(structure.n_vars)
    products = _term_products(structure, sigma)
    insertion = None
    if structure.pair is not None:
        a, b = structure.pair
        insertion = (sigma[:, a] * sigma[:, b]).astype(float)

    z, numerators = _contract(*_two_term_tables(products, params), insertion)
    probabilities = z * 0.5 ** structure.n_vars
    z_rbim, numerators_rbim = _contract(*_rbim_tables(products, nishimori.beta), insertion)

    report = VerificationReport(context={
        "lattice": graph.kind,
        "extents": list(graph.extents),
        "t_A": float(t_A),
        "t_B": float(t_B),
        "beta": nishimori.beta,
        "p_flip": nishimori.p_flip,
    })

    support = z_rbim > 0
    ratios = probabilities[support] / z_rbim[support]
    deviation = float((ratios.max() - ratios.min()) / ratios.mean()) if ratios.mean() > 0 else 0.0
    if not np.all(support):
        deviation = max(deviation, float(probabilities[~support].max() / probabilities.max()))
    report.checks.append(CheckResult("proportional_to_partition_function", deviation,
                                     deviation <= _TOLERANCE,
                                     {"ratio": float(ratios.mean())}))

    group = _gauge_group(structure)
    deviation, n_orbits = _orbit_spread(probabilities, group)
    report.checks.append(CheckResult("gauge_invariance", deviation, deviation <= _TOLERANCE,
                                     {"group_size": int(len(group)), "orbits": n_orbits}))

    if insertion is not None:
        correlators = _ratio(numerators, z)
        ea = float(np.sum(probabilities * correlators ** 2))
        n_terms = len(structure.terms)
        minus = ((np.arange(1 << n_terms, dtype=np.int64)[:, None] >> np.arange(n_terms)) & 1)
        n_plus = n_terms - minus.sum(axis=1)
        p_flip = nishimori.p_flip
        disorder = p_flip ** n_plus * (1.0 - p_flip) ** (n_terms - n_plus)
        linear_uncorrelated = float(np.sum(disorder * _ratio(numerators_rbim, z_rbim)))
        deviation = abs(ea - linear_uncorrelated)
        report.checks.append(CheckResult("ea_identity", deviation, deviation <= _TOLERANCE,
                                         {"ea": ea, "linear_uncorrelated": linear_uncorrelated}))

        linear = float(np.sum(probabilities * correlators))
        report.checks.append(CheckResult("linear_average_vanishes", abs(linear),
                                         abs(linear) <= _TOLERANCE, {"linear": linear}))

    for check in report.checks:
        level = logging.DEBUG if check.passed else logging.WARNING
        logger.log(level, f"{check.name}: deviation {check.max_deviation:.3e} "
                          f"({'pass' if check.passed else 'FAIL'})")
    if strict and not report.passed:
        raise VerificationError(report)
    return report


def two_body_strong_limit_check(graph: LatticeGraph) -> VerificationReport:
    """At t_A = t_B = pi/4 the two-body plaquette protocol projects onto (1 + s W)/2.

    Checks the single-plaquette weights over all 16 edge configurations and that the full
    ensemble equals the two-term protocol's ensemble at pi/4 with every outcome flipped.
    """
    if not graph.is_gauge_lattice:
        raise ParameterError("The two-body plaquette protocol is defined on the cubic lattice only")
    quarter = math.pi / 4
    report = VerificationReport(context={"lattice": graph.kind, "extents": list(graph.extents)})

    spins = _configs(4).astype(float)
    theta = quarter * (spins[:, 0] + spins[:, 1]) + quarter * (spins[:, 2] + spins[:, 3])
    flux = spins.prod(axis=1)
    deviation = float(max(np.max(np.abs(np.cos(theta) ** 2 - (1 + flux) / 2)),
                          np.max(np.abs(np.sin(theta) ** 2 - (1 - flux) / 2))))
    report.checks.append(CheckResult("plaquette_projector", deviation, deviation <= 1e-12))

    two_body = two_body_ensemble(graph, quarter, quarter).probabilities
    two_term = enumerate_ensemble(graph, couplings_from_times(quarter, quarter)).probabilities
    complement = np.arange(len(two_term), dtype=np.int64) ^ (len(two_term) - 1)
    deviation = float(np.max(np.abs(two_body - two_term[complement])))
    report.checks.append(CheckResult("flipped_two_term_ensemble", deviation, deviation <= 1e-12))
    return report
