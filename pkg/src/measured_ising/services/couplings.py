"""
Circuit-to-Ising translation.

A gate exp(-i t Z_site Z_anc) followed by an X measurement of the ancilla with outcome
s weights the two site spins by the bond matrix

    B^+ = [[cos^2(t_A + t_B), cos^2(t_A - t_B)], [cos^2(t_A - t_B), cos^2(t_A + t_B)]]
    B^- = the same with sin^2,

indexed by (sigma_i, sigma_j) with the diagonal meaning aligned spins. The Born
probability of an outcome configuration is 2^{-N_sites} sum_sigma prod_b B^{s_b}.
"""
import math
from typing import Sequence

import numpy as np

from ..core.exceptions import ParameterError
from ..models.lattice import LatticeGraph
from ..models.params import CircuitParams, NishimoriParams
from .lattice_builder import path_endpoints

# trig values closer than this to zero are treated as exact zeros
_SNAP = 1e-14

CUTS = ("nishimori", "diagonal", "fixed_tB")

# (t_B description, t_c / pi, nu, order-parameter beta) for the square lattice
PHASE_BOUNDARY_POINTS = {
    "nishimori": (0.149, 1.4, 0.36),
    "fixed_tB=pi/5": (0.151, 1.5, 0.39),
    "diagonal": (0.168, 1.7, 0.31),
}


def _snap(x: float) -> float:
    return 0.0 if abs(x) < _SNAP else x


def _log_abs_ratio(numerator: float, denominator: float) -> float:
    """ln|numerator / denominator| with signed infinities; 0/0 is taken as 0."""
    numerator, denominator = abs(_snap(numerator)), abs(_snap(denominator))
    if numerator == 0.0 and denominator == 0.0:
        return 0.0
    if denominator == 0.0:
        return math.inf
    if numerator == 0.0:
        return -math.inf
    return math.log(numerator) - math.log(denominator)


def _check_angles(*angles: float):
    for angle in angles:
        if not math.isfinite(angle):
            raise ParameterError(f"Angles must be finite, got {angle}")


def bond_matrices(t_A: float, t_B: float):
    """(B^+, B^-) for the given evolution times."""
    c_sum, c_diff = _snap(math.cos(t_A + t_B)), _snap(math.cos(t_A - t_B))
    s_sum, s_diff = _snap(math.sin(t_A + t_B)), _snap(math.sin(t_A - t_B))
    plus = np.array([[c_sum ** 2, c_diff ** 2], [c_diff ** 2, c_sum ** 2]])
    minus = np.array([[s_sum ** 2, s_diff ** 2], [s_diff ** 2, s_sum ** 2]])
    plus.setflags(write=False)
    minus.setflags(write=False)
    return plus, minus


def couplings_from_times(t_A: float, t_B: float) -> CircuitParams:
    """Effective couplings and bond matrices for evolution times (t_A, t_B).

    B^{s}(sigma_i, sigma_j) is proportional to exp(-beta J_s sigma_i sigma_j - beta h s), so
    the couplings are read off from ratios of bond-matrix entries. Where
    tanh(beta J / 2) would leave (-1, 1) the real part of its continuation is returned.
    """
    _check_angles(t_A, t_B)
    plus, minus = bond_matrices(t_A, t_B)
    beta_J_plus = _log_abs_ratio(math.cos(t_A - t_B), math.cos(t_A + t_B))
    beta_J_minus = _log_abs_ratio(math.sin(t_A - t_B), math.sin(t_A + t_B))
    beta_h = 0.5 * _log_abs_ratio(math.cos(2 * t_B) - math.cos(2 * t_A),
                                  math.cos(2 * t_A) + math.cos(2 * t_B))
    return CircuitParams(
        t_A=float(t_A),
        t_B=float(t_B),
        beta_J_plus=beta_J_plus,
        beta_J_minus=beta_J_minus,
        beta_h=beta_h,
        bond_matrix_plus=plus,
        bond_matrix_minus=minus,
    )


def nishimori_params(t_A: float) -> NishimoriParams:
    """Temperature and bond-flip probability of the Nishimori-line RBIM at t_B = pi/4."""
    _check_angles(t_A)
    if not -1e-12 <= t_A <= math.pi / 4 + 1e-12:
        raise ParameterError(f"t_A must lie in [0, pi/4] on the Nishimori line, got {t_A}")
    tangent = math.tan(t_A + math.pi / 4)
    cosine = _snap(math.cos(t_A + math.pi / 4))
    beta = math.inf if cosine == 0.0 else math.log(abs(tangent))
    p_flip = max(0.0, (1.0 - math.sin(2 * t_A)) / 2.0)
    return NishimoriParams(t_A=float(t_A), beta=beta, p_flip=_snap(p_flip))


def cut_t_B(cut: str, t_A: float, fixed_t_B: float = math.pi / 4) -> float:
    """t_B on a cut through the (t_A, t_B) plane."""
    if cut == "nishimori":
        return math.pi / 4
    if cut == "diagonal":
        return t_A
    if cut == "fixed_tB":
        return fixed_t_B
    raise ParameterError(f"Unknown cut '{cut}'. Available: {', '.join(CUTS)}")


def premeasurement_correlator(t_A: float, t_B: float, length: int, closed: bool = False,
                              decorated: bool = False) -> float:
    """Disorder average of a product of `length` outcomes.

    Open strings give (cos 2t_A cos 2t_B)^n, closed loops and surfaces add
    (-sin 2t_A sin 2t_B)^n, and strings decorated with sigma^z at both ends give
    (-sin 2t_A sin 2t_B)^n.
    """
    _check_angles(t_A, t_B)
    if length < 0:
        raise ParameterError(f"String length must be non-negative, got {length}")
    if decorated and closed:
        raise ParameterError("A closed string has no endpoints to decorate")
    c = _snap(math.cos(2 * t_A) * math.cos(2 * t_B))
    d = _snap(-math.sin(2 * t_A) * math.sin(2 * t_B))
    if decorated:
        return d ** length
    value = c ** length
    if closed and length > 0:
        value += d ** length
    return value


def string_correlator(graph: LatticeGraph, t_A: float, t_B: float, bonds: Sequence[int],
                      decorated: bool = False) -> float:
    """Closed form for a bond string on `graph`: a wilson_path output or a plaquette."""
    bonds = list(bonds)
    closed = not path_endpoints(graph, bonds) and len(bonds) > 0
    return premeasurement_correlator(t_A, t_B, len(bonds), closed=closed, decorated=decorated)


def cube_correlator(t_A: float, t_B: float) -> float:
    """Product of the six plaquette outcomes around a cube."""
    return premeasurement_correlator(t_A, t_B, 6, closed=True)
