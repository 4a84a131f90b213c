"""
Circuit parameter models
"""
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class CircuitParams:
    """Evolution times and the effective Ising couplings they induce.

    Couplings are dimensionless (beta already absorbed) and may be signed infinities at
    strong-measurement points; the bond matrices are always finite.
    """
    t_A: float
    t_B: float
    beta_J_plus: float
    beta_J_minus: float
    beta_h: float
    bond_matrix_plus: np.ndarray
    bond_matrix_minus: np.ndarray

    def bond_matrix(self, outcome: int) -> np.ndarray:
        return self.bond_matrix_plus if outcome > 0 else self.bond_matrix_minus

    @property
    def divergent(self) -> bool:
        return not all(math.isfinite(x) for x in (self.beta_J_plus, self.beta_J_minus, self.beta_h))

    @property
    def single_bond_correlator(self) -> float:
        """[s] = cos 2t_A cos 2t_B."""
        return math.cos(2 * self.t_A) * math.cos(2 * self.t_B)

    @property
    def decorated_factor(self) -> float:
        """-sin 2t_A sin 2t_B, the per-bond factor of sigma-decorated strings."""
        return -math.sin(2 * self.t_A) * math.sin(2 * self.t_B)

    def to_dict(self):
        return {
            "t_A": self.t_A,
            "t_B": self.t_B,
            "beta_J_plus": self.beta_J_plus,
            "beta_J_minus": self.beta_J_minus,
            "beta_h": self.beta_h,
            "bond_matrix_plus": self.bond_matrix_plus.tolist(),
            "bond_matrix_minus": self.bond_matrix_minus.tolist(),
        }


@dataclass(frozen=True)
class NishimoriParams:
    t_A: float
    beta: float
    p_flip: float
