"""
Result and record models shared by the sampler, oracle and analysis services
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


@dataclass
class ChainSchedule:
    """Sweep schedule of one Markov chain."""
    n_sweeps: int
    n_discard: int = 0
    thin: int = 1
    proposal: str = "raster"
    init_mode: str = "random_flux_free"
    snapshot_every: int = 0


@dataclass
class ChainRecord:
    """Per-sweep observables of one chain; all series share one length."""
    chain_index: int
    seed: int
    sweep_index: np.ndarray
    m_c: np.ndarray
    wilson_line: np.ndarray
    mean_plaquette: np.ndarray
    mean_s: np.ndarray
    acceptance_rate: np.ndarray
    snapshots: Optional[np.ndarray] = None
    max_discarded_weight: float = 0.0
    max_bond_dim: int = 1
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sweep_index)

    def columns(self) -> Dict[str, np.ndarray]:
        """Series in CSV column order."""
        return {
            "sweep_index": self.sweep_index,
            "m_c": self.m_c,
            "wilson_line": self.wilson_line,
            "mean_plaquette": self.mean_plaquette,
            "mean_s": self.mean_s,
            "acceptance_rate": self.acceptance_rate,
        }


@dataclass
class BinningResult:
    mean: float
    stderr: float
    tau_int: float
    level_errors: List[float] = field(default_factory=list)
    plateau_level: int = 0


@dataclass
class ScalingFit:
    """Finite-size-scaling collapse result.

    `beta_over_nu` refers to the order-parameter exponent, not an inverse temperature.
    """
    t_c: float
    nu: float
    beta_over_nu: float
    quality: float
    window: Tuple[float, float]
    converged: bool = True
    iterations: int = 0
    n_points: int = 0
    sizes: List[int] = field(default_factory=list)

    @property
    def beta(self) -> float:
        return self.beta_over_nu * self.nu

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t_c": self.t_c,
            "t_c_over_pi": self.t_c / np.pi,
            "nu": self.nu,
            "beta_over_nu": self.beta_over_nu,
            "beta": self.beta,
            "quality": self.quality,
            "window": list(self.window),
            "converged": self.converged,
            "iterations": self.iterations,
            "n_points": self.n_points,
            "sizes": list(self.sizes),
        }


@dataclass
class ExactEnsemble:
    """Every outcome configuration with its exact Born probability.

    Row k of `configs` is the outcome with s_b = 1 - 2 * bit_b(k). `partition_functions`
    holds Z_s = sum_sigma prod_b B^{s_b}, and `correlators` the thermal <sigma_a sigma_b>_s
    of the pair the ensemble was built for (zero where p_s vanishes).
    """
    configs: np.ndarray
    probabilities: np.ndarray
    partition_functions: Optional[np.ndarray] = None
    correlators: Optional[np.ndarray] = None
    pair: Optional[Tuple[int, int]] = None

    @staticmethod
    def index_of(s: np.ndarray) -> int:
        bits = (1 - np.asarray(s, dtype=np.int64)) // 2
        return int(np.sum(bits << np.arange(len(bits), dtype=np.int64)))

    def probability_of(self, s: np.ndarray) -> float:
        return float(self.probabilities[self.index_of(s)])


@dataclass
class CheckResult:
    name: str
    max_deviation: float
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "max_deviation": self.max_deviation,
                "passed": self.passed, "detail": self.detail}


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)
    context: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "context": self.context,
                "checks": [check.to_dict() for check in self.checks]}
