"""
Configuration management for measured-ising runs
"""
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from dotenv import load_dotenv

from ..utils.parsing_utils import parse_angle, parse_extents, scan_grid
from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

# Define the project root to find the configs directory
PROJECT_ROOT = Path(__file__).parent.parent.parent.parent
DEFAULTS_PATH = PROJECT_ROOT / "configs" / "run.yaml"
OUTPUT_ROOT_ENV = "MEASURED_ISING_OUTPUT_ROOT"

LATTICE_KINDS = ("chain", "lieb_square", "heavy_hexagon", "cubic3d")
CUTS = ("nishimori", "diagonal", "fixed_tB")
PROPOSALS = ("raster", "random")
INIT_MODES = ("uniform_plus", "uniform_minus", "random", "random_flux_free")

BUILTIN_DEFAULTS: Dict[str, Any] = {
    "chains": 11,
    "discard_fraction": 0.1,
    "thin": 1,
    "seed": 0,
    "cutoff": 1e-10,
    "chi_max": 256,
    "proposal": "raster",
    "init_mode": "random_flux_free",
    "threads": 1,
}
DEFAULT_SWEEPS = 10000
DEFAULT_WINDOW = (0.1, 0.2)


@dataclass
class RunConfig:
    """One sampling run: a lattice, a set of (t_A, t_B) points and a schedule."""
    lattice: str
    extents: Tuple[int, ...]
    t_A: Optional[float] = None
    t_B: Optional[float] = None
    cut: Optional[str] = None
    t_A_min: Optional[float] = None
    t_A_max: Optional[float] = None
    points: Optional[int] = None
    chains: int = 11
    sweeps: int = DEFAULT_SWEEPS
    discard_fraction: float = 0.1
    thin: int = 1
    seed: int = 0
    cutoff: float = 1e-10
    chi_max: Optional[int] = 256
    proposal: str = "raster"
    init_mode: str = "random_flux_free"
    threads: int = 1
    output_dir: Path = field(default_factory=lambda: Path("runs"))

    @property
    def resolved_cut(self) -> str:
        if self.cut:
            return self.cut
        return "fixed_tB" if self.t_B is not None else "nishimori"

    @property
    def n_discard(self) -> int:
        return int(math.floor(self.discard_fraction * self.sweeps))

    @property
    def is_scan(self) -> bool:
        return self.t_A is None

    def validate(self) -> "RunConfig":
        """Check every field against the preconditions of the modules it feeds."""
        if self.lattice not in LATTICE_KINDS:
            raise ConfigurationError(
                f"Unknown lattice '{self.lattice}'. Available: {', '.join(LATTICE_KINDS)}")
        if not self.extents or any(int(e) < 1 for e in self.extents):
            raise ConfigurationError(f"Extents must be positive integers, got {self.extents}")
        if self.resolved_cut not in CUTS:
            raise ConfigurationError(f"Unknown cut '{self.cut}'. Available: {', '.join(CUTS)}")
        if self.resolved_cut == "fixed_tB" and self.t_B is None:
            raise ConfigurationError("The fixed_tB cut needs --tB")
        if self.t_A is None:
            if None in (self.t_A_min, self.t_A_max, self.points):
                raise ConfigurationError("Give either --tA or a scan (--tA-min, --tA-max, --points)")
            if self.points < 1:
                raise ConfigurationError(f"A scan needs at least one point, got {self.points}")
        for name in ("t_A", "t_B", "t_A_min", "t_A_max"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and -1e-12 <= value <= math.pi / 2 + 1e-12):
                raise ConfigurationError(f"{name} must lie in [0, pi/2], got {value}")
        if self.chains < 2:
            raise ConfigurationError(f"At least 2 chains are needed for error bars, got {self.chains}")
        if not 0.0 <= self.discard_fraction < 1.0:
            raise ConfigurationError(f"discard_fraction must lie in [0, 1), got {self.discard_fraction}")
        if self.sweeps < 1 or self.n_discard >= self.sweeps:
            raise ConfigurationError(f"sweeps ({self.sweeps}) must exceed the discarded prefix ({self.n_discard})")
        if self.thin < 1:
            raise ConfigurationError(f"thin must be >= 1, got {self.thin}")
        if self.cutoff < 0:
            raise ConfigurationError(f"cutoff must be >= 0, got {self.cutoff}")
        if self.chi_max is not None and self.chi_max < 1:
            raise ConfigurationError(f"chi_max must be >= 1, got {self.chi_max}")
        if self.proposal not in PROPOSALS:
            raise ConfigurationError(f"Unknown proposal '{self.proposal}'. Available: {', '.join(PROPOSALS)}")
        if self.init_mode not in INIT_MODES:
            raise ConfigurationError(f"Unknown init mode '{self.init_mode}'. Available: {', '.join(INIT_MODES)}")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")
        return self

    def points_grid(self) -> List[Tuple[float, float]]:
        """The (t_A, t_B) points of this run, sorted by t_A."""
        if self.t_A is not None:
            t_As = [self.t_A]
        else:
            t_As = scan_grid(self.t_A_min, self.t_A_max, self.points)
        cut = self.resolved_cut
        if cut == "nishimori":
            return [(t_A, math.pi / 4) for t_A in t_As]
        if cut == "diagonal":
            return [(t_A, t_A) for t_A in t_As]
        return [(t_A, self.t_B) for t_A in t_As]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["extents"] = list(self.extents)
        data["output_dir"] = str(self.output_dir)
        data["cut"] = self.resolved_cut
        return data


class Config:
    """Defaults from configs/run.yaml, an optional user overlay and the environment."""

    def __init__(self, config_path: Optional[Path] = None):
        load_dotenv()
        self.output_root = Path(os.getenv(OUTPUT_ROOT_ENV, "runs"))
        self.defaults: Dict[str, Any] = dict(BUILTIN_DEFAULTS)
        self.sweep_schedule: Dict[str, Dict[int, int]] = {}
        self.chain_counts: Dict[str, int] = {}
        self.collapse_windows: Dict[str, Tuple[float, float]] = {}
        self.run_overrides: Dict[str, Any] = {}

        if DEFAULTS_PATH.exists():
            self._load_file(DEFAULTS_PATH)
        else:
            logger.warning(f"Defaults file not found at {DEFAULTS_PATH}; using built-in defaults")

        if config_path is not None:
            self._load_file(Path(config_path))

    def _load_file(self, path: Path):
        """Merge one YAML file into the current configuration."""
        try:
            with open(path) as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigurationError(f"Error reading config file {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} must contain a mapping")

        unknown = set(data) - {"defaults", "sweep_schedule", "chains", "collapse_windows", "run"}
        if unknown:
            raise ConfigurationError(f"Unknown sections in {path}: {', '.join(sorted(unknown))}")

        try:
            for key, value in (data.get("defaults") or {}).items():
                if key not in BUILTIN_DEFAULTS:
                    raise ConfigurationError(f"Unknown default '{key}' in {path}")
                self.defaults[key] = value
            for kind, table in (data.get("sweep_schedule") or {}).items():
                self.sweep_schedule[kind] = {int(size): int(n) for size, n in table.items()}
            for kind, count in (data.get("chains") or {}).items():
                self.chain_counts[kind] = int(count)
            for kind, window in (data.get("collapse_windows") or {}).items():
                lo, hi = window
                self.collapse_windows[kind] = (float(lo), float(hi))
            run_names = {f.name for f in fields(RunConfig)}
            for key, value in (data.get("run") or {}).items():
                if key not in run_names:
                    raise ConfigurationError(f"Unknown run setting '{key}' in {path}")
                self.run_overrides[key] = value
        except (TypeError, ValueError, AttributeError) as e:
            raise ConfigurationError(f"Error parsing config file {path}: {e}")
        logger.debug(f"Loaded configuration from {path}")

    def sweeps_for(self, kind: str, extents: Tuple[int, ...]) -> int:
        """Sweeps per chain for a lattice: the largest schedule key not above its size."""
        table = self.sweep_schedule.get(kind)
        if not table:
            return DEFAULT_SWEEPS
        size = max(extents)
        eligible = [key for key in table if key <= size]
        return table[max(eligible)] if eligible else table[min(table)]

    def chains_for(self, kind: str) -> int:
        return self.chain_counts.get(kind, int(self.defaults["chains"]))

    def window_for(self, kind: str) -> Tuple[float, float]:
        """Collapse window in radians."""
        lo, hi = self.collapse_windows.get(kind, DEFAULT_WINDOW)
        return lo * math.pi, hi * math.pi

    def make_run_config(self, **overrides: Any) -> RunConfig:
        """Merge defaults, the user file's `run` section and CLI overrides, then validate."""
        merged: Dict[str, Any] = dict(self.defaults)
        merged.update(self.run_overrides)
        merged.update({k: v for k, v in overrides.items() if v is not None})

        try:
            lattice = merged.pop("lattice")
            extents = parse_extents(merged.pop("extents"))
        except KeyError as e:
            raise ConfigurationError(f"Missing run setting {e}")
        except ValueError as e:
            raise ConfigurationError(str(e))

        merged.setdefault("sweeps", self.sweeps_for(lattice, extents))
        if "chains" not in overrides or overrides["chains"] is None:
            if "chains" not in self.run_overrides:
                merged["chains"] = self.chains_for(lattice)
        merged.setdefault("output_dir", self.output_root)

        try:
            for name in ("t_A", "t_B", "t_A_min", "t_A_max"):
                if merged.get(name) is not None:
                    merged[name] = parse_angle(merged[name])
            config = RunConfig(
                lattice=lattice,
                extents=extents,
                t_A=merged.get("t_A"),
                t_B=merged.get("t_B"),
                cut=merged.get("cut"),
                t_A_min=merged.get("t_A_min"),
                t_A_max=merged.get("t_A_max"),
                points=None if merged.get("points") is None else int(merged["points"]),
                chains=int(merged["chains"]),
                sweeps=int(merged["sweeps"]),
                discard_fraction=float(merged["discard_fraction"]),
                thin=int(merged["thin"]),
                seed=int(merged["seed"]),
                cutoff=float(merged["cutoff"]),
                chi_max=None if merged.get("chi_max") is None else int(merged["chi_max"]),
                proposal=str(merged["proposal"]),
                init_mode=str(merged["init_mode"]),
                threads=int(merged["threads"]),
                output_dir=Path(merged["output_dir"]),
            )
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid run setting: {e}")
        return config.validate()
