"""
CLI command implementations
"""
import asyncio
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn

from .. import __version__
from ..core.config import PROJECT_ROOT, Config, RunConfig
from ..core.exceptions import ConfigurationError, InsufficientDataError, VerificationError
from ..core.logger import run_log
from ..models.lattice import LatticeGraph
from ..models.params import CircuitParams
from ..models.records import ChainRecord, ChainSchedule, VerificationReport
from ..services.analysis import collapse_fit, crossing_side, rescale
from ..services.artifact_service import ArtifactService
from ..services.contraction import ContractionSettings, TensorNetwork
from ..services.couplings import (
    cube_correlator,
    couplings_from_times,
    premeasurement_correlator,
    string_correlator,
)
from ..services.lattice_builder import build_lattice, designated_wilson_path
from ..services.oracle import (
    enumerate_ensemble,
    oned_bond_prob,
    oned_correlation_length,
    oned_q,
    premeasurement_check,
    sample_chain_direct,
    two_body_strong_limit_check,
    verify_nishimori,
)
from ..services.sampler import chain_rng, run_chain, summarize_chains
from ..utils.file_utils import FileUtils
from ..utils.git_utils import GitUtils
from ..utils.parsing_utils import format_angle
from . import display
from .display import console

logger = logging.getLogger(__name__)

AGGREGATED_COLUMNS = [
    "t_A", "t_B", "L", "q", "q_err", "m_c", "m_c_err", "mean_s", "mean_s_err",
    "mean_plaquette", "mean_plaquette_err", "wilson_line", "wilson_line_err", "acceptance",
    "max_discarded_weight", "max_bond_dim", "mean_s_exact", "mean_plaquette_exact",
    "wilson_line_exact", "q_exact",
]


def _chain_job(graph: LatticeGraph, params: CircuitParams, schedule: ChainSchedule, seed: int,
               chain_index: int, point_index: int, settings: ContractionSettings) -> ChainRecord:
    return run_chain(graph, params, schedule, seed, chain_index, point_index, settings)


@dataclass
class CollapseInputs:
    datasets: Dict[int, List[Tuple[float, float, float]]] = field(default_factory=dict)
    lattice: Optional[str] = None


class ExperimentCommands:
    """Implementation of the run commands"""

    def __init__(self, config: Config):
        self.config = config

    # -- helpers ------------------------------------------------------------------------

    def _run_directory(self, run: RunConfig, name: str) -> Path:
        extents = "x".join(str(e) for e in run.extents)
        return Path(run.output_dir) / f"{name}_{run.lattice}_{extents}_{run.resolved_cut}_seed{run.seed}"

    @staticmethod
    def _code_version() -> Dict[str, Any]:
        return {"package": __version__, "git": GitUtils.describe(PROJECT_ROOT)}

    def _manifest(self, run: RunConfig, graph: LatticeGraph,
                  points: Sequence[Tuple[float, float]], command: str) -> Dict[str, Any]:
        return {
            "command": command,
            "config": run.to_dict(),
            "points": [{"index": i, "t_A": t_A, "t_B": t_B} for i, (t_A, t_B) in enumerate(points)],
            "lattice": {"kind": graph.kind, "extents": list(graph.extents),
                        "n_sites": graph.n_sites, "n_bonds": graph.n_bonds,
                        "total_spins": graph.total_spins},
            "schedule": {"sweeps": run.sweeps, "discard": run.n_discard, "thin": run.thin,
                         "proposal": run.proposal, "init_mode": run.init_mode},
            "threads": run.threads,
            "version": self._code_version(),
        }

    # -- sample / scan --------------------------------------------------------------------

    async def sample(self, run: RunConfig, dump_profile: bool = False) -> Path:
        """Run every chain at every point and write the artifact set."""
        graph = build_lattice(run.lattice, run.extents)
        if graph.is_gauge_lattice:
            raise ConfigurationError(f"{graph.kind} lattices are evaluated with `exact` only")
        points = run.points_grid()
        params_list = [couplings_from_times(t_A, t_B) for t_A, t_B in points]
        settings = ContractionSettings(cutoff=run.cutoff, chi_max=run.chi_max)
        schedule = ChainSchedule(n_sweeps=run.sweeps, n_discard=run.n_discard, thin=run.thin,
                                 proposal=run.proposal, init_mode=run.init_mode)

        run_dir = self._run_directory(run, "sample")
        artifacts = ArtifactService(run_dir)
        logger.info(f"Sampling {graph.kind} {graph.extents} at {len(points)} point(s), "
                    f"{run.chains} chains x {run.sweeps} sweeps -> {run_dir}")
        display.show_run_header("Sampling", [
            f"lattice  {graph.kind} {'x'.join(str(e) for e in graph.extents)} "
            f"({graph.n_sites} sites, {graph.n_bonds} bonds)",
            f"cut      {run.resolved_cut}, {len(points)} point(s)",
            f"chains   {run.chains} x {run.sweeps} sweeps (discard {run.n_discard}, thin {run.thin})",
            f"output   {run_dir}",
        ])
        written = [
            await artifacts.write_json("manifest.json", self._manifest(run, graph, points, "sample")),
            await artifacts.write_json("lattice.json", graph.to_dict()),
        ]

        with run_log(run_dir, run_dir.name):
            aggregated, profiles = [], {}
            executor = ProcessPoolExecutor(max_workers=run.threads) if run.threads > 1 else None
            try:
                with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                              BarColumn(), MofNCompleteColumn(), console=console,
                              transient=True) as progress:
                    task = progress.add_task("chains", total=len(points) * run.chains)
                    for point_index, params in enumerate(params_list):
                        progress.update(task, description=f"t_A={format_angle(params.t_A)}")
                        records = await self._run_point(graph, params, schedule, run, point_index,
                                                        settings, executor, progress, task)
                        for record in records:
                            written.append(await artifacts.write_csv(
                                f"chains/point_{point_index:02d}_chain_{record.chain_index:03d}.csv",
                                FileUtils.columns_to_rows(record.columns())))
                        aggregated.append(summarize_chains(records, graph, params))
                        if dump_profile:
                            network = TensorNetwork(graph, params, records[0].metadata["final_s"],
                                                    settings)
                            profiles[f"point_{point_index:02d}"] = network.bond_dimension_profile()
            finally:
                if executor is not None:
                    executor.shutdown()

            written.append(await artifacts.write_csv("aggregated.csv", aggregated, AGGREGATED_COLUMNS))
            if dump_profile:
                written.append(await artifacts.write_json("bond_dims.json", profiles))
            display.show_aggregated(aggregated)
            display.show_written(written[-2:] if dump_profile else written[-1:])
            return run_dir

    async def _run_point(self, graph, params, schedule, run: RunConfig, point_index: int,
                         settings, executor, progress, task) -> List[ChainRecord]:
        if executor is None:
            records = []
            for chain_index in range(run.chains):
                records.append(_chain_job(graph, params, schedule, run.seed, chain_index,
                                          point_index, settings))
                progress.advance(task)
            return records

        loop = asyncio.get_running_loop()

        async def one(chain_index: int) -> ChainRecord:
            record = await loop.run_in_executor(executor, _chain_job, graph, params, schedule,
                                                run.seed, chain_index, point_index, settings)
            progress.advance(task)
            return record

        return list(await asyncio.gather(*(one(c) for c in range(run.chains))))

    # -- exact ------------------------------------------------------------------------------

    async def exact(self, run: RunConfig) -> Path:
        """Enumeration results, closed forms and identity checks at every point."""
        graph = build_lattice(run.lattice, run.extents)
        points = run.points_grid()
        # the size guard fires before anything is written
        enumerate_ensemble(graph, couplings_from_times(*points[0]))

        run_dir = self._run_directory(run, "exact")
        artifacts = ArtifactService(run_dir)
        written = [
            await artifacts.write_json("manifest.json", self._manifest(run, graph, points, "exact")),
            await artifacts.write_json("lattice.json", graph.to_dict()),
        ]

        with run_log(run_dir, run_dir.name):
            rows, reports = [], []
            for t_A, t_B in points:
                params = couplings_from_times(t_A, t_B)
                if graph.is_gauge_lattice:
                    rows.append(self._exact_gauge_row(graph, params))
                else:
                    rows.append(self._exact_planar_row(graph, params))
                if math.isclose(t_B, math.pi / 4) and t_A <= math.pi / 4 + 1e-12:
                    report = verify_nishimori(graph, t_A, t_B)
                    reports.append(report)
                    display.show_report(report, f"Nishimori identities at t_A={format_angle(t_A)}")
            if graph.is_gauge_lattice:
                report = two_body_strong_limit_check(graph)
                reports.append(report)
                display.show_report(report, "Two-body protocol at t = pi/4")

            written.append(await artifacts.write_csv("exact.csv", rows))
            written.append(await artifacts.write_json("exact.json", {
                "rows": rows, "reports": [r.to_dict() for r in reports]}))
            display.show_exact(rows)
            display.show_written(written[-2:])

            failed = [r for r in reports if not r.passed]
            if failed:
                raise VerificationError(failed[0])
            return run_dir

    @staticmethod
    def _exact_planar_row(graph: LatticeGraph, params: CircuitParams) -> Dict[str, Any]:
        ensemble = enumerate_ensemble(graph, params)
        path = designated_wilson_path(graph)[0]
        row = {
            "t_A": params.t_A,
            "t_B": params.t_B,
            "q": float(np.sum(ensemble.probabilities * ensemble.correlators ** 2)),
            "linear": float(np.sum(ensemble.probabilities * ensemble.correlators)),
            "mean_s": premeasurement_check(graph, params, "single_s"),
            "mean_s_closed_form": premeasurement_correlator(params.t_A, params.t_B, 1),
            "wilson_line": premeasurement_check(graph, params, "decorated_string", path),
            "wilson_line_closed_form": string_correlator(graph, params.t_A, params.t_B, path,
                                                         decorated=True),
        }
        if graph.plaquettes:
            row["plaquette"] = premeasurement_check(graph, params, "plaquette")
            row["plaquette_closed_form"] = string_correlator(graph, params.t_A, params.t_B,
                                                             graph.plaquettes[0])
        if graph.kind == "chain" and graph.extents[0] % 2 == 0:
            row["q_closed_form"] = oned_q(params.t_A, params.t_B, graph.extents[0])
        return row

    @staticmethod
    def _exact_gauge_row(graph: LatticeGraph, params: CircuitParams) -> Dict[str, Any]:
        return {
            "t_A": params.t_A,
            "t_B": params.t_B,
            "mean_s": premeasurement_check(graph, params, "single_s"),
            "mean_s_closed_form": premeasurement_correlator(params.t_A, params.t_B, 1),
            "cube_product": premeasurement_check(graph, params, "cube_product"),
            "cube_product_closed_form": cube_correlator(params.t_A, params.t_B),
        }

    # -- collapse ---------------------------------------------------------------------------

    async def read_collapse_inputs(self, paths: Sequence[Path]) -> CollapseInputs:
        inputs = CollapseInputs()
        for path in paths:
            path = Path(path)
            for row in await ArtifactService.read_aggregated(path):
                if math.isnan(row["q"]):
                    continue
                inputs.datasets.setdefault(int(row["L"]), []).append(
                    (row["t_A"], row["q"], row["q_err"]))
            manifest = (path if path.is_dir() else path.parent) / "manifest.json"
            if inputs.lattice is None and manifest.exists():
                data = await ArtifactService.read_json(manifest)
                inputs.lattice = data.get("config", {}).get("lattice")
        if not inputs.datasets:
            raise InsufficientDataError("No aggregated rows found in the given runs")
        return inputs

    async def collapse(self, paths: Sequence[Path], window: Optional[Tuple[float, float]],
                       init: Optional[Tuple[float, float, float]], output: Optional[Path]) -> Path:
        inputs = await self.read_collapse_inputs(paths)
        if window is None:
            window = self.config.window_for(inputs.lattice or "lieb_square")
        logger.info(f"Collapsing sizes {sorted(inputs.datasets)} in window "
                    f"[{format_angle(window[0])}, {format_angle(window[1])}]")
        fit = collapse_fit(inputs.datasets, window, init)
        try:
            crossing = crossing_side(inputs.datasets)
        except InsufficientDataError:
            crossing = None

        out_dir = Path(output) if output else self.config.output_root / "collapse"
        artifacts = ArtifactService(out_dir)
        result = fit.to_dict()
        result["inputs"] = [str(p) for p in paths]
        result["crossing_sides"] = list(crossing) if crossing else None
        written = [
            await artifacts.write_json("collapse_fit.json", result),
            await artifacts.write_csv("collapse.csv", rescale(inputs.datasets, fit)),
        ]
        display.show_fit(fit, crossing)
        display.show_written(written)
        return out_dir

    # -- oned -------------------------------------------------------------------------------

    async def oned(self, sizes: Sequence[int], points: Sequence[Tuple[float, float]],
                   samples: int, seed: int, output: Optional[Path]) -> List[Dict[str, Any]]:
        """Chain closed forms, optionally beside direct-sampling estimates."""
        rows = []
        for point_index, (t_A, t_B) in enumerate(points):
            for size in sizes:
                row = {
                    "t_A": t_A,
                    "t_B": t_B,
                    "L": int(size),
                    "q_exact": oned_q(t_A, t_B, size),
                    "p_plus": oned_bond_prob(t_A, t_B),
                    "xi": oned_correlation_length(t_A, t_B),
                }
                if samples:
                    q, err = sample_chain_direct(t_A, t_B, size, samples,
                                                 chain_rng(seed, int(size), point_index))
                    row["q_direct"], row["q_direct_err"] = q, err
                rows.append(row)
        display.show_exact(rows, "Chain closed forms")
        if output:
            path = await ArtifactService(Path(output)).write_csv("oned.csv", rows)
            display.show_written([path])
        return rows
