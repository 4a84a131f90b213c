"""
Statistics and finite-size scaling.

Binning errors for autocorrelated Monte Carlo series, multi-chain disorder averages, and
a simplex-driven data collapse q(t, L) L^{beta/nu} = f((t - t_c) L^{1/nu}) scored with a
Houdayer-Hartmann quality function.
"""
import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ..core.exceptions import AnalysisError, InsufficientDataError
from ..models.records import BinningResult, ScalingFit

logger = logging.getLogger(__name__)

MIN_SERIES_LENGTH = 8
MIN_COLLAPSE_SIZES = 3
MIN_POINTS_PER_SIZE = 4
# a binning level is on the plateau once its block length reaches this many tau_int
PLATEAU_BLOCKS_PER_TAU = 12
# objective returned for parameters outside the admissible region
PENALTY = 1e12
# relative error floor so exact (zero-error) points keep a finite weight
_ERROR_FLOOR = 1e-8

Dataset = Mapping[int, Sequence[Tuple[float, float, float]]]


def binning_levels(series: np.ndarray) -> List[float]:
    """Standard error of the mean at every pairwise binning level.

    Level l averages blocks of 2^l consecutive entries; when a level has an odd number
    of bins the first one is dropped before pairing.
    """
    data = np.asarray(series, dtype=float)
    errors = []
    while len(data) >= 2:
        errors.append(float(np.std(data, ddof=1) / math.sqrt(len(data))))
        if len(data) < 4:
            break
        if len(data) % 2:
            data = data[1:]
        data = 0.5 * (data[::2] + data[1::2])
    return errors


def _plateau_start(errors: Sequence[float], deepest: int) -> int:
    """First level whose block length covers PLATEAU_BLOCKS_PER_TAU times its own tau estimate."""
    naive = errors[0]
    for level in range(deepest + 1):
        tau_level = 0.5 * (errors[level] / naive) ** 2
        if 2 ** level >= PLATEAU_BLOCKS_PER_TAU * tau_level:
            return level
    logger.debug(f"No binning plateau before level {deepest}; the series is short for its tau_int")
    return deepest


def binning_error(series: Sequence[float], min_bins: int = 32) -> BinningResult:
    """Mean, binned standard error and integrated autocorrelation time of a series.

    The plateau runs from the first level whose blocks are long compared with tau_int to
    the deepest level that still holds ``min_bins`` bins. The error is the bin-count
    weighted average of the squared level errors over the plateau, and
    tau_int = (stderr / naive stderr)^2 / 2, so uncorrelated data gives 1/2.
    """
    data = np.asarray(series, dtype=float)
    if data.ndim != 1:
        raise AnalysisError(f"Expected a one-dimensional series, got shape {data.shape}")
    if len(data) < MIN_SERIES_LENGTH:
        raise InsufficientDataError(
            f"Binning needs at least {MIN_SERIES_LENGTH} entries, got {len(data)}")
    if not np.all(np.isfinite(data)):
        raise AnalysisError("Series contains non-finite values")

    errors = binning_levels(data)
    deepest = max((level for level in range(len(errors)) if len(data) >> level >= min_bins), default=0)
    naive = errors[0]
    if naive > 0.0:
        plateau = _plateau_start(errors, deepest)
        bins = np.array([len(data) >> level for level in range(plateau, deepest + 1)], dtype=float)
        weights = np.maximum(bins - 1.0, 1.0)
        variance = float(np.dot(weights, np.square(errors[plateau:deepest + 1])) / weights.sum())
        stderr = math.sqrt(variance)
        tau_int = 0.5 * (stderr / naive) ** 2
    else:
        plateau, stderr, tau_int = 0, 0.0, 0.5
    return BinningResult(
        mean=float(np.mean(data)),
        stderr=stderr,
        tau_int=tau_int,
        level_errors=errors,
        plateau_level=plateau,
    )


def _chain_error(series: np.ndarray) -> float:
    if len(series) >= MIN_SERIES_LENGTH:
        return binning_error(series).stderr
    if len(series) >= 2:
        return float(np.std(series, ddof=1) / math.sqrt(len(series)))
    return 0.0


def disorder_average(chains: Sequence[Sequence[float]], discard: int = 0) -> Tuple[float, float]:
    """Pool per-chain series into one estimate.

    The mean weighs chains by length; the error is the larger of the between-chain
    standard error and the pooled within-chain binning error. Chains may differ in length.
    """
    if len(chains) < 2:
        raise InsufficientDataError(f"A disorder average needs at least 2 chains, got {len(chains)}")
    series = [np.asarray(chain, dtype=float)[discard:] for chain in chains]
    if any(len(s) == 0 for s in series):
        raise InsufficientDataError("A chain has no entries left after the discarded prefix")

    lengths = np.array([len(s) for s in series], dtype=float)
    means = np.array([float(np.mean(s)) for s in series])
    total = float(lengths.sum())
    mean = float(np.dot(lengths, means) / total)

    between = float(np.std(means, ddof=1) / math.sqrt(len(means)))
    within = math.sqrt(sum((n * _chain_error(s)) ** 2 for n, s in zip(lengths, series))) / total
    return mean, max(between, within)


# -- data collapse --------------------------------------------------------------

def _as_arrays(datasets: Dataset) -> Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    arrays = {}
    for size, points in datasets.items():
        table = np.asarray(points, dtype=float).reshape(-1, 3)
        table = table[np.argsort(table[:, 0], kind="stable")]
        arrays[int(size)] = (table[:, 0], table[:, 1], table[:, 2])
    return arrays


def _restrict(datasets: Dataset, window: Tuple[float, float]):
    arrays = {}
    for size, (t, q, err) in _as_arrays(datasets).items():
        keep = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
        if np.count_nonzero(keep) >= MIN_POINTS_PER_SIZE:
            arrays[size] = (t[keep], q[keep], err[keep])
        else:
            logger.debug(f"Dropping L={size}: {np.count_nonzero(keep)} points inside the window")
    if len(arrays) < MIN_COLLAPSE_SIZES:
        raise InsufficientDataError(
            f"A collapse needs at least {MIN_COLLAPSE_SIZES} sizes with {MIN_POINTS_PER_SIZE} "
            f"points in the window, got {len(arrays)}")
    return arrays


def _rescaled(arrays, t_c: float, inv_nu: float, beta_over_nu: float):
    scaled = []
    for size in sorted(arrays):
        t, q, err = arrays[size]
        factor = size ** beta_over_nu
        x = (t - t_c) * size ** inv_nu
        y = q * factor
        dy = np.maximum(err, _ERROR_FLOOR * np.maximum(np.abs(q), 1.0)) * factor
        scaled.append((x, y, dy))
    return scaled


def collapse_quality(params: Sequence[float], datasets: Dataset) -> float:
    """Mean squared deviation of every rescaled point from the local linear fit through the
    bracketing points of all other sizes, in units of the combined error.

    ``params`` is (t_c, 1/nu, beta/nu).
    """
    t_c, inv_nu, beta_over_nu = (float(p) for p in params)
    return _quality(_rescaled(_as_arrays(datasets), t_c, inv_nu, beta_over_nu))


def _quality(scaled) -> float:
    total, count = 0.0, 0
    for i, (x, y, dy) in enumerate(scaled):
        for k in range(len(x)):
            px, py, pw = [], [], []
            for j, (xo, yo, dyo) in enumerate(scaled):
                if j == i:
                    continue
                idx = int(np.searchsorted(xo, x[k], side="right")) - 1
                if idx < 0 or idx >= len(xo) - 1:
                    continue
                for m in (idx, idx + 1):
                    px.append(xo[m])
                    py.append(yo[m])
                    pw.append(1.0 / dyo[m] ** 2)
            if not px:
                continue
            px, py, pw = np.array(px), np.array(py), np.array(pw)
            K, Kx, Ky = pw.sum(), pw @ px, pw @ py
            Kxx, Kxy = pw @ (px * px), pw @ (px * py)
            delta = K * Kxx - Kx * Kx
            if delta <= 1e-12 * K * Kxx:
                continue
            fit = (Kxx * Ky - Kx * Kxy + x[k] * (K * Kxy - Kx * Ky)) / delta
            fit_var = (Kxx - 2.0 * x[k] * Kx + x[k] ** 2 * K) / delta
            total += (y[k] - fit) ** 2 / (dy[k] ** 2 + max(fit_var, 0.0))
            count += 1
    if count == 0:
        return PENALTY
    return total / count


def collapse_fit(datasets: Dataset, window: Tuple[float, float],
                 init: Optional[Tuple[float, float, float]] = None,
                 max_iter: int = 4000) -> ScalingFit:
    """Fit (t_c, nu, beta/nu) by Nelder-Mead on the collapse quality.

    ``init`` is (t_c, nu, beta/nu); the search restarts from two deterministic jitters of
    it and keeps the best objective (the first on ties).
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise AnalysisError(f"Empty collapse window ({lo}, {hi})")
    arrays = _restrict(datasets, (lo, hi))
    if init is None:
        init = (0.5 * (lo + hi), 1.0, 0.2)
    t_c0, nu0, b0 = (float(v) for v in init)
    if nu0 <= 0.0:
        raise AnalysisError(f"Initial nu must be positive, got {nu0}")

    def objective(p: np.ndarray) -> float:
        t_c, inv_nu, beta_over_nu = p
        if inv_nu <= 0.0 or not lo <= t_c <= hi:
            return PENALTY
        return _quality(_rescaled(arrays, t_c, inv_nu, beta_over_nu))

    span = hi - lo
    starts = [
        (t_c0, 1.0 / nu0, b0),
        (min(hi, t_c0 + 0.05 * span), 1.1 / nu0, b0 + 0.02),
        (max(lo, t_c0 - 0.05 * span), 0.9 / nu0, b0 - 0.02),
    ]
    best = None
    for start in starts:
        result = minimize(objective, np.array(start), method="Nelder-Mead",
                          options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-10})
        logger.debug(f"Collapse start {start}: S={result.fun:.6g} after {result.nit} iterations")
        if best is None or result.fun < best.fun:
            best = result

    t_c, inv_nu, beta_over_nu = (float(v) for v in best.x)
    converged = bool(best.success) and best.fun < PENALTY
    if not converged:
        logger.warning(f"Collapse did not converge ({best.message}); reporting the best point found")
    n_points = sum(len(t) for t, _, _ in arrays.values())
    fit = ScalingFit(
        t_c=t_c,
        nu=1.0 / inv_nu,
        beta_over_nu=beta_over_nu,
        quality=float(best.fun),
        window=(lo, hi),
        converged=converged,
        iterations=int(best.nit),
        n_points=n_points,
        sizes=sorted(arrays),
    )
    logger.info(f"Collapse: t_c={t_c / math.pi:.4f}pi nu={fit.nu:.3f} "
                f"beta/nu={beta_over_nu:.3f} S={fit.quality:.3g}")
    return fit


def rescale(datasets: Dataset, fit: ScalingFit) -> List[Dict[str, float]]:
    """Collapse table rows (L, t, q, x, y, y_err) for plotting."""
    rows = []
    inv_nu = 1.0 / fit.nu
    for size, (t, q, err) in sorted(_as_arrays(datasets).items()):
        factor = size ** fit.beta_over_nu
        for ti, qi, ei in zip(t, q, err):
            rows.append({
                "L": size,
                "t": float(ti),
                "q": float(qi),
                "x": float((ti - fit.t_c) * size ** inv_nu),
                "y": float(qi * factor),
                "y_err": float(ei * factor),
            })
    return rows


def crossing_side(datasets: Dataset) -> Tuple[int, int]:
    """Signs of q(L_max) - q(L_min) at the low and high ends of the shared t range.

    Differing signs mean the curves cross inside the range.
    """
    arrays = _as_arrays(datasets)
    if len(arrays) < 2:
        raise InsufficientDataError("Crossing detection needs at least two sizes")
    small, large = arrays[min(arrays)], arrays[max(arrays)]
    t_lo = max(small[0][0], large[0][0])
    t_hi = min(small[0][-1], large[0][-1])
    if not t_hi > t_lo:
        raise AnalysisError("The smallest and largest sizes share no t range")
    signs = []
    for t in (t_lo, t_hi):
        diff = np.interp(t, large[0], large[1]) - np.interp(t, small[0], small[1])
        signs.append(int(np.sign(diff)))
    return signs[0], signs[1]
