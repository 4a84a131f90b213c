"""
Boundary-MPS contraction of the classical network behind an outcome configuration.

The network for outcome s has a weight vector [1/2, 1/2] on every site (the |+>
amplitude squared) and the bond matrix B^{s_b} on every bond, so its full contraction
is exactly the Born probability p_s. Rows are absorbed bottom-up (or top-down) into a
boundary MPS that is compressed by singular-value truncation and renormalised after
every row, the scale being accumulated in ``log_norm``.

Each row transfer is made of three layers of operators acting on the boundary state:

* a 2x2 vertical operator per column: the rung's bond matrix, the all-ones matrix
  where a column has no rung (or no site), and the identity below the first row;
* a site weight per column: [1/2, 1/2], or [1, 0] on a pinned corner;
* a diagonal two-site gate per neighbouring column pair: the horizontal bond matrix,
  or all ones where there is no bond.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..core.exceptions import (
    ContractionError,
    DegenerateEnvironmentError,
    UnsupportedGeometryError,
    ZeroWeightError,
)
from ..models.lattice import LatticeGraph
from ..models.params import CircuitParams
from .lattice_builder import designated_wilson_path

logger = logging.getLogger(__name__)

_ONES = np.ones((2, 2))
_EYE = np.eye(2)
_SITE_WEIGHT = np.array([0.5, 0.5])
_PINNED_WEIGHT = np.array([1.0, 0.0])
_SIGMA_Z = np.array([1.0, -1.0])
# singular values below this fraction of the largest are dropped even with cutoff 0
_SV_FLOOR = 1e-14


@dataclass
class ContractionSettings:
    cutoff: float = 1e-10
    chi_max: Optional[int] = 256


@dataclass
class BoundaryState:
    """A boundary MPS, tensors indexed (left, physical, right); represents exp(log_norm) * MPS."""
    tensors: List[np.ndarray]
    log_norm: float = 0.0
    max_discarded: float = 0.0

    @property
    def bond_dims(self) -> List[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def width(self) -> int:
        return len(self.tensors)

    def to_dense(self) -> np.ndarray:
        """Full 2^width vector, first column most significant. Test helper."""
        vector = self.tensors[0]
        for tensor in self.tensors[1:]:
            vector = np.tensordot(vector, tensor, axes=([-1], [0]))
        return vector.reshape(-1) * math.exp(self.log_norm)


@dataclass
class BondEnvironment:
    """Weight of the network with one bond matrix removed, as a function of its two spins."""
    matrix: np.ndarray
    log_scale: float = 0.0

    def weight(self, bond_matrix: np.ndarray) -> float:
        return float(np.sum(self.matrix * bond_matrix))

    def flip_ratio(self, current: np.ndarray, proposed: np.ndarray) -> float:
        """Metropolis ratio <W, B'> / <W, B> for replacing `current` by `proposed`."""
        denominator = self.weight(current)
        if not denominator > 0.0:
            raise DegenerateEnvironmentError(
                f"Environment has no weight for the current outcome (<W,B> = {denominator:.3e})")
        return max(self.weight(proposed), 0.0) / denominator


def boundary_state(width: int) -> BoundaryState:
    """The all-ones product state, normalised."""
    tensor = np.full((1, 2, 1), 1.0 / math.sqrt(2.0))
    return BoundaryState([tensor.copy() for _ in range(width)], log_norm=0.5 * width * math.log(2.0))


def _svd(matrix: np.ndarray):
    try:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")


def _truncation_rank(singular_values: np.ndarray, settings: ContractionSettings) -> Tuple[int, float]:
    """Smallest rank whose discarded relative norm stays below the cutoff, capped by chi_max.

    The discarded relative norm is sqrt(sum of dropped sigma^2 / sum of sigma^2), the
    relative 2-norm error of the truncated state, which is what the weight error follows.
    """
    weights = singular_values ** 2
    total = float(weights.sum())
    if total == 0.0:
        return 1, 0.0
    tail = np.sqrt(np.append(np.cumsum(weights[::-1])[::-1], 0.0) / total)
    rank = int(np.argmax(tail <= settings.cutoff))
    rank = min(rank, int(np.count_nonzero(singular_values > _SV_FLOOR * singular_values[0])))
    if settings.chi_max is not None:
        rank = min(rank, settings.chi_max)
    rank = max(rank, 1)
    return rank, float(tail[rank])


def apply_row_operators(state: BoundaryState, vertical: Sequence[np.ndarray],
                        weights: Sequence[np.ndarray], horizontal: Sequence[np.ndarray],
                        settings: ContractionSettings) -> BoundaryState:
    """Absorb one row of operators into the boundary state and recompress it.

    ``vertical[c][x, y]`` maps the incoming spin x to the row's spin y, ``weights[c][y]``
    weighs the row's spin and ``horizontal[c]`` couples columns c and c + 1.
    """
    width = state.width
    tensors = [
        np.einsum("asb,st->atb", tensor, op * w[None, :])
        for tensor, op, w in zip(state.tensors, vertical, weights)
    ]

    # right-canonical form so every two-site SVD below sees the whole state
    for c in range(width - 1, 0, -1):
        left_dim, _, right_dim = tensors[c].shape
        q, r = scipy.linalg.qr(tensors[c].reshape(left_dim, 2 * right_dim).T, mode="economic")
        tensors[c] = q.T.reshape(-1, 2, right_dim)
        tensors[c - 1] = np.einsum("asb,bk->ask", tensors[c - 1], r.T)

    discarded = state.max_discarded
    for c in range(width - 1):
        theta = np.einsum("asb,btc->astc", tensors[c], tensors[c + 1])
        theta = theta * horizontal[c][None, :, :, None]
        left_dim, _, _, right_dim = theta.shape
        u, singular_values, vh = _svd(theta.reshape(left_dim * 2, 2 * right_dim))
        rank, lost = _truncation_rank(singular_values, settings)
        discarded = max(discarded, lost)
        tensors[c] = u[:, :rank].reshape(left_dim, 2, rank)
        tensors[c + 1] = (singular_values[:rank, None] * vh[:rank]).reshape(rank, 2, right_dim)

    norm = float(np.linalg.norm(tensors[-1]))
    if not math.isfinite(norm):
        raise ContractionError("Boundary state norm is not finite")
    if norm == 0.0:
        raise ZeroWeightError("Boundary state vanished: the outcome configuration is impossible")
    tensors[-1] = tensors[-1] / norm
    return BoundaryState(tensors, state.log_norm + math.log(norm), discarded)


def _absorb_left(env, bot, v_down, w, v_up, top):
    """env[a, s, a'] -> out[b, s, b'] through one column."""
    t = np.einsum("asd,axb->sdxb", env, bot)
    t = np.einsum("sdxb,xs->sdb", t, v_down) * w[:, None, None]
    t = np.einsum("sdb,sy->sdyb", t, v_up)
    return np.einsum("sdyb,dye->bse", t, top)


def _absorb_right(env, bot, v_down, w, v_up, top):
    """env[b, s, b'] -> out[a, s, a'] through one column."""
    t = np.einsum("bse,axb->saxe", env, bot)
    t = np.einsum("saxe,xs->sae", t, v_down) * w[:, None, None]
    t = np.einsum("sae,sy->saye", t, v_up)
    return np.einsum("saye,dye->asd", t, top)


def _rescale(env: np.ndarray) -> Tuple[np.ndarray, float]:
    peak = float(np.max(np.abs(env)))
    if peak == 0.0 or not math.isfinite(peak):
        return env, 0.0
    return env / peak, math.log(peak)


class RowSweeper:
    """Three-layer environments for the horizontal bonds of one row.

    Right environments are built once; the left environment is advanced column by column,
    reading each horizontal gate at the moment it is absorbed.
    """

    def __init__(self, network: "TensorNetwork", row: int, below: BoundaryState,
                 above: BoundaryState, weights: Optional[Sequence[np.ndarray]] = None):
        self.network = network
        self.row = row
        self.bot = below.tensors
        self.top = above.tensors
        self.v_down = network.vertical[row]
        self.v_up = network.vertical[row + 1] if row + 1 < network.n_rows else [_EYE] * network.width
        self.weights = weights if weights is not None else network.weights[row]
        self.log_base = below.log_norm + above.log_norm
        width = network.width
        horizontal = network.horizontal[row]

        # right[c] spans columns c..width-1, including the gates between them
        self.right: List[Optional[np.ndarray]] = [None] * (width + 1)
        self.right_scale = [0.0] * (width + 1)
        env = np.ones((1, 2, 1))
        scale = 0.0
        for c in range(width - 1, -1, -1):
            if c < width - 1:
                env = np.einsum("sk,bke->bse", horizontal[c], self.right[c + 1])
                scale = self.right_scale[c + 1]
            env, step = _rescale(_absorb_right(env, *self._column(c)))
            self.right[c], self.right_scale[c] = env, scale + step

        self.column = 0
        self.left, self.left_scale = _rescale(_absorb_left(np.ones((1, 2, 1)), *self._column(0)))

    def _column(self, c: int):
        return self.bot[c], self.v_down[c], self.weights[c], self.v_up[c], self.top[c]

    def environment(self, c: int) -> BondEnvironment:
        """Environment of the horizontal bond between columns c and c + 1."""
        if c != self.column:
            raise ContractionError(f"Row sweeper is at column {self.column}, asked for {c}")
        matrix = np.einsum("asd,atd->st", self.left, self.right[c + 1])
        matrix, step = _rescale(matrix)
        return BondEnvironment(matrix, self.log_base + self.left_scale + self.right_scale[c + 1] + step)

    def advance(self, c: int):
        """Absorb the gate between columns c and c + 1 (as it is now) and column c + 1."""
        if c != self.column:
            raise ContractionError(f"Row sweeper is at column {self.column}, asked to advance {c}")
        env = np.einsum("ahd,hs->asd", self.left, self.network.horizontal[self.row][c])
        self.left, step = _rescale(_absorb_left(env, *self._column(c + 1)))
        self.left_scale += step
        self.column = c + 1

    def close(self) -> Tuple[float, float]:
        """(value, log_scale) of the fully contracted row; valid once the last column is reached."""
        if self.column != self.network.width - 1:
            raise ContractionError("Row sweeper has not reached the last column")
        value = float(np.sum(self.left))
        return value, self.log_base + self.left_scale


class RungSweeper:
    """Two-layer environments for the rungs between row r and row r + 1."""

    def __init__(self, network: "TensorNetwork", row: int, below: BoundaryState, above: BoundaryState):
        self.network = network
        self.row = row
        self.bot = below.tensors
        self.top = above.tensors
        self.log_base = below.log_norm + above.log_norm
        width = network.width
        rungs = network.vertical[row + 1]

        self.right: List[Optional[np.ndarray]] = [None] * (width + 1)
        self.right_scale = [0.0] * (width + 1)
        self.right[width] = np.ones((1, 1))
        for c in range(width - 1, -1, -1):
            t = np.einsum("axb,be->axe", self.bot[c], self.right[c + 1])
            t = np.einsum("axe,xy->aye", t, rungs[c])
            env, step = _rescale(np.einsum("aye,dye->ad", t, self.top[c]))
            self.right[c], self.right_scale[c] = env, self.right_scale[c + 1] + step

        self.column = 0
        self.left = np.ones((1, 1))
        self.left_scale = 0.0

    def environment(self, c: int) -> BondEnvironment:
        """Environment of the rung in column c; matrix indexed (lower spin, upper spin)."""
        if c != self.column:
            raise ContractionError(f"Rung sweeper is at column {self.column}, asked for {c}")
        t = np.einsum("ad,axb->dxb", self.left, self.bot[c])
        t = np.einsum("dxb,be->dxe", t, self.right[c + 1])
        matrix, step = _rescale(np.einsum("dxe,dye->xy", t, self.top[c]))
        return BondEnvironment(matrix, self.log_base + self.left_scale + self.right_scale[c + 1] + step)

    def advance(self, c: int):
        if c != self.column:
            raise ContractionError(f"Rung sweeper is at column {self.column}, asked to advance {c}")
        t = np.einsum("ad,axb->dxb", self.left, self.bot[c])
        t = np.einsum("dxb,xy->dyb", t, self.network.vertical[self.row + 1][c])
        self.left, step = _rescale(np.einsum("dyb,dye->be", t, self.top[c]))
        self.left_scale += step
        self.column = c + 1


class TensorNetwork:
    """The classical network of one outcome configuration, mutable bond by bond."""

    def __init__(self, graph: LatticeGraph, params: CircuitParams, s: Sequence[int],
                 settings: Optional[ContractionSettings] = None, pinned: bool = False):
        if graph.is_gauge_lattice:
            raise UnsupportedGeometryError(
                f"{graph.kind} lattices are evaluated by enumeration only, not by contraction")
        s = np.array(s, dtype=np.int8)
        if s.shape != (graph.n_bonds,) or not np.all(np.abs(s) == 1):
            raise ContractionError(f"Outcomes must assign +1/-1 to all {graph.n_bonds} bonds")

        self.graph = graph
        self.params = params
        self.settings = settings or ContractionSettings()
        self.pinned = pinned
        self.s = s
        self.n_rows = len(graph.rows)
        self.width = graph.width

        self.weights = [[_SITE_WEIGHT] * self.width for _ in range(self.n_rows)]
        if pinned:
            corner = graph.sites[graph.pinned_corner]
            self.weights[corner.row][corner.col] = _PINNED_WEIGHT
        self.horizontal = [[_ONES] * (self.width - 1) for _ in range(self.n_rows)]
        self.vertical = [[_EYE if r == 0 else _ONES] * self.width for r in range(self.n_rows)]

        self._slots: Dict[int, Tuple[str, int, int]] = {}
        for bond in graph.bonds:
            if bond.orientation == "h":
                self._slots[bond.index] = ("h", bond.row, bond.col)
            else:
                self._slots[bond.index] = ("v", bond.row + 1, bond.col)
            self._place(bond.index)
        self._bond_at = {slot: b for b, slot in self._slots.items()}

        self.max_discarded = 0.0
        self.max_bond_dim = 1
        self._wilson: Optional[Tuple[List[int], Tuple[int, int]]] = None

    def _place(self, bond: int):
        kind, r, c = self._slots[bond]
        matrix = self.params.bond_matrix(int(self.s[bond]))
        if kind == "h":
            self.horizontal[r][c] = matrix
        else:
            self.vertical[r][c] = matrix

    def set_bond(self, bond: int, outcome: int):
        self.s[bond] = outcome
        self._place(bond)

    def bond_matrix(self, bond: int) -> np.ndarray:
        return self.params.bond_matrix(int(self.s[bond]))

    def horizontal_bond(self, row: int, col: int) -> Optional[int]:
        return self._bond_at.get(("h", row, col))

    def vertical_bond(self, row: int, col: int) -> Optional[int]:
        """The rung from (row, col) to (row + 1, col), if any."""
        return self._bond_at.get(("v", row + 1, col))

    # -- row transfer ---------------------------------------------------------

    def boundary(self) -> BoundaryState:
        return boundary_state(self.width)

    def apply_row(self, state: BoundaryState, row: int, direction: str = "up") -> BoundaryState:
        if direction == "up":
            vertical = self.vertical[row]
        elif direction == "down":
            if row + 1 < self.n_rows:
                vertical = [op.T for op in self.vertical[row + 1]]
            else:
                vertical = [_EYE] * self.width
        else:
            raise ContractionError(f"Unknown direction '{direction}', expected 'up' or 'down'")
        new_state = apply_row_operators(state, vertical, self.weights[row], self.horizontal[row],
                                        self.settings)
        self.max_discarded = max(self.max_discarded, new_state.max_discarded)
        if new_state.bond_dims:
            self.max_bond_dim = max(self.max_bond_dim, max(new_state.bond_dims))
        return new_state

    def bottom_state(self, row: int) -> BoundaryState:
        """State after absorbing rows 0..row (the boundary for row < 0)."""
        state = self.boundary()
        for r in range(row + 1):
            state = self.apply_row(state, r, "up")
        return state

    def top_state(self, row: int) -> BoundaryState:
        """State after absorbing rows n_rows-1 down to row (the boundary for row >= n_rows)."""
        state = self.boundary()
        for r in range(self.n_rows - 1, row - 1, -1):
            state = self.apply_row(state, r, "down")
        return state

    def bottom_stack(self) -> List[BoundaryState]:
        stack, state = [], self.boundary()
        for r in range(self.n_rows):
            state = self.apply_row(state, r, "up")
            stack.append(state)
        return stack

    def top_stack(self) -> List[BoundaryState]:
        """tops[r] has rows n_rows-1..r absorbed; tops[n_rows] is the boundary."""
        stack = [self.boundary()]
        for r in range(self.n_rows - 1, -1, -1):
            stack.append(self.apply_row(stack[-1], r, "down"))
        return stack[::-1]

    # -- weights and environments ---------------------------------------------

    def log_weight(self) -> float:
        """log p_s (log of the pinned-corner conditional weight when pinned, which is equal)."""
        state = self.bottom_state(self.n_rows - 1)
        vector = np.ones(1)
        for tensor in state.tensors:
            vector = vector @ tensor.sum(axis=1)
        total = float(vector[0])
        # a non-negative unit vector has a component sum of at least 1
        if not math.isfinite(total) or total <= 1e-12:
            raise ZeroWeightError(f"Network weight vanished (sum {total:.3e}): impossible outcome")
        return state.log_norm + math.log(total)

    def row_sweeper(self, row: int, below: BoundaryState, above: BoundaryState) -> RowSweeper:
        return RowSweeper(self, row, below, above)

    def rung_sweeper(self, row: int, below: BoundaryState, above: BoundaryState) -> RungSweeper:
        return RungSweeper(self, row, below, above)

    def bond_environment(self, bond: int) -> BondEnvironment:
        """Environment of one bond, contracted from scratch."""
        kind, r, c = self._slots[bond]
        if kind == "h":
            sweeper = self.row_sweeper(r, self.bottom_state(r - 1), self.top_state(r + 1))
            for column in range(c):
                sweeper.advance(column)
            return sweeper.environment(c)
        lower = r - 1
        sweeper = self.rung_sweeper(lower, self.bottom_state(lower), self.top_state(lower + 1))
        for column in range(c):
            sweeper.advance(column)
        return sweeper.environment(c)

    # -- observables ------------------------------------------------------------

    def row_expectation(self, row: int, below: BoundaryState, above: BoundaryState,
                        columns: Sequence[int]) -> float:
        """<prod of sigma over the given columns of `row`> in the network's ensemble."""
        plain = RowSweeper(self, row, below, above)
        weights = list(self.weights[row])
        for c in columns:
            weights[c] = weights[c] * _SIGMA_Z
        inserted = RowSweeper(self, row, below, above, weights=weights)
        for c in range(self.width - 1):
            plain.advance(c)
            inserted.advance(c)
        value, scale = plain.close()
        if not value > 0.0:
            raise ZeroWeightError("Row contraction vanished: impossible outcome")
        numerator, numerator_scale = inserted.close()
        return float(np.clip(numerator / value * math.exp(numerator_scale - scale), -1.0, 1.0))

    @property
    def wilson(self) -> Tuple[List[int], Tuple[int, int]]:
        if self._wilson is None:
            self._wilson = designated_wilson_path(self.graph)
        return self._wilson

    def central_observables(self, below: Optional[BoundaryState] = None) -> Tuple[float, float]:
        """(m_c, wilson_line): <sigma_c> with the corner pinned (when pinned) and the decorated
        string estimator <sigma_a sigma_b> prod_{path} s along the central row."""
        center = self.graph.sites[self.graph.central_site]
        row = center.row
        if below is None:
            below = self.bottom_state(row - 1)
        above = self.top_state(row + 1)
        m_c = self.row_expectation(row, below, above, [center.col])
        path, (a, b) = self.wilson
        cols = [self.graph.sites[a].col, self.graph.sites[b].col]
        correlator = self.row_expectation(row, below, above, cols)
        wilson = correlator * float(np.prod(self.s[path])) if path else correlator
        return m_c, wilson

    def bond_dimension_profile(self) -> List[List[int]]:
        return [state.bond_dims for state in self.bottom_stack()]


def apply_row(state: BoundaryState, graph: LatticeGraph, params: CircuitParams, s: Sequence[int],
              row: int, direction: str = "up",
              settings: Optional[ContractionSettings] = None) -> BoundaryState:
    return TensorNetwork(graph, params, s, settings).apply_row(state, row, direction)


def log_weight(graph: LatticeGraph, params: CircuitParams, s: Sequence[int],
               settings: Optional[ContractionSettings] = None) -> float:
    """log p_s; differences between outcome configurations are exact log-probability ratios."""
    return TensorNetwork(graph, params, s, settings).log_weight()


def bond_environment(graph: LatticeGraph, params: CircuitParams, s: Sequence[int], bond: int,
                     settings: Optional[ContractionSettings] = None) -> BondEnvironment:
    if not 0 <= bond < graph.n_bonds:
        raise ContractionError(f"Bond {bond} does not exist (lattice has {graph.n_bonds} bonds)")
    return TensorNetwork(graph, params, s, settings).bond_environment(bond)


def pinned_central_magnetization(graph: LatticeGraph, params: CircuitParams, s: Sequence[int],
                                 settings: Optional[ContractionSettings] = None) -> float:
    """<sigma_c> with the bottom-left corner pinned to +1."""
    network = TensorNetwork(graph, params, s, settings, pinned=True)
    center = graph.sites[graph.central_site]
    row = center.row
    return network.row_expectation(row, network.bottom_state(row - 1), network.top_state(row + 1),
                                   [center.col])
