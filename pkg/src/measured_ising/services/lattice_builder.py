"""
Lattice construction: chain, Lieb square, heavy hexagon and small cubic lattices.

Every planar lattice is laid out on a grid of rows (bottom to top) and columns. Bond
indices follow raster order: the horizontal bonds of row 0 left to right, then the
rungs from row 0 to row 1, then row 1, and so on.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from ..core.exceptions import DisconnectedPathError, LatticeError
from ..models.lattice import Bond, LatticeGraph, Row, Site

logger = logging.getLogger(__name__)

LATTICE_KINDS = ("chain", "lieb_square", "heavy_hexagon", "cubic3d")
MAX_CUBIC_SPINS = 24

Extents = Union[int, Sequence[int]]


def build_lattice(kind: str, extents: Extents) -> LatticeGraph:
    """Build a lattice by kind.

    Extents per kind: chain ``L`` (L bonds); lieb_square ``L`` or ``(L_x, L_y)`` unit
    cells; heavy_hexagon ``(L_y, L_x)`` with ``L_x = 2 L_y - 1`` (``L_y`` alone is
    accepted); cubic3d ``(n_x, n_y, n_z)`` vertices per axis.
    """
    if isinstance(extents, int):
        extents = (extents,)
    extents = tuple(int(e) for e in extents)
    if not extents or any(e < 1 for e in extents):
        raise LatticeError(f"Extents must be positive integers, got {extents}")

    if kind == "chain":
        graph = _build_chain(extents)
    elif kind == "lieb_square":
        graph = _build_lieb(extents)
    elif kind == "heavy_hexagon":
        graph = _build_heavy_hexagon(extents)
    elif kind == "cubic3d":
        graph = _build_cubic(extents)
    else:
        raise LatticeError(f"Unsupported lattice kind '{kind}'. Available: {', '.join(LATTICE_KINDS)}")

    _validate(graph)
    logger.debug(f"Built {kind} {graph.extents}: {graph.n_sites} sites, {graph.n_bonds} bonds, "
                 f"{graph.n_plaquettes} plaquettes")
    return graph


def _build_chain(extents: Tuple[int, ...]) -> LatticeGraph:
    if len(extents) != 1:
        raise LatticeError(f"A chain takes one extent (its number of bonds), got {extents}")
    length = extents[0]
    return _grid_lattice(
        kind="chain",
        extents=extents,
        n_rows=1,
        n_cols=length + 1,
        has_site=lambda r, c: True,
        has_rung=lambda r, c: False,
        center=(0, math.ceil(length / 2)),
        faces=lambda h, v: [],
    )


def _build_lieb(extents: Tuple[int, ...]) -> LatticeGraph:
    if len(extents) == 1:
        extents = (extents[0], extents[0])
    if len(extents) != 2:
        raise LatticeError(f"lieb_square takes L or (L_x, L_y), got {extents}")
    lx, ly = extents

    def faces(h, v):
        return [
            (h[(r, c)], v[(r, c + 1)], h[(r + 1, c)], v[(r, c)])
            for r in range(ly) for c in range(lx)
        ]

    return _grid_lattice(
        kind="lieb_square",
        extents=extents,
        n_rows=ly + 1,
        n_cols=lx + 1,
        has_site=lambda r, c: True,
        has_rung=lambda r, c: True,
        center=(math.ceil(ly / 2), math.ceil(lx / 2)),
        faces=faces,
    )


def _build_heavy_hexagon(extents: Tuple[int, ...]) -> LatticeGraph:
    if len(extents) == 1:
        extents = (extents[0], 2 * extents[0] - 1)
    if len(extents) != 2:
        raise LatticeError(f"heavy_hexagon takes (L_y, L_x), got {extents}")
    ly, lx = extents
    if lx != 2 * ly - 1:
        raise LatticeError(f"heavy_hexagon requires L_x = 2 L_y - 1, got L_y={ly}, L_x={lx}")
    if ly < 2:
        raise LatticeError(f"heavy_hexagon requires L_y >= 2, got {ly}")
    n_rows, n_cols = lx, 2 * ly
    # the two dangling corner qubits
    removed = {(0, n_cols - 1), (n_rows - 1, 0)}

    def has_rung(r, c):
        return c % 2 == r % 2

    def faces(h, v):
        hexagons = []
        for r in range(n_rows - 1):
            rungs = [c for c in range(n_cols) if (r, c) in v]
            for c1, c2 in zip(rungs, rungs[1:]):
                cycle = [(r, c1), (r, c1 + 1)]
                top = [(r + 1, c1 + 1), (r + 1, c1)]
                if c2 != c1 + 2 or not all(k in h for k in cycle + top):
                    continue
                hexagons.append((h[(r, c1)], h[(r, c1 + 1)], v[(r, c2)],
                                 h[(r + 1, c1 + 1)], h[(r + 1, c1)], v[(r, c1)]))
        return hexagons

    return _grid_lattice(
        kind="heavy_hexagon",
        extents=extents,
        n_rows=n_rows,
        n_cols=n_cols,
        has_site=lambda r, c: (r, c) not in removed,
        has_rung=has_rung,
        center=(n_rows // 2, ly),
        faces=faces,
    )


def _grid_lattice(kind: str, extents: Tuple[int, ...], n_rows: int, n_cols: int,
                  has_site: Callable[[int, int], bool], has_rung: Callable[[int, int], bool],
                  center: Tuple[int, int], faces: Callable) -> LatticeGraph:
    index: Dict[Tuple[int, int], int] = {}
    sites: List[Site] = []
    for r in range(n_rows):
        for c in range(n_cols):
            if has_site(r, c):
                index[(r, c)] = len(sites)
                sites.append(Site(len(sites), (c, r), "A" if (r + c) % 2 == 0 else "B", r, c))

    bonds: List[Bond] = []
    h_index: Dict[Tuple[int, int], int] = {}
    v_index: Dict[Tuple[int, int], int] = {}
    rows: List[Row] = []

    def add_bond(i: int, j: int, orientation: str, r: int, c: int) -> int:
        a_site = i if sites[i].sublattice == "A" else j
        bonds.append(Bond(len(bonds), i, j, a_site, orientation, r, c))
        return len(bonds) - 1

    for r in range(n_rows):
        horizontal, vertical = [], []
        for c in range(n_cols - 1):
            if (r, c) in index and (r, c + 1) in index:
                h_index[(r, c)] = add_bond(index[(r, c)], index[(r, c + 1)], "h", r, c)
                horizontal.append(h_index[(r, c)])
        if r + 1 < n_rows:
            for c in range(n_cols):
                if (r, c) in index and (r + 1, c) in index and has_rung(r, c):
                    v_index[(r, c)] = add_bond(index[(r, c)], index[(r + 1, c)], "v", r, c)
                    vertical.append(v_index[(r, c)])
        columns = tuple(index.get((r, c)) for c in range(n_cols))
        rows.append(Row(r, columns, tuple(horizontal), tuple(vertical)))

    if center not in index:
        raise LatticeError(f"Central site {center} missing from {kind} {extents}")
    return LatticeGraph(
        kind=kind,
        extents=extents,
        sites=tuple(sites),
        bonds=tuple(bonds),
        plaquettes=tuple(tuple(p) for p in faces(h_index, v_index)),
        rows=tuple(rows),
        pinned_corner=index[(0, 0)],
        central_site=index[center],
    )


def _build_cubic(extents: Tuple[int, ...]) -> LatticeGraph:
    if len(extents) != 3:
        raise LatticeError(f"cubic3d takes (n_x, n_y, n_z) vertex counts, got {extents}")
    nx_, ny_, nz_ = extents

    def vid(x, y, z):
        return (z * ny_ + y) * nx_ + x

    sites = [
        Site(vid(x, y, z), (x, y, z), "A" if (x + y + z) % 2 == 0 else "B", z, y * nx_ + x)
        for z in range(nz_) for y in range(ny_) for x in range(nx_)
    ]
    bonds: List[Bond] = []
    edge: Dict[Tuple[int, int], int] = {}
    rows: List[Row] = []

    def add_edge(u, w, orientation, layer):
        a_site = u if sites[u].sublattice == "A" else w
        bonds.append(Bond(len(bonds), u, w, a_site, orientation, layer, sites[u].col))
        edge[(u, w)] = len(bonds) - 1
        return len(bonds) - 1

    for z in range(nz_):
        in_layer, up = [], []
        for y in range(ny_):
            for x in range(nx_ - 1):
                in_layer.append(add_edge(vid(x, y, z), vid(x + 1, y, z), "h", z))
        for y in range(ny_ - 1):
            for x in range(nx_):
                in_layer.append(add_edge(vid(x, y, z), vid(x, y + 1, z), "h", z))
        if z + 1 < nz_:
            for y in range(ny_):
                for x in range(nx_):
                    up.append(add_edge(vid(x, y, z), vid(x, y, z + 1), "v", z))
        columns = tuple(vid(x, y, z) for y in range(ny_) for x in range(nx_))
        rows.append(Row(z, columns, tuple(in_layer), tuple(up)))

    steps = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}

    def face(corner, d1, d2):
        """Face edges ordered left, up, right, down."""
        x, y, z = corner
        a, b = steps[d1], steps[d2]
        v0 = vid(x, y, z)
        v1 = vid(x + a[0], y + a[1], z + a[2])
        v2 = vid(x + b[0], y + b[1], z + b[2])
        v3 = vid(x + a[0] + b[0], y + a[1] + b[1], z + a[2] + b[2])
        return (edge[(v0, v2)], edge[(v2, v3)], edge[(v1, v3)], edge[(v0, v1)])

    plaquettes: List[Tuple[int, ...]] = []
    face_index: Dict[Tuple, int] = {}
    spans = {("x", "y"): (nx_ - 1, ny_ - 1, nz_), ("x", "z"): (nx_ - 1, ny_, nz_ - 1),
             ("y", "z"): (nx_, ny_ - 1, nz_ - 1)}
    for (d1, d2), (mx, my, mz) in spans.items():
        for z in range(mz):
            for y in range(my):
                for x in range(mx):
                    face_index[(d1, d2, x, y, z)] = len(plaquettes)
                    plaquettes.append(face((x, y, z), d1, d2))

    cubes = []
    for z in range(nz_ - 1):
        for y in range(ny_ - 1):
            for x in range(nx_ - 1):
                cubes.append((
                    face_index[("x", "y", x, y, z)], face_index[("x", "y", x, y, z + 1)],
                    face_index[("x", "z", x, y, z)], face_index[("x", "z", x, y + 1, z)],
                    face_index[("y", "z", x, y, z)], face_index[("y", "z", x + 1, y, z)],
                ))

    total = len(bonds) + len(plaquettes)
    if not bonds:
        raise LatticeError(f"cubic3d {extents} has no edges")
    if total > MAX_CUBIC_SPINS:
        raise LatticeError(f"cubic3d {extents} has {total} spins; only lattices up to "
                           f"{MAX_CUBIC_SPINS} spins (oracle scale) are supported")
    return LatticeGraph(
        kind="cubic3d",
        extents=extents,
        sites=tuple(sites),
        bonds=tuple(bonds),
        plaquettes=tuple(plaquettes),
        rows=tuple(rows),
        pinned_corner=0,
        central_site=vid(nx_ // 2, ny_ // 2, nz_ // 2),
        cubes=tuple(cubes),
    )


def _validate(graph: LatticeGraph):
    g = graph.to_networkx()
    if not nx.is_connected(g):
        raise LatticeError(f"{graph.kind} {graph.extents} is not connected")
    if not nx.is_bipartite(g):
        raise LatticeError(f"{graph.kind} {graph.extents} is not bipartite")
    for bond in graph.bonds:
        labels = {graph.sites[bond.site_i].sublattice, graph.sites[bond.site_j].sublattice}
        if labels != {"A", "B"}:
            raise LatticeError(f"Bond {bond.index} does not join an A site to a B site")
    uses: Dict[int, int] = {}
    for plaquette in graph.plaquettes:
        for b in plaquette:
            uses[b] = uses.get(b, 0) + 1
    if not graph.is_gauge_lattice and any(n > 2 for n in uses.values()):
        raise LatticeError("A bond borders more than two plaquettes")


def wilson_path(graph: LatticeGraph, site_a: int, site_b: int) -> List[int]:
    """Shortest bond path from site_a to site_b, lexicographically smallest by bond index."""
    for site in (site_a, site_b):
        if not 0 <= site < graph.n_sites:
            raise LatticeError(f"Site {site} does not exist (lattice has {graph.n_sites} sites)")
    if site_a == site_b:
        return []
    distance = nx.single_source_shortest_path_length(graph.to_networkx(), site_b)
    if site_a not in distance:
        raise DisconnectedPathError(site_a, site_b)

    incident: Dict[int, List[int]] = {s.index: [] for s in graph.sites}
    for bond in graph.bonds:
        incident[bond.site_i].append(bond.index)
        incident[bond.site_j].append(bond.index)

    path, current = [], site_a
    while current != site_b:
        for b in sorted(incident[current]):
            bond = graph.bonds[b]
            other = bond.site_j if bond.site_i == current else bond.site_i
            if distance.get(other, math.inf) == distance[current] - 1:
                path.append(b)
                current = other
                break
    return path


def designated_wilson_path(graph: LatticeGraph) -> Tuple[List[int], Tuple[int, int]]:
    """The straight path through the central row, with its two endpoint sites."""
    row = graph.rows[graph.sites[graph.central_site].row]
    present = [s for s in row.columns if s is not None]
    endpoints = (present[0], present[-1])
    return wilson_path(graph, *endpoints), endpoints


def path_endpoints(graph: LatticeGraph, bonds: Sequence[int]) -> List[int]:
    """Sites of odd degree in a bond set; empty for closed strings."""
    degree: Dict[int, int] = {}
    for b in bonds:
        for site in graph.bonds[b].sites:
            degree[site] = degree.get(site, 0) + 1
    return sorted(site for site, d in degree.items() if d % 2 == 1)


def bond_endpoints(graph: LatticeGraph) -> Tuple[np.ndarray, np.ndarray]:
    i = np.array([b.site_i for b in graph.bonds], dtype=np.int64)
    j = np.array([b.site_j for b in graph.bonds], dtype=np.int64)
    return i, j


def plaquette_products(graph: LatticeGraph, s: np.ndarray) -> np.ndarray:
    """Product of the outcomes around every plaquette."""
    if not graph.plaquettes:
        return np.ones(0, dtype=np.int8)
    s = np.asarray(s)
    return np.array([np.prod(s[list(p)]) for p in graph.plaquettes], dtype=np.int8)


def gauge_transform(graph: LatticeGraph, s: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """s_ij -> s_ij tau_i tau_j."""
    i, j = bond_endpoints(graph)
    tau = np.asarray(tau)
    return (np.asarray(s) * tau[i] * tau[j]).astype(np.int8)
