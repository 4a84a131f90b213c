"""
Lattice data model
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import networkx as nx


@dataclass(frozen=True)
class Site:
    index: int
    coords: Tuple[int, ...]
    sublattice: str  # 'A' or 'B'
    row: int
    col: int


@dataclass(frozen=True)
class Bond:
    """An ancilla bond between two sites.

    `a_site` is the endpoint on sublattice A; its gate runs for t_A, the other for t_B.
    `orientation` is 'h' for bonds inside a contraction row and 'v' for bonds joining
    row `row` to row `row + 1` (in 3D, the layer `row` to `row + 1`).
    """
    index: int
    site_i: int
    site_j: int
    a_site: int
    orientation: str
    row: int
    col: int

    @property
    def sites(self) -> Tuple[int, int]:
        return (self.site_i, self.site_j)


@dataclass(frozen=True)
class Row:
    """One contraction row: a site (or None) per column, its in-row bonds and the rungs above it."""
    index: int
    columns: Tuple[Optional[int], ...]
    horizontal_bonds: Tuple[int, ...]
    vertical_bonds: Tuple[int, ...]


@dataclass(frozen=True)
class LatticeGraph:
    kind: str
    extents: Tuple[int, ...]
    sites: Tuple[Site, ...]
    bonds: Tuple[Bond, ...]
    plaquettes: Tuple[Tuple[int, ...], ...]
    rows: Tuple[Row, ...]
    pinned_corner: int
    central_site: int
    cubes: Tuple[Tuple[int, ...], ...] = field(default_factory=tuple)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def n_plaquettes(self) -> int:
        return len(self.plaquettes)

    @property
    def width(self) -> int:
        return max(len(row.columns) for row in self.rows)

    @property
    def is_gauge_lattice(self) -> bool:
        """True when the sigma spins live on bonds and ancillas on plaquettes (cubic3d)."""
        return self.kind == "cubic3d"

    @property
    def total_spins(self) -> int:
        if self.is_gauge_lattice:
            return self.n_bonds + self.n_plaquettes
        return self.n_sites + self.n_bonds

    def site_at(self, row: int, col: int) -> Optional[int]:
        if 0 <= row < len(self.rows) and 0 <= col < len(self.rows[row].columns):
            return self.rows[row].columns[col]
        return None

    def bonds_of_site(self, site: int) -> List[int]:
        return [b.index for b in self.bonds if site in b.sites]

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        for site in self.sites:
            graph.add_node(site.index, sublattice=site.sublattice, coords=site.coords)
        for bond in self.bonds:
            graph.add_edge(bond.site_i, bond.site_j, bond=bond.index)
        return graph

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "extents": list(self.extents),
            "n_sites": self.n_sites,
            "n_bonds": self.n_bonds,
            "n_plaquettes": self.n_plaquettes,
            "total_spins": self.total_spins,
            "pinned_corner": self.pinned_corner,
            "central_site": self.central_site,
            "sites": [
                {"index": s.index, "coords": list(s.coords), "sublattice": s.sublattice,
                 "row": s.row, "col": s.col}
                for s in self.sites
            ],
            "bonds": [
                {"index": b.index, "sites": [b.site_i, b.site_j], "a_site": b.a_site,
                 "orientation": b.orientation}
                for b in self.bonds
            ],
            "plaquettes": [list(p) for p in self.plaquettes],
            "cubes": [list(c) for c in self.cubes],
            "rows": [
                {"index": r.index, "columns": list(r.columns),
                 "horizontal_bonds": list(r.horizontal_bonds),
                 "vertical_bonds": list(r.vertical_bonds)}
                for r in self.rows
            ],
        }
