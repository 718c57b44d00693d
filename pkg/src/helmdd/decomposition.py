"""Overlapping box decompositions, restriction operators and partitions of unity.

Subdomains start from the non-overlapping partition of the cell grid into
N_1d^d equal boxes and grow by overlap_layers cell layers in every direction
(clipped at the domain boundary), so facing subdomains overlap in a strip of
2*overlap_layers cells.  Dof classification is exact lattice arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product

import numpy as np

from .mesh import SimplicialMesh

__all__ = [
    "Subdomain",
    "Decomposition",
    "build_decomposition",
    "restrict",
    "prolongate_weighted",
    "decomposition_summary",
    "write_decomposition_summary",
]


@dataclass(frozen=True, eq=False)
class Subdomain:
    """One overlapping box: its elements, global dofs and dof classification.

    interior/interface/physical_boundary are local indices into dofs and
    partition it; interface dofs lie on the subdomain boundary but not on the
    physical boundary.  pou holds the partition-of-unity diagonal D_j aligned
    with dofs.
    """

    index: int
    cell_lo: tuple
    cell_hi: tuple
    elements: np.ndarray
    dofs: np.ndarray
    interior_dofs: np.ndarray
    interface_dofs: np.ndarray
    physical_boundary_dofs: np.ndarray
    pou: np.ndarray

    @property
    def n_dofs(self) -> int:
        return len(self.dofs)


@dataclass(frozen=True, eq=False)
class Decomposition:
    mesh: SimplicialMesh
    n_subdomains_1d: int
    overlap_layers: int
    pou_kind: str
    subdomains: list
    multiplicity: np.ndarray

    @property
    def n_subdomains(self) -> int:
        return len(self.subdomains)


def _box_ranges(m: int, n1d: int, box: tuple, overlap: int):
    base = m // n1d
    lo = tuple(max(0, b * base - overlap) for b in box)
    hi = tuple(min(m, (b + 1) * base + overlap) for b in box)
    return lo, hi


def _cells_in_box(m: int, dim: int, lo, hi) -> np.ndarray:
    ranges = [np.arange(lo[d], hi[d]) for d in range(dim)]
    if dim == 2:
        ids = ranges[1][:, None] * m + ranges[0][None, :]
    else:
        ids = (
            ranges[2][:, None, None] * m * m
            + ranges[1][None, :, None] * m
            + ranges[0][None, None, :]
        )
    return ids.ravel()


def _vertices_in_box(m: int, dim: int, lo, hi) -> np.ndarray:
    m1 = m + 1
    ranges = [np.arange(lo[d], hi[d] + 1) for d in range(dim)]
    if dim == 2:
        ids = ranges[1][:, None] * m1 + ranges[0][None, :]
    else:
        ids = (
            ranges[2][:, None, None] * m1 * m1
            + ranges[1][None, :, None] * m1
            + ranges[0][None, None, :]
        )
    return np.sort(ids.ravel())


def build_decomposition(
    mesh: SimplicialMesh,
    n_subdomains_1d: int,
    overlap_layers: int = 2,
    pou: str = "multiplicity",
) -> Decomposition:
    """Regular overlapping decomposition into n_subdomains_1d^dim boxes.

    pou selects the partition-of-unity weights: "multiplicity" (1/#covering
    subdomains, the default) or "ramp" (linear distance-to-interface weights,
    normalized so the algebraic identity still holds exactly).
    """
    m = mesh.intervals_per_edge
    n1d = n_subdomains_1d
    d = mesh.dim
    if n1d < 1:
        raise ValueError(f"n_subdomains_1d must be >= 1, got {n1d}")
    if m % n1d != 0:
        raise ValueError(f"mesh intervals ({m}) must be divisible by n_subdomains_1d ({n1d})")
    if n1d**d > mesh.n_simplices:
        raise ValueError(f"more subdomains ({n1d**d}) than cells")
    if overlap_layers < 1:
        raise ValueError(f"overlap_layers must be >= 1, got {overlap_layers}")
    if pou not in ("multiplicity", "ramp"):
        raise ValueError(f"unknown partition-of-unity kind {pou!r}")

    simplices_per_cell = 2 if d == 2 else 6
    boxes = []
    for combo in product(range(n1d), repeat=d):
        box = combo[::-1]  # x fastest
        boxes.append(box)

    raw = []
    for index, box in enumerate(boxes):
        lo, hi = _box_ranges(m, n1d, box, overlap_layers)
        cells = _cells_in_box(m, d, lo, hi)
        elements = (cells[:, None] * simplices_per_cell + np.arange(simplices_per_cell)).ravel()
        dofs = _vertices_in_box(m, d, lo, hi)
        raw.append((index, lo, hi, elements, dofs))

    multiplicity = np.zeros(mesh.n_vertices, dtype=np.int64)
    for _, _, _, _, dofs in raw:
        multiplicity[dofs] += 1
    assert multiplicity.min() >= 1  # covering is guaranteed by construction

    if pou == "ramp":
        raw_weights = []
        total = np.zeros(mesh.n_vertices)
        for _, lo, hi, _, dofs in raw:
            coords = mesh.grid_coordinates(dofs)
            dist = np.full(len(dofs), float(m + 1))
            for axis in range(d):
                if lo[axis] > 0:
                    dist = np.minimum(dist, coords[:, axis] - lo[axis])
                if hi[axis] < m:
                    dist = np.minimum(dist, hi[axis] - coords[:, axis])
            raw_weights.append(dist)
            total[dofs] += dist
        # dofs covered only at interface distance 0 cannot occur for overlap >= 1
        assert (total[np.concatenate([r[4] for r in raw])] > 0).all()

    subdomains = []
    for slot, (index, lo, hi, elements, dofs) in enumerate(raw):
        coords = mesh.grid_coordinates(dofs)
        on_box = np.zeros(len(dofs), dtype=bool)
        on_physical = np.zeros(len(dofs), dtype=bool)
        for axis in range(d):
            on_box |= (coords[:, axis] == lo[axis]) | (coords[:, axis] == hi[axis])
            on_physical |= (coords[:, axis] == 0) | (coords[:, axis] == m)
        local = np.arange(len(dofs))
        interface = local[on_box & ~on_physical]
        physical = local[on_physical]
        interior = local[~on_box & ~on_physical]
        if pou == "ramp":
            weights = raw_weights[slot] / total[dofs]
        else:
            weights = 1.0 / multiplicity[dofs]
        subdomains.append(
            Subdomain(
                index=index,
                cell_lo=lo,
                cell_hi=hi,
                elements=elements,
                dofs=dofs,
                interior_dofs=interior,
                interface_dofs=interface,
                physical_boundary_dofs=physical,
                pou=weights,
            )
        )

    return Decomposition(
        mesh=mesh,
        n_subdomains_1d=n1d,
        overlap_layers=overlap_layers,
        pou_kind=pou,
        subdomains=subdomains,
        multiplicity=multiplicity,
    )


def restrict(sub: Subdomain, v: np.ndarray) -> np.ndarray:
    """Gather v at the subdomain's global dofs (R_j v)."""
    v = np.asarray(v)
    if v.shape[0] <= sub.dofs[-1]:
        raise ValueError(f"vector of size {v.shape[0]} too short for subdomain dofs")
    return v[sub.dofs]


def prolongate_weighted(sub: Subdomain, w: np.ndarray, accumulator: np.ndarray) -> np.ndarray:
    """Scatter-add the weighted local vector: accumulator += R_j^T D_j w."""
    w = np.asarray(w)
    if w.shape[0] != sub.n_dofs:
        raise ValueError(f"local vector has size {w.shape[0]}, expected {sub.n_dofs}")
    accumulator[sub.dofs] += sub.pou * w
    return accumulator


def decomposition_summary(dec: Decomposition) -> dict:
    sizes = [sub.n_dofs for sub in dec.subdomains]
    return {
        "n_subdomains": dec.n_subdomains,
        "n_subdomains_1d": dec.n_subdomains_1d,
        "overlap_layers": dec.overlap_layers,
        "pou": dec.pou_kind,
        "dofs_per_subdomain": {
            "min": int(min(sizes)),
            "max": int(max(sizes)),
            "mean": float(np.mean(sizes)),
        },
        "interface_dofs_per_subdomain": [int(len(s.interface_dofs)) for s in dec.subdomains],
        "max_multiplicity": int(dec.multiplicity.max()),
        "overlap_dofs": int((dec.multiplicity > 1).sum()),
    }


def write_decomposition_summary(dec: Decomposition, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(decomposition_summary(dec), fh, indent=2)
        fh.write("\n")
