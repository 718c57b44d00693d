"""P1 finite-element assembly for the Helmholtz bilinear form with absorption.

The assembled operator is  K - (k^2 + i*eps) M - i*eta B  where K is the
stiffness matrix, M the domain mass matrix and B the boundary mass matrix of
the Robin term.  Element integrals are exact for P1, so K, M and B carry no
quadrature error; only the right-hand side uses (vertex-lumped) quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import SimplicialMesh

__all__ = [
    "AssemblyError",
    "HelmholtzParams",
    "SubdomainMatrices",
    "stiffness_matrix",
    "mass_matrix",
    "boundary_mass_matrix",
    "facet_mass_matrix",
    "assemble_global",
    "assemble_rhs",
    "assemble_subdomain",
    "lumped_mass_weights",
    "constant_source",
    "write_matrix_coo",
]


class AssemblyError(Exception):
    pass


def _default_eta(k: float, epsilon: float) -> float:
    # eta = sign(eps) * k for eps != 0, eta = k for eps = 0
    if epsilon == 0.0:
        return k
    return math.copysign(k, epsilon)


@dataclass(frozen=True)
class HelmholtzParams:
    """Wavenumber, absorption shift and Robin coefficient (resolved at init)."""

    k: float
    epsilon: float = 0.0
    eta: float = None  # type: ignore[assignment]  # None -> default sign rule

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"wavenumber must be positive, got {self.k}")
        if self.eta is None:
            object.__setattr__(self, "eta", _default_eta(self.k, self.epsilon))


@dataclass(frozen=True)
class SubdomainMatrices:
    """Local matrices of one subdomain, all in the subdomain's dof indexing.

    A_local carries the Robin term on the whole subdomain boundary (the ORAS
    local problem); A_neu carries it only on the physical-boundary part, so its
    interface block is of Neumann type; M_interface is the mass matrix of the
    interface facets (real symmetric, positive definite on the interface dofs).
    """

    A_local: sp.csr_matrix
    A_neu: sp.csr_matrix
    M_interface: sp.csr_matrix
    interface_facets: np.ndarray
    physical_facets: np.ndarray


def _element_geometry(vertices: np.ndarray, simplices: np.ndarray, dim: int):
    pts = vertices[simplices]
    edges = pts[:, 1:, :] - pts[:, :1, :]  # (ne, d, d)
    det = np.linalg.det(edges)
    vol = det / math.factorial(dim)
    bad = np.flatnonzero(vol <= 0)
    if bad.size:
        raise AssemblyError(f"degenerate simplex (non-positive volume) at index {bad[0]}")
    inv = np.linalg.inv(edges)
    grads = np.empty((len(simplices), dim + 1, dim))
    grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    return vol, grads


def _scatter(indices: np.ndarray, element_matrices: np.ndarray, n: int) -> sp.csr_matrix:
    """Deterministic scatter-add of element matrices into a global CSR matrix.

    Duplicates are summed with a stable sort + reduceat, so symmetric element
    matrices yield a bitwise-symmetric global matrix.
    """
    q = indices.shape[1]
    rows = np.repeat(indices, q, axis=1).ravel()
    cols = np.tile(indices, (1, q)).ravel()
    key = rows.astype(np.int64) * n + cols
    order = np.argsort(key, kind="stable")
    ks = key[order]
    vs = element_matrices.ravel()[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(ks)) + 1])
    sums = np.add.reduceat(vs, starts)
    ukeys = ks[starts]
    A = sp.csr_matrix((sums, (ukeys // n, ukeys % n)), shape=(n, n))
    A.sort_indices()
    return A


def stiffness_matrix(mesh: SimplicialMesh) -> sp.csr_matrix:
    vol, grads = _element_geometry(mesh.vertices, mesh.simplices, mesh.dim)
    ke = np.einsum("e,eid,ejd->eij", vol, grads, grads)
    return _scatter(mesh.simplices, ke, mesh.n_vertices)


def mass_matrix(mesh: SimplicialMesh) -> sp.csr_matrix:
    vol, _ = _element_geometry(mesh.vertices, mesh.simplices, mesh.dim)
    d = mesh.dim
    template = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    me = vol[:, None, None] * template[None, :, :]
    return _scatter(mesh.simplices, me, mesh.n_vertices)


def _facet_measures(vertices: np.ndarray, facets: np.ndarray, dim: int) -> np.ndarray:
    pts = vertices[facets]
    if dim == 2:
        meas = np.linalg.norm(pts[:, 1, :] - pts[:, 0, :], axis=1)
    else:
        cr = np.cross(pts[:, 1, :] - pts[:, 0, :], pts[:, 2, :] - pts[:, 0, :])
        meas = 0.5 * np.linalg.norm(cr, axis=1)
    if np.any(meas <= 0):
        raise AssemblyError("degenerate boundary facet (zero measure)")
    return meas


def facet_mass_matrix(vertices: np.ndarray, facets: np.ndarray, dim: int, n: int) -> sp.csr_matrix:
    """Mass matrix of the (d-1)-dimensional facet set, scattered into n dofs."""
    if len(facets) == 0:
        return sp.csr_matrix((n, n))
    q = dim  # facet vertex count
    meas = _facet_measures(vertices, facets, dim)
    template = (np.ones((q, q)) + np.eye(q)) / (q * (q + 1))
    fe = meas[:, None, None] * template[None, :, :]
    return _scatter(np.asarray(facets), fe, n)


def boundary_mass_matrix(mesh: SimplicialMesh) -> sp.csr_matrix:
    return facet_mass_matrix(mesh.vertices, mesh.boundary_facets, mesh.dim, mesh.n_vertices)


def assemble_global(
    mesh: SimplicialMesh,
    params: HelmholtzParams,
    include_stiffness: bool = True,
    include_mass: bool = True,
    include_boundary: bool = True,
) -> sp.csr_matrix:
    """Assemble K - (k^2 + i*eps) M - i*eta B on the whole mesh (complex CSR).

    The include_* switches isolate individual terms for testing; the full
    operator is complex symmetric (A == A.T entrywise) but not Hermitian.
    """
    n = mesh.n_vertices
    A = sp.csr_matrix((n, n), dtype=np.complex128)
    if include_stiffness:
        A = A + stiffness_matrix(mesh).astype(np.complex128)
    if include_mass:
        A = A + (-(params.k**2) - 1j * params.epsilon) * mass_matrix(mesh)
    if include_boundary:
        A = A + (-1j * params.eta) * boundary_mass_matrix(mesh)
    A.sort_indices()
    return A


def lumped_mass_weights(mesh: SimplicialMesh) -> np.ndarray:
    """Row sums of the mass matrix: vol(support of phi_v)/(d+1) per vertex."""
    pts = mesh.vertices[mesh.simplices]
    edges = pts[:, 1:, :] - pts[:, :1, :]
    vol = np.linalg.det(edges) / math.factorial(mesh.dim)
    w = np.zeros(mesh.n_vertices)
    np.add.at(w, mesh.simplices.ravel(), np.repeat(vol / (mesh.dim + 1), mesh.dim + 1))
    return w


def _gauss2d(points: np.ndarray) -> np.ndarray:
    r2 = (points[:, 0] - 0.5) ** 2 + (points[:, 1] - 0.5) ** 2
    return -np.exp(-100.0 * r2)


def _gauss3d(points: np.ndarray) -> np.ndarray:
    r2 = ((points - 0.5) ** 2).sum(axis=1)
    return -np.exp(-400.0 * r2)


_NAMED_SOURCES = {"gauss2d": (2, _gauss2d), "gauss3d": (3, _gauss3d)}


def constant_source(value: float):
    def f(points: np.ndarray) -> np.ndarray:
        return np.full(len(points), value, dtype=float)

    return f


def assemble_rhs(mesh: SimplicialMesh, source) -> np.ndarray:
    """Load vector (f)_v = f(x_v) * lumped_weight(v); deterministic vertex quadrature.

    source is either a registered name ("gauss2d", "gauss3d") or a callable
    mapping an (n, dim) point array to n values.
    """
    if isinstance(source, str):
        try:
            want_dim, fn = _NAMED_SOURCES[source]
        except KeyError:
            raise ValueError(f"unknown source {source!r}") from None
        if want_dim != mesh.dim:
            raise ValueError(f"source {source!r} is {want_dim}d but mesh is {mesh.dim}d")
    else:
        fn = source
    values = np.asarray(fn(mesh.vertices), dtype=np.complex128)
    if values.shape != (mesh.n_vertices,):
        raise ValueError("source must return one value per vertex")
    return values * lumped_mass_weights(mesh)


def _facet_on_physical_boundary(mesh: SimplicialMesh, facets: np.ndarray) -> np.ndarray:
    """True where all facet vertices share a lattice coordinate 0 or m in some axis."""
    m = mesh.intervals_per_edge
    coords = mesh.grid_coordinates(facets.ravel()).reshape(facets.shape + (mesh.dim,))
    at_lo = (coords == 0).all(axis=1)
    at_hi = (coords == m).all(axis=1)
    return (at_lo | at_hi).any(axis=1)


def assemble_subdomain(mesh: SimplicialMesh, subdomain, params: HelmholtzParams) -> SubdomainMatrices:
    """Assemble the local Robin, Neumann-type and interface-mass matrices.

    All three share the subdomain's local dof indexing (subdomain.dofs order).
    """
    if len(subdomain.elements) == 0:
        raise AssemblyError(f"subdomain {subdomain.index} has no elements")
    dofs = subdomain.dofs
    n_loc = len(dofs)
    local_simplices = np.searchsorted(dofs, mesh.simplices[subdomain.elements])
    local_vertices = mesh.vertices[dofs]

    vol, grads = _element_geometry(local_vertices, local_simplices, mesh.dim)
    ke = np.einsum("e,eid,ejd->eij", vol, grads, grads)
    K = _scatter(local_simplices, ke, n_loc)
    d = mesh.dim
    template = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    M = _scatter(local_simplices, vol[:, None, None] * template[None, :, :], n_loc)

    from .mesh import _boundary_facets  # facet extraction shared with mesh construction

    local_bfacets = _boundary_facets(local_simplices)
    global_bfacets = dofs[local_bfacets]
    physical = _facet_on_physical_boundary(mesh, global_bfacets)
    phys_facets = local_bfacets[physical]
    intf_facets = local_bfacets[~physical]

    B_phys = facet_mass_matrix(local_vertices, phys_facets, d, n_loc)
    B_intf = facet_mass_matrix(local_vertices, intf_facets, d, n_loc)

    volume_part = K.astype(np.complex128) + (-(params.k**2) - 1j * params.epsilon) * M
    A_neu = volume_part + (-1j * params.eta) * B_phys
    A_local = A_neu + (-1j * params.eta) * B_intf
    A_local.sort_indices()
    A_neu.sort_indices()
    return SubdomainMatrices(
        A_local=A_local,
        A_neu=A_neu,
        M_interface=B_intf,
        interface_facets=intf_facets,
        physical_facets=phys_facets,
    )


def write_matrix_coo(A, path) -> None:
    """Coordinate text dump (row col re im) for cross-checking against other tools."""
    coo = sp.coo_matrix(A)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            v = complex(v)
            fh.write(f"{r} {c} {v.real!r} {v.imag!r}\n")
