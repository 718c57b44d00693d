"""One-level ORAS and two-level (grid / DtN coarse space) preconditioners.

The one-level operator is sum_j R~_j^T A_{j,eps}^{-1} R_j with local Robin
solves built from the shifted problem.  Two-level variants add a coarse
correction Xi = Z E^{-1} Z* with E = Z* A_eps Z, either additively or in
hybrid (balancing) form Q M1 P + Xi with P = I - A_eps Xi, Q = I - Xi A_eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import HelmholtzParams, assemble_subdomain
from .decomposition import Decomposition
from .linalg import SparseFactorization, factorize, generalized_eig
from .mesh import SimplicialMesh, interpolation_matrix

__all__ = [
    "PreconditionerError",
    "SelectionPolicy",
    "selection_policy",
    "OneLevelORAS",
    "CoarseSpace",
    "TwoLevelPreconditioner",
    "build_one_level",
    "build_grid_cs",
    "build_dtn_cs",
]

EIG_RESIDUAL_TOL = 1e-8


class PreconditionerError(Exception):
    pass


@dataclass(frozen=True)
class SelectionPolicy:
    """Which interface eigenvectors enter the coarse space.

    automatic keeps all eigenvalues with real part below the wavenumber;
    fixed(m) keeps the m smallest by real part; capped(m) applies automatic
    then truncates to the m smallest.  Eigenvalues arrive sorted ascending by
    (real, imag, index), so selection is deterministic.
    """

    kind: str
    count: int | None = None

    def select(self, eigenvalues: np.ndarray, k: float) -> np.ndarray:
        n = len(eigenvalues)
        if self.kind == "automatic":
            return np.flatnonzero(eigenvalues.real < k)
        if self.kind == "fixed":
            return np.arange(min(self.count, n))
        if self.kind == "capped":
            auto = np.flatnonzero(eigenvalues.real < k)
            return auto[: self.count]
        raise PreconditionerError(f"unknown selection kind {self.kind!r}")

    def label(self) -> str:
        return self.kind if self.count is None else f"{self.kind}{self.count}"


def selection_policy(kind: str, m: int | None = None) -> SelectionPolicy:
    if kind == "automatic":
        return SelectionPolicy("automatic")
    if kind in ("fixed", "capped"):
        if m is None or m < 1:
            raise ValueError(f"{kind} selection needs m >= 1, got {m}")
        return SelectionPolicy(kind, m)
    raise ValueError(f"unknown selection kind {kind!r}")


class OneLevelORAS:
    """sum_j R~_j^T A_{j,eps}^{-1} R_j; immutable after construction."""

    def __init__(self, decomposition: Decomposition, factorizations: list):
        self.decomposition = decomposition
        self.factorizations = factorizations

    @property
    def n(self) -> int:
        return self.decomposition.mesh.n_vertices

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n, dtype=np.complex128)
        for sub, lu in zip(self.decomposition.subdomains, self.factorizations):
            out[sub.dofs] += sub.pou * lu.solve(v[sub.dofs])
        return out


def build_one_level(
    mesh: SimplicialMesh,
    decomposition: Decomposition,
    k: float,
    epsilon_prec: float,
    eta: float | None = None,
) -> OneLevelORAS:
    """Factorize every local Robin problem A_{j,eps_prec}; eta defaults to k."""
    params = HelmholtzParams(k=k, epsilon=epsilon_prec, eta=k if eta is None else eta)
    factorizations = []
    for sub in decomposition.subdomains:
        mats = assemble_subdomain(mesh, sub, params)
        try:
            factorizations.append(factorize(mats.A_local))
        except Exception as exc:
            raise PreconditionerError(
                f"local matrix of subdomain {sub.index} could not be factorized: {exc}"
            ) from exc
    return OneLevelORAS(decomposition, factorizations)


@dataclass(eq=False)
class CoarseSpace:
    """Coarse basis Z, Galerkin matrix E = Z* A_eps Z and its factorization."""

    kind: str
    Z: sp.csr_matrix
    E: sp.csc_matrix
    E_fact: SparseFactorization
    per_subdomain_counts: list | None = None
    eigenvalues: list | None = None  # selected eigenvalues per subdomain (dtn)

    _Zh: sp.csr_matrix = field(init=False, default=None)

    def __post_init__(self):
        self._Zh = self.Z.conj().T.tocsr()

    @property
    def n_cs(self) -> int:
        return self.Z.shape[1]

    def coarse_apply(self, v: np.ndarray) -> np.ndarray:
        """Xi v = Z E^{-1} Z* v."""
        return self.Z @ self.E_fact.solve(self._Zh @ v)

    def summary(self) -> dict:
        out = {"kind": self.kind, "n_cs": int(self.n_cs)}
        if self.per_subdomain_counts is not None:
            out["per_subdomain_counts"] = [int(c) for c in self.per_subdomain_counts]
        if self.eigenvalues is not None:
            out["selected_eigenvalues"] = [
                [[float(l.real), float(l.imag)] for l in lams] for lams in self.eigenvalues
            ]
        return out


def _galerkin_coarse_matrix(Z: sp.spmatrix, A_eps: sp.spmatrix):
    E = (Z.conj().T @ (A_eps @ Z)).tocsc()
    try:
        E_fact = factorize(E)
    except Exception as exc:
        raise PreconditionerError(f"coarse matrix E is singular: {exc}") from exc
    return E, E_fact


def build_grid_cs(
    coarse_mesh: SimplicialMesh, fine_mesh: SimplicialMesh, A_eps: sp.spmatrix
) -> CoarseSpace:
    """Coarse space spanned by the P1 basis of a coarser mesh (nodal interpolation).

    E = Z* A_eps Z then coincides with the coarse discretization of the shifted
    problem (boundary term through the Galerkin product).
    """
    Z = interpolation_matrix(coarse_mesh, fine_mesh).astype(np.complex128)
    E, E_fact = _galerkin_coarse_matrix(Z, A_eps)
    return CoarseSpace(kind="grid", Z=Z, E=E, E_fact=E_fact)


def build_dtn_cs(
    mesh: SimplicialMesh,
    decomposition: Decomposition,
    k: float,
    epsilon_prec: float,
    selection: SelectionPolicy,
    A_eps: sp.spmatrix,
    eta: float | None = None,
    eigenproblem_epsilon: float | None = None,
) -> CoarseSpace:
    """Coarse space from subdomain interface eigenvectors of the discrete DtN map.

    Per subdomain: form the Schur complement S = A_GG - A_GI A_II^{-1} A_IG of
    the Neumann-type matrix (I = all non-interface dofs), solve the generalized
    eigenproblem against the interface mass matrix, select eigenvectors, extend
    each into the subdomain by the discrete Helmholtz extension and scale by the
    partition of unity.  Columns of Z live in exactly one subdomain block; rows
    are shared across overlapping blocks.

    eigenproblem_epsilon overrides the absorption used when building the
    subdomain matrices for the eigenproblem (default: epsilon_prec).
    """
    eps_eig = epsilon_prec if eigenproblem_epsilon is None else eigenproblem_epsilon
    params = HelmholtzParams(k=k, epsilon=eps_eig, eta=k if eta is None else eta)

    rows_parts = []
    cols_parts = []
    vals_parts = []
    counts = []
    eigs = []
    col_offset = 0
    for sub in decomposition.subdomains:
        gamma = sub.interface_dofs
        if gamma.size == 0:
            counts.append(0)
            eigs.append([])
            continue
        mats = assemble_subdomain(mesh, sub, params)
        local = np.arange(sub.n_dofs)
        inner = np.setdiff1d(local, gamma, assume_unique=True)

        A = mats.A_neu.tocsc()
        A_II = A[inner][:, inner]
        A_IG = np.asarray(A[inner][:, gamma].todense())
        A_GI = np.asarray(A[gamma][:, inner].todense())
        A_GG = np.asarray(A[gamma][:, gamma].todense())
        M_GG = np.asarray(mats.M_interface.tocsc()[gamma][:, gamma].todense()).real

        try:
            lu = factorize(A_II)
        except Exception as exc:
            raise PreconditionerError(
                f"interior block of subdomain {sub.index} could not be factorized: {exc}"
            ) from exc
        X = lu.solve(A_IG) if inner.size else np.zeros((0, gamma.size), dtype=np.complex128)
        S = A_GG - A_GI @ X

        pairs = generalized_eig(S, M_GG)
        resid = np.linalg.norm(S @ pairs.vectors - (M_GG @ pairs.vectors) * pairs.values, axis=0)
        bound = EIG_RESIDUAL_TOL * (
            np.linalg.norm(S) + np.abs(pairs.values) * np.linalg.norm(M_GG)
        )
        worst = np.flatnonzero(resid > bound)
        if worst.size:
            raise PreconditionerError(
                f"eigenresidual {resid[worst[0]]:.2e} exceeds tolerance on subdomain {sub.index}"
            )

        chosen = selection.select(pairs.values, k)
        counts.append(len(chosen))
        eigs.append(list(pairs.values[chosen]))
        if len(chosen) == 0:
            continue

        G = pairs.vectors[:, chosen]
        norms = np.sqrt(np.real(np.einsum("ij,ij->j", G.conj(), M_GG @ G)))
        G = G / norms
        W = np.zeros((sub.n_dofs, len(chosen)), dtype=np.complex128)
        W[gamma] = G
        if inner.size:
            W[inner] = -X @ G
        W *= sub.pou[:, None]

        rows_parts.append(np.tile(sub.dofs, len(chosen)))
        cols_parts.append(np.repeat(col_offset + np.arange(len(chosen)), sub.n_dofs))
        vals_parts.append(W.T.ravel())
        col_offset += len(chosen)

    n_cs = col_offset
    if n_cs == 0:
        raise PreconditionerError("selection produced an empty coarse space")
    Z = sp.csr_matrix(
        (np.concatenate(vals_parts), (np.concatenate(rows_parts), np.concatenate(cols_parts))),
        shape=(mesh.n_vertices, n_cs),
    )
    Z.eliminate_zeros()
    col_nnz = np.diff(Z.tocsc().indptr)
    if (col_nnz == 0).any():
        raise PreconditionerError("DtN coarse space contains a zero column")
    E, E_fact = _galerkin_coarse_matrix(Z, A_eps)
    return CoarseSpace(
        kind="dtn", Z=Z, E=E, E_fact=E_fact, per_subdomain_counts=counts, eigenvalues=eigs
    )


class TwoLevelPreconditioner:
    """Additive (M1 + Xi) or hybrid (Q M1 P + Xi) two-level composition."""

    def __init__(
        self,
        one_level: OneLevelORAS,
        coarse: CoarseSpace,
        mode: str,
        A_eps: sp.spmatrix,
    ):
        if mode not in ("additive", "hybrid"):
            raise PreconditionerError(f"mode must be 'additive' or 'hybrid', got {mode!r}")
        self.one_level = one_level
        self.coarse = coarse
        self.mode = mode
        self.A_eps = A_eps.tocsr()

    def apply(self, v: np.ndarray) -> np.ndarray:
        xi_v = self.coarse.coarse_apply(v)
        if self.mode == "additive":
            return self.one_level.apply(v) + xi_v
        pv = v - self.A_eps @ xi_v
        t = self.one_level.apply(pv)
        qt = t - self.coarse.coarse_apply(self.A_eps @ t)
        return qt + xi_v
