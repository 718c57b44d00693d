"""Single Helmholtz solve: assemble, decompose, precondition, run GMRES.

The solved system always has zero absorption (eta = k on the physical
boundary); absorption eps_prec = k^beta enters only through the preconditioner,
which is built from the shifted operator.  A debug switch allows solving the
shifted system directly.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mesh as meshmod
from .assembly import HelmholtzParams, assemble_global, assemble_rhs
from .decomposition import build_decomposition
from .linalg import gmres, random_initial_guess
from .preconditioner import (
    SelectionPolicy,
    TwoLevelPreconditioner,
    build_dtn_cs,
    build_grid_cs,
    build_one_level,
    selection_policy,
)

__all__ = ["SolveConfig", "SolveReport", "SolverContext", "setup", "solve", "verify_solution"]

PRECONDITIONERS = ("none", "one_level", "two_level_grid", "two_level_dtn")


@dataclass
class SolveConfig:
    """Full description of one experiment run.

    n_subdomains_1d and coarse_m override the k-driven defaults (floor(k^alpha)
    and floor(k^alpha')); beta = None disables absorption in the preconditioner.
    """

    dim: int = 2
    k: float = 10.0
    alpha: float = 1.0
    alpha_prime: float | None = None  # defaults to alpha
    beta: float | None = 1.0  # eps_prec = k^beta; None -> 0
    precon: str = "two_level_dtn"
    mode: str = "hybrid"
    selection: SelectionPolicy = field(default_factory=lambda: selection_policy("automatic"))
    tol: float = 1e-6
    max_iter: int = 500
    seed: int = 0
    overlap_layers: int = 2
    pou: str = "ramp"  # ramp weights reproduce the reference iteration counts
    n_subdomains_1d: int | None = None
    coarse_m: int | None = None
    solve_epsilon: float = 0.0  # absorption of the *solved* system (debug only)
    coarse_from_unshifted: bool = False  # build E, P, Q from A_0 instead of A_eps
    dtn_unshifted: bool = False  # eigenproblems from eps = 0 matrices

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.precon not in PRECONDITIONERS:
            raise ValueError(f"precon must be one of {PRECONDITIONERS}, got {self.precon!r}")
        if self.mode not in ("additive", "hybrid"):
            raise ValueError(f"mode must be additive or hybrid, got {self.mode!r}")
        if self.alpha_prime is None:
            self.alpha_prime = self.alpha
        if isinstance(self.selection, str):
            self.selection = _parse_selection(self.selection)

    @property
    def epsilon_prec(self) -> float:
        return 0.0 if self.beta is None else self.k**self.beta

    def to_dict(self) -> dict:
        d = asdict(self)
        d["selection"] = self.selection.label()
        return d


def _parse_selection(text: str) -> SelectionPolicy:
    if text in ("automatic", "auto"):
        return selection_policy("automatic")
    for kind in ("fixed", "capped"):
        if text.startswith(kind):
            rest = text[len(kind):].lstrip(":")
            return selection_policy(kind, int(rest))
    raise ValueError(f"cannot parse selection policy {text!r}")


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    n: int
    N_sub: int
    n_CS: int
    residual_history: np.ndarray
    timings: dict
    config: dict
    seed: int
    final_residual: float  # independently recomputed ||f - A0 x|| / ||f||
    coarse_info: dict | None = None
    solution: np.ndarray | None = None  # not serialized

    def to_dict(self) -> dict:
        return {
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "n": int(self.n),
            "N_sub": int(self.N_sub),
            "n_CS": int(self.n_CS),
            "residual_history": [float(r) for r in self.residual_history],
            "timings": {k: float(v) for k, v in self.timings.items()},
            "config": self.config,
            "seed": int(self.seed),
            "final_residual": float(self.final_residual),
            "coarse_info": self.coarse_info,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


class SolverContext:
    """Assembled system and preconditioner, reusable across seeds."""

    def __init__(self, config: SolveConfig):
        self.config = config
        k = config.k
        t0 = time.perf_counter()
        n1d = config.n_subdomains_1d
        if n1d is None:
            n1d = meshmod.subdomains_per_dimension(k, config.alpha)
        self.n1d = n1d
        m = meshmod.fine_resolution(k, n1d)
        self.mesh = meshmod.build_uniform_mesh(config.dim, m)
        solve_params = HelmholtzParams(k=k, epsilon=config.solve_epsilon, eta=k)
        self.A0 = assemble_global(self.mesh, solve_params)
        self.f = assemble_rhs(self.mesh, "gauss2d" if config.dim == 2 else "gauss3d")
        t1 = time.perf_counter()

        self.decomposition = None
        self.precon = None
        self.n_cs = 0
        self.coarse_info = None
        if config.precon != "none":
            self.decomposition = build_decomposition(
                self.mesh, n1d, config.overlap_layers, pou=config.pou
            )
            one_level = build_one_level(self.mesh, self.decomposition, k, config.epsilon_prec)
            if config.precon == "one_level":
                self.precon = one_level
            else:
                if config.coarse_from_unshifted and config.solve_epsilon == 0.0:
                    A_eps = self.A0
                else:
                    eps = 0.0 if config.coarse_from_unshifted else config.epsilon_prec
                    A_eps = assemble_global(self.mesh, HelmholtzParams(k=k, epsilon=eps, eta=k))
                if config.precon == "two_level_grid":
                    mc = config.coarse_m
                    if mc is None:
                        mc = meshmod.coarse_resolution(k, config.alpha_prime)
                    coarse_mesh = meshmod.build_uniform_mesh(config.dim, mc)
                    cs = build_grid_cs(coarse_mesh, self.mesh, A_eps)
                else:
                    cs = build_dtn_cs(
                        self.mesh,
                        self.decomposition,
                        k,
                        config.epsilon_prec,
                        config.selection,
                        A_eps,
                        eigenproblem_epsilon=0.0 if config.dtn_unshifted else None,
                    )
                self.n_cs = cs.n_cs
                self.coarse_info = cs.summary()
                self.precon = TwoLevelPreconditioner(one_level, cs, config.mode, A_eps)
        t2 = time.perf_counter()
        self.timings = {"assembly": t1 - t0, "setup": t2 - t1}

    @property
    def n(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_subdomains(self) -> int:
        return 0 if self.decomposition is None else self.decomposition.n_subdomains

    def run(self, seed: int | None = None) -> SolveReport:
        config = self.config
        seed = config.seed if seed is None else seed
        x0 = random_initial_guess(self.n, seed)
        apply_M = self.precon.apply if self.precon is not None else None
        t0 = time.perf_counter()
        outcome = gmres(
            self.A0,
            self.f,
            apply_M=apply_M,
            x0=x0,
            tol=config.tol,
            max_iter=config.max_iter,
        )
        solve_seconds = time.perf_counter() - t0
        final = verify_solution(outcome.solution, self.A0, self.f)
        timings = dict(self.timings)
        timings["solve"] = solve_seconds
        return SolveReport(
            iterations=outcome.iterations,
            converged=outcome.converged,
            n=self.n,
            N_sub=self.n_subdomains,
            n_CS=self.n_cs,
            residual_history=outcome.residual_history,
            timings=timings,
            config=config.to_dict(),
            seed=seed,
            final_residual=final,
            coarse_info=self.coarse_info,
            solution=outcome.solution,
        )


def setup(config: SolveConfig) -> SolverContext:
    return SolverContext(config)


def solve(config: SolveConfig) -> SolveReport:
    """Assemble, precondition and solve one configuration (see SolverContext.run)."""
    return SolverContext(config).run()


def verify_solution(solution, A0, f) -> float:
    """Recompute ||f - A0 x|| / ||f|| independently of the GMRES internals.

    Accepts a SolveReport or a raw solution vector.
    """
    x = solution.solution if isinstance(solution, SolveReport) else np.asarray(solution)
    norm_f = np.linalg.norm(f)
    if norm_f == 0:
        return float(np.linalg.norm(A0 @ x))
    return float(np.linalg.norm(f - A0 @ x) / norm_f)
