"""Simultaneous sparse approximation baselines over one concatenated dictionary.

Both competitors fit S = Omega C + noise with a row-sparse coefficient matrix
C, so every channel shares one sparsity profile but, unlike the multichannel
group lasso, nothing constrains the low-resonance part to be identical across
channels.

* SOMP greedily selects the atom with the largest summed absolute correlation
  and refits the selected set by least squares per channel.
* bcd_l1l2 minimizes (1/2)||S - Omega C||_F^2 + lambda * sum_i ||row_i(C)||_2
  by cyclic row updates; unit-norm atoms make each update an exact
  multivariate soft-threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from ._kernels import cd_fit
from .solver import contiguous_folds

__all__ = [
    "SsaProblem",
    "SompResult",
    "BcdResult",
    "somp",
    "somp_select",
    "bcd_l1l2",
    "bcd_select",
]

_UNIT_NORM_TOL = 1e-10
_CHOL_FLOOR = 1e-10


@dataclass(frozen=True)
class SsaProblem:
    """Signals (n x K) and a unit-norm dictionary (n x m)."""

    s: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim != 2 or s.shape[0] != omega.shape[0]:
            raise ValueError("signal matrix and dictionary must share n rows")
        err = np.abs(np.linalg.norm(omega, axis=0) - 1.0).max()
        if err > _UNIT_NORM_TOL:
            raise ValueError(
                f"dictionary columns must have unit norm (max deviation {err:.2e})"
            )
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "omega", omega)

    @property
    def n(self) -> int:
        return self.omega.shape[0]

    @property
    def m(self) -> int:
        return self.omega.shape[1]

    @property
    def n_channels(self) -> int:
        return self.s.shape[1]


@dataclass
class SompResult:
    coefficients: np.ndarray       # (m, K), nonzero only on selected rows
    selected: list[int]            # atoms in selection order
    rank_deficient: bool
    residual_sq_path: np.ndarray   # sum-of-squares residual after each step


@dataclass
class BcdResult:
    coefficients: np.ndarray
    lam: float
    objective_trace: np.ndarray
    iterations: int
    converged: bool


class _GreedyPath:
    """Shared SOMP recursion on precomputed normal equations.

    Works on Gram/correlation matrices so CV folds can reuse it with
    row-restricted data.  ``atom_norms`` rescales the selection score when
    columns are not unit-norm (restricted rows); on unit-norm dictionaries the
    score is exactly the summed absolute correlation.
    """

    def __init__(self, gram, corr0, atom_norms=None):
        self.gram = gram
        self.corr0 = corr0
        self.m = gram.shape[0]
        self.selected: list[int] = []
        self.chol = np.zeros((0, 0))
        self.coef = np.zeros((0, corr0.shape[1]))
        self.rank_deficient = False
        if atom_norms is None:
            self.score_scale = np.ones(self.m)
        else:
            safe = np.where(atom_norms > 1e-12, atom_norms, np.inf)
            self.score_scale = 1.0 / safe

    def step(self) -> bool:
        """Select one more atom and refit; False when selection must stop."""
        corr = self.corr0 - self.gram[:, self.selected] @ self.coef
        scores = np.abs(corr).sum(axis=1) * self.score_scale
        if self.selected:
            scores[self.selected] = -np.inf
        atom = int(np.argmax(scores))
        if not np.isfinite(scores[atom]) or scores[atom] <= 0.0:
            return False
        # grow the Cholesky factor of gram[selected, selected]
        t = len(self.selected)
        cross = self.gram[self.selected, atom] if t else np.zeros(0)
        w = (
            solve_triangular(self.chol, cross, lower=True)
            if t
            else np.zeros(0)
        )
        pivot = self.gram[atom, atom] - w @ w
        if pivot <= _CHOL_FLOOR:
            self.rank_deficient = True
            return False
        new_chol = np.zeros((t + 1, t + 1))
        new_chol[:t, :t] = self.chol
        new_chol[t, :t] = w
        new_chol[t, t] = np.sqrt(pivot)
        self.chol = new_chol
        self.selected.append(atom)
        rhs = self.corr0[self.selected]
        half = solve_triangular(self.chol, rhs, lower=True)
        self.coef = solve_triangular(self.chol.T, half, lower=False)
        return True


def somp(problem: SsaProblem, t: int) -> SompResult:
    """Simultaneous orthogonal matching pursuit with a sparsity budget ``t``."""
    if not 1 <= t <= min(problem.n, problem.m):
        raise ValueError("sparsity budget must satisfy 1 <= t <= min(n, m)")
    path = _GreedyPath(problem.omega.T @ problem.omega,
                       problem.omega.T @ problem.s)
    resid_path = []
    for _ in range(t):
        if not path.step():
            break
        resid = problem.s - problem.omega[:, path.selected] @ path.coef
        resid_path.append(float(np.sum(resid * resid)))
    coefficients = np.zeros((problem.m, problem.n_channels))
    if path.selected:
        coefficients[path.selected] = path.coef
    return SompResult(
        coefficients=coefficients,
        selected=list(path.selected),
        rank_deficient=path.rank_deficient,
        residual_sq_path=np.array(resid_path),
    )


def somp_select(problem: SsaProblem, t_max: int, n_folds: int = 5, folds=None):
    """Choose the SOMP budget by V-fold CV over rows.

    The greedy path is nested, so each fold runs once to ``t_max`` and the
    held-out error of every prefix is reused.  Ties prefer the smaller budget.
    Returns (t_star, cv_errors) with cv_errors[t-1] the error at budget t.
    """
    t_max = int(min(t_max, problem.m))
    if folds is None:
        folds = contiguous_folds(problem.n, n_folds)
    total = np.zeros(t_max)
    held = 0
    for test_rows in folds:
        mask = np.ones(problem.n, dtype=bool)
        mask[test_rows] = False
        om_tr, om_te = problem.omega[mask], problem.omega[test_rows]
        s_tr, s_te = problem.s[mask], problem.s[test_rows]
        held += s_te.size
        norms = np.linalg.norm(om_tr, axis=0)
        path = _GreedyPath(om_tr.T @ om_tr, om_tr.T @ s_tr, atom_norms=norms)
        last_err = float(np.sum(s_te * s_te))
        for t in range(1, t_max + 1):
            if path.step():
                diff = s_te - om_te[:, path.selected] @ path.coef
                last_err = float(np.sum(diff * diff))
            total[t - 1] += last_err
    errors = total / held
    return int(np.argmin(errors)) + 1, errors


def _bcd_state(omega, s):
    m, k = omega.shape[1], s.shape[1]
    return {
        "alpha": np.zeros(0),
        "beta": np.zeros((m, k)),
        "z_a": np.zeros(0),
        "z_b": omega.T @ s,
        "rss": float(np.sum(s * s)),
    }


def _bcd_run(state, gram, lam, tol, max_sweeps):
    trace = np.empty(max_sweeps)
    empty_a = np.zeros((0, 0))
    empty_ab = np.zeros((0, gram.shape[0]))
    sweeps, converged, rss, n_trace = cd_fit(
        empty_a,
        empty_ab,
        np.ascontiguousarray(empty_ab.T),
        gram,
        np.zeros(0),
        np.ascontiguousarray(np.diag(gram)),
        1,
        state["z_a"],
        state["z_b"],
        state["alpha"],
        state["beta"],
        0.0,
        lam,
        state["rss"],
        tol,
        max_sweeps,
        trace,
    )
    state["rss"] = rss
    return trace[:n_trace].copy(), int(sweeps), bool(converged)


def bcd_l1l2(
    problem: SsaProblem,
    lam: float,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
) -> BcdResult:
    """Row-sparse l1/l2 relaxation solved by cyclic block coordinate descent."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    state = _bcd_state(problem.omega, problem.s)
    gram = problem.omega.T @ problem.omega
    trace, sweeps, converged = _bcd_run(state, gram, lam, tol, max_sweeps)
    return BcdResult(
        coefficients=state["beta"],
        lam=float(lam),
        objective_trace=0.5 * trace,
        iterations=sweeps,
        converged=converged,
    )


def bcd_lambda_max(problem: SsaProblem) -> float:
    """Smallest lambda with an all-zero solution (row-wise correlation bound)."""
    return float(np.linalg.norm(problem.omega.T @ problem.s, axis=1).max(initial=0.0))


def bcd_select(
    problem: SsaProblem,
    n_folds: int = 5,
    grid_size: int = 100,
    min_ratio: float = 1e-3,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
    folds=None,
):
    """Choose the BCD penalty by V-fold CV with a warm-started path.

    Returns (lam_star, grid, cv_errors); ties prefer the larger lambda.
    """
    lam_max = bcd_lambda_max(problem)
    if lam_max == 0.0:
        return 0.0, np.zeros(1), np.zeros(1)
    grid = np.geomspace(lam_max, lam_max * min_ratio, grid_size)
    if folds is None:
        folds = contiguous_folds(problem.n, n_folds)
    gram_full = problem.omega.T @ problem.omega
    total = np.zeros(grid.size)
    held = 0
    for test_rows in folds:
        mask = np.ones(problem.n, dtype=bool)
        mask[test_rows] = False
        om_te, s_te = problem.omega[test_rows], problem.s[test_rows]
        gram = gram_full - om_te.T @ om_te
        state = _bcd_state(problem.omega[mask], problem.s[mask])
        held += s_te.size
        for i, lam in enumerate(grid):
            _bcd_run(state, gram, lam, tol, max_sweeps)
            diff = s_te - om_te @ state["beta"]
            total[i] += float(np.sum(diff * diff))
    errors = total / held
    return float(grid[int(np.argmin(errors))]), grid, errors
