"""Group-lasso solver for the multichannel decomposition, plus the
single-channel lasso baseline and V-fold cross-validation.

The estimator minimizes

    (1/(nK)) ||y - X theta||_2^2  +  lambda * sqrt(G*) * ||theta||_{2,1}

over the stacked design whose groups all have unit within-group Gram.  For
the shared (alpha) coefficients, unit Gram means the K stacked copies of each
low-resonance column are scaled by 1/sqrt(K); in natural alpha/beta units the
group-size weights of the mixed norm then collapse to one effective threshold
lambda*sqrt(K) for every group, and each group update is an exact
(multivariate) soft-threshold.  Cyclic coordinate descent with active-set
sweeps and warm starts along the regularization path runs in the compiled
kernels of :mod:`radlasso._kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import cd_fit
from .model import GroupedDesign, ThetaEstimate, apply_design, group_correlations, mixed_norm

__all__ = [
    "FitConfig",
    "FitResult",
    "CVResult",
    "fit_group_lasso",
    "lambda_path",
    "cv_select",
    "fit_single_channel",
    "objective",
    "kkt_gap",
    "contiguous_folds",
]


@dataclass
class FitConfig:
    """Solver settings; ``lam`` is the penalty level (None until selected).

    ``cv_tolerance`` optionally loosens the stop rule inside CV fold fits
    only (the error curve is insensitive to solution accuracy well below the
    noise level); final fits always use ``tolerance``.
    """

    lam: float | None = None
    max_iterations: int = 10_000
    tolerance: float = 1e-6
    lambda_grid_size: int = 100
    lambda_min_ratio: float = 1e-3
    cv_folds: int = 5
    seed: int = 0
    shuffle_folds: bool = False
    cv_tolerance: float | None = None
    cv_rule: str = "min"

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.max_iterations < 1 or self.lambda_grid_size < 1:
            raise ValueError("iteration and grid sizes must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.lambda_min_ratio < 1:
            raise ValueError("lambda_min_ratio must lie in (0, 1)")
        if self.cv_folds < 2:
            raise ValueError("cross-validation needs at least 2 folds")
        if self.cv_tolerance is not None and self.cv_tolerance <= 0:
            raise ValueError("cv_tolerance must be positive")
        if self.cv_rule not in ("min", "0.5se", "1se"):
            raise ValueError("cv_rule must be 'min', '0.5se' or '1se'")

    @property
    def fold_tolerance(self) -> float:
        return self.tolerance if self.cv_tolerance is None else self.cv_tolerance


@dataclass
class FitResult:
    """Solution of one penalized fit with its reconstructions."""

    theta: ThetaEstimate
    lam: float
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    c_hat: np.ndarray
    u_hat: np.ndarray
    method: str = "multi-c"

    @property
    def active_alpha(self) -> np.ndarray:
        return np.flatnonzero(self.theta.alpha)

    @property
    def active_beta(self) -> np.ndarray:
        return np.flatnonzero(np.linalg.norm(self.theta.beta, axis=1))


@dataclass
class CVResult:
    """Cross-validation curve and the selected penalty level."""

    lam_star: float
    grid: np.ndarray
    errors: np.ndarray
    fold_errors: np.ndarray | None = None  # (V, len(grid)) per-fold means


_SE_FACTOR = {"min": 0.0, "0.5se": 0.5, "1se": 1.0}


def _select_from_curve(grid, errors, fold_errors, rule: str) -> float:
    """Pick lambda from a decreasing grid; ties go to the larger lambda.

    Under an "se" rule the largest lambda whose error is within the stated
    multiple of the minimizer's standard error (across folds) is chosen.
    """
    best = int(np.argmin(errors))
    factor = _SE_FACTOR[rule]
    if factor > 0 and fold_errors is not None and fold_errors.shape[0] > 1:
        se = fold_errors[:, best].std(ddof=1) / math.sqrt(fold_errors.shape[0])
        within = np.flatnonzero(errors <= errors[best] + factor * se)
        best = int(within[0])
    return float(grid[best])


@dataclass
class DesignGrams:
    """Precomputed Gram blocks of [Psi, Phi] (optionally row-restricted)."""

    aa: np.ndarray
    ab: np.ndarray
    ba: np.ndarray
    bb: np.ndarray

    @classmethod
    def compute(cls, psi: np.ndarray, phi: np.ndarray) -> "DesignGrams":
        aa = psi.T @ psi
        ab = psi.T @ phi
        bb = phi.T @ phi
        return cls(aa=aa, ab=ab, ba=np.ascontiguousarray(ab.T), bb=bb)

    def minus_rows(self, psi_rows: np.ndarray, phi_rows: np.ndarray) -> "DesignGrams":
        """Grams with the given rows removed (for CV training folds)."""
        aa = self.aa - psi_rows.T @ psi_rows
        ab = self.ab - psi_rows.T @ phi_rows
        bb = self.bb - phi_rows.T @ phi_rows
        return DesignGrams(aa=aa, ab=ab, ba=np.ascontiguousarray(ab.T), bb=bb)


class _CDState:
    """Warm-startable kernel state for one design/response pair."""

    def __init__(self, psi, phi, y):
        self.alpha = np.zeros(psi.shape[1])
        self.beta = np.zeros((phi.shape[1], y.shape[1]))
        self.z_a = psi.T @ y.sum(axis=1)
        self.z_b = phi.T @ y
        self.rss = float(np.sum(y * y))

    def run(self, grams: DesignGrams, kk: int, tau_a: float, tau_b: float,
            tol: float, max_sweeps: int):
        trace = np.empty(max_sweeps)
        sweeps, converged, rss, n_trace = cd_fit(
            grams.aa, grams.ab, grams.ba, grams.bb,
            np.ascontiguousarray(np.diag(grams.aa)),
            np.ascontiguousarray(np.diag(grams.bb)),
            kk,
            self.z_a, self.z_b, self.alpha, self.beta,
            tau_a, tau_b, self.rss, tol, max_sweeps, trace,
        )
        self.rss = rss
        return trace[:n_trace].copy(), int(sweeps), bool(converged)


def _check_data(y, design: GroupedDesign) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != (design.n, design.n_channels):
        raise ValueError(
            f"dimension mismatch: data shape {y.shape}, design expects "
            f"({design.n}, {design.n_channels})"
        )
    if not np.all(np.isfinite(y)):
        raise ValueError("data contains non-finite entries")
    return y


def objective(theta: ThetaEstimate, y, design: GroupedDesign, lam: float) -> float:
    """Penalized objective value at ``theta`` (natural alpha/beta units).

    The stacked design with unit within-group Grams carries the shared alpha
    columns scaled by 1/sqrt(K), so on natural coefficients the penalty is
    lambda*sqrt(K) on both the alpha magnitudes and the beta group norms:

        (1/(nK)) ||y - fitted||^2
            + lambda*sqrt(K) * (sum_g |alpha_g| + sum_j ||beta_j||_2)

    This equals lambda*sqrt(G*)*||.||_{2,1} evaluated at the group-normalized
    coefficients (sqrt(K)*alpha, beta).
    """
    y = _check_data(y, design)
    resid = y - apply_design(theta, design)
    n, k = design.n, design.n_channels
    scaled = ThetaEstimate(alpha=math.sqrt(k) * theta.alpha, beta=theta.beta)
    return float(
        np.sum(resid * resid) / (n * k)
        + lam * math.sqrt(design.g_star) * mixed_norm(scaled, design)
    )


def _group_taus(design: GroupedDesign, lam: float) -> tuple[float, float]:
    # kernel thresholds encoding the 1/(nK) loss; with unit within-group
    # Grams both group kinds collapse to an effective threshold lambda*sqrt(K)
    nk = design.n * design.n_channels
    tau = nk * math.sqrt(design.n_channels) * lam / 2.0
    return tau, tau


def fit_group_lasso(
    y,
    design: GroupedDesign,
    config: FitConfig,
    *,
    grams: DesignGrams | None = None,
) -> FitResult:
    """Solve the multichannel group lasso at ``config.lam``."""
    y = _check_data(y, design)
    if config.lam is None:
        raise ValueError("config.lam is not set; run cv_select or lambda_path first")
    if grams is None:
        grams = DesignGrams.compute(design.psi, design.phi)
    tau_a, tau_b = _group_taus(design, config.lam)
    state = _CDState(design.psi, design.phi, y)
    trace, sweeps, converged = state.run(
        grams, design.n_channels, tau_a, tau_b, config.tolerance, config.max_iterations
    )
    theta = ThetaEstimate(alpha=state.alpha, beta=state.beta)
    return FitResult(
        theta=theta,
        lam=float(config.lam),
        objective_trace=trace / (design.n * design.n_channels),
        iterations=sweeps,
        converged=converged,
        c_hat=design.psi @ state.alpha,
        u_hat=design.phi @ state.beta,
        method="multi-c",
    )


def lambda_path(y, design: GroupedDesign, config: FitConfig) -> np.ndarray:
    """Decreasing log-spaced grid from the closed-form lambda_max.

    lambda_max is the smallest penalty for which the zero solution is
    stationary, read off the null-model group correlations.
    """
    y = _check_data(y, design)
    z_a, z_b = group_correlations(y, design)
    scale = design.n * design.n_channels * math.sqrt(design.n_channels)
    lam_alpha = 2.0 * np.abs(z_a).max(initial=0.0) / scale
    lam_beta = 2.0 * np.linalg.norm(z_b, axis=1).max(initial=0.0) / scale
    lam_max = max(lam_alpha, lam_beta)
    if lam_max == 0.0:
        return np.zeros(1)
    return np.geomspace(lam_max, lam_max * config.lambda_min_ratio,
                        config.lambda_grid_size)


def contiguous_folds(n: int, v: int, rng: np.random.Generator | None = None):
    """Row-index folds as V contiguous blocks (optionally over shuffled rows)."""
    if v > n:
        raise ValueError("more folds than rows")
    order = np.arange(n) if rng is None else rng.permutation(n)
    return [np.sort(block) for block in np.array_split(order, v)]


def _path_cv_errors(y, psi, phi, grid, folds, kk, tau_fn, tol, max_sweeps,
                    grams_full: DesignGrams):
    """Held-out squared errors per fold and grid point.

    Returns (overall mean curve, per-fold mean curves of shape (V, L)).
    """
    total = np.zeros(grid.size)
    fold_means = np.zeros((len(folds), grid.size))
    held = 0
    for v, test_rows in enumerate(folds):
        mask = np.ones(y.shape[0], dtype=bool)
        mask[test_rows] = False
        psi_te, phi_te, y_te = psi[test_rows], phi[test_rows], y[test_rows]
        grams = grams_full.minus_rows(psi_te, phi_te)
        state = _CDState(psi[mask], phi[mask], y[mask])
        held += y_te.size
        for i, lam in enumerate(grid):
            tau_a, tau_b = tau_fn(lam)
            state.run(grams, kk, tau_a, tau_b, tol, max_sweeps)
            pred = (psi_te @ state.alpha)[:, None] + phi_te @ state.beta
            diff = y_te - pred
            sq = float(np.sum(diff * diff))
            total[i] += sq
            fold_means[v, i] = sq / y_te.size
    return total / held, fold_means


def cv_select(
    y,
    design: GroupedDesign,
    config: FitConfig,
    *,
    folds=None,
    grams: DesignGrams | None = None,
) -> CVResult:
    """Select lambda by V-fold CV on held-out rows.

    ``config.cv_rule`` picks the curve minimizer ("min"; ties go to the
    larger lambda since the grid is decreasing) or the largest lambda within
    one standard error of the minimum ("1se").
    """
    y = _check_data(y, design)
    if folds is None:
        rng = (
            np.random.default_rng(config.seed) if config.shuffle_folds else None
        )
        folds = contiguous_folds(design.n, config.cv_folds, rng)
    grid = lambda_path(y, design, config)
    if grams is None:
        grams = DesignGrams.compute(design.psi, design.phi)
    errors, fold_errors = _path_cv_errors(
        y,
        design.psi,
        design.phi,
        grid,
        folds,
        design.n_channels,
        lambda lam: _group_taus(design, lam),
        config.fold_tolerance,
        config.max_iterations,
        grams,
    )
    lam_star = _select_from_curve(grid, errors, fold_errors, config.cv_rule)
    return CVResult(lam_star=lam_star, grid=grid, errors=errors,
                    fold_errors=fold_errors)


# ---------------------------------------------------------------------------
# single-channel lasso baseline


def _lasso_state(x, y_col):
    state = _CDState.__new__(_CDState)
    state.alpha = np.zeros(x.shape[1])
    state.beta = np.zeros((0, 1))
    state.z_a = x.T @ y_col
    state.z_b = np.zeros((0, 1))
    state.rss = float(y_col @ y_col)
    return state


def _lasso_grams(gram_xx: np.ndarray) -> DesignGrams:
    d = gram_xx.shape[0]
    empty = np.zeros((0, d))
    return DesignGrams(aa=gram_xx, ab=empty.T.copy(), ba=empty, bb=np.zeros((0, 0)))


def fit_single_channel(y, design: GroupedDesign, config: FitConfig, *, folds=None):
    """Per-channel lasso over [Psi, Phi], each channel with its own CV lambda.

    Returns a list of K :class:`FitResult` objects (method tag "single-c").
    """
    y = _check_data(y, design)
    x = np.hstack([design.psi, design.phi])
    gram_full = _lasso_grams(x.T @ x)
    n, d1 = design.n, design.d1
    if folds is None:
        folds = contiguous_folds(
            n,
            config.cv_folds,
            np.random.default_rng(config.seed) if config.shuffle_folds else None,
        )
    results = []
    for k in range(design.n_channels):
        y_k = y[:, k]
        z0 = x.T @ y_k
        lam_max = 2.0 * np.abs(z0).max(initial=0.0) / n
        if config.lam is not None:
            lam_k = config.lam
        elif lam_max == 0.0:
            lam_k = 0.0
        else:
            grid = np.geomspace(
                lam_max, lam_max * config.lambda_min_ratio, config.lambda_grid_size
            )
            total = np.zeros(grid.size)
            fold_means = np.zeros((len(folds), grid.size))
            held = 0
            for v, test_rows in enumerate(folds):
                mask = np.ones(n, dtype=bool)
                mask[test_rows] = False
                x_te, y_te = x[test_rows], y_k[test_rows]
                grams = DesignGrams(
                    aa=gram_full.aa - x_te.T @ x_te,
                    ab=np.zeros((x.shape[1], 0)),
                    ba=np.zeros((0, x.shape[1])),
                    bb=np.zeros((0, 0)),
                )
                state = _lasso_state(x[mask], y_k[mask])
                held += y_te.size
                for i, lam in enumerate(grid):
                    state.run(grams, 1, n * lam / 2.0, 0.0,
                              config.fold_tolerance, config.max_iterations)
                    diff = y_te - x_te @ state.alpha
                    sq = float(diff @ diff)
                    total[i] += sq
                    fold_means[v, i] = sq / y_te.size
            lam_k = _select_from_curve(grid, total / held, fold_means,
                                       config.cv_rule)
        state = _lasso_state(x, y_k)
        trace, sweeps, converged = state.run(
            gram_full, 1, n * lam_k / 2.0, 0.0,
            config.tolerance, config.max_iterations,
        )
        coef = state.alpha
        theta = ThetaEstimate(alpha=coef[:d1], beta=coef[d1:][:, None])
        results.append(
            FitResult(
                theta=theta,
                lam=lam_k,
                objective_trace=trace / n,
                iterations=sweeps,
                converged=converged,
                c_hat=design.psi @ theta.alpha,
                u_hat=design.phi @ theta.beta,
                method="single-c",
            )
        )
    return results


def kkt_gap(theta: ThetaEstimate, y, design: GroupedDesign, lam: float) -> float:
    """Largest violation of the stationarity conditions at ``theta``.

    Correlations are scaled by 2/(nK) to match the objective.  Both group
    kinds face the effective threshold lambda*sqrt(K): active groups must
    satisfy the equality condition, inactive groups the threshold bound.
    """
    y = _check_data(y, design)
    resid = y - apply_design(theta, design)
    z_a, z_b = group_correlations(resid, design)
    nk = design.n * design.n_channels
    z_a = 2.0 * z_a / nk
    z_b = 2.0 * z_b / nk
    thr = lam * math.sqrt(design.n_channels)
    gap = 0.0
    for g in range(design.d1):
        if theta.alpha[g] != 0.0:
            gap = max(gap, abs(z_a[g] - thr * np.sign(theta.alpha[g])))
        else:
            gap = max(gap, abs(z_a[g]) - thr)
    for j in range(design.d2):
        row = theta.beta[j]
        norm = np.linalg.norm(row)
        if norm > 0.0:
            gap = max(gap, float(np.linalg.norm(z_b[j] - thr * row / norm)))
        else:
            gap = max(gap, float(np.linalg.norm(z_b[j])) - thr)
    return float(gap)
