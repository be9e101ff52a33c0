"""Noise-level formulas, concentration checks, and the oracle-bound diagnostic.

The tail-bound algebra behind the noise-level constants treats dictionary
columns as having norm sqrt(n) (the statistical design normalization), while
the fitted dictionaries carry unit-norm columns.  Monte-Carlo simulation here
therefore rescales columns by sqrt(n) so the stated bounds are sharp rather
than trivially slack; the oracle-bound check operates on actual fits and
reports both sides of the inequality as-is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bench import ScenarioDataset
from .model import GroupedDesign, ThetaEstimate, apply_design, mixed_norm
from .solver import FitResult

__all__ = [
    "TheoryReport",
    "lambda0",
    "check_proposition",
    "check_oracle",
    "estimate_phi",
]

_TRIAL_CHUNK = 512


@dataclass
class TheoryReport:
    x: float
    sigma: float
    lambda0_alpha: float
    lambda0_beta: float
    lambda0: float
    empirical_probability: float | None = None
    nominal_probability: float | None = None
    oracle_bound: float | None = None
    oracle_lhs: float | None = None
    oracle_holds: bool | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "x": self.x,
            "sigma": self.sigma,
            "lambda0_alpha": self.lambda0_alpha,
            "lambda0_beta": self.lambda0_beta,
            "lambda0": self.lambda0,
        }
        for name in (
            "empirical_probability",
            "nominal_probability",
            "oracle_bound",
            "oracle_lhs",
            "oracle_holds",
        ):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.extras:
            out["extras"] = self.extras
        return out


def lambda0(x: float, sigma: float, n: int, k: int, d1: int, d2: int):
    """Noise-level constants (lambda0_alpha, lambda0_beta, lambda0).

    lambda0 = max(lambda0_alpha, lambda0_beta / sqrt(K)).
    """
    if x <= 0:
        raise ValueError("x must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if min(n, k, d1, d2) < 1:
        raise ValueError("n, K, d1, d2 must be positive")
    base = 2.0 * sigma / math.sqrt(n * k)
    lam_alpha = base * math.sqrt(x * x + 2.0 * math.log(d1))
    ratio = (4.0 * x + 4.0 * math.log(d2)) / k
    lam_beta = base * (1.0 + math.sqrt(ratio) + ratio)
    return lam_alpha, lam_beta, max(lam_alpha, lam_beta / math.sqrt(k))


def _default_dictionaries(n: int, d1: int, d2: int):
    from .bench import scenario_design

    design = scenario_design(n)
    if design.d1 != d1 or design.d2 != d2:
        raise ValueError(
            "d1/d2 do not match the default benchmark dictionaries for this n; "
            "pass psi and phi explicitly"
        )
    return design.psi, design.phi


def check_proposition(
    which: int,
    n: int,
    k: int,
    d1: int,
    d2: int,
    sigma: float,
    x: float,
    trials: int,
    psi: np.ndarray | None = None,
    phi: np.ndarray | None = None,
    seed: int = 0,
) -> TheoryReport:
    """Monte-Carlo frequency of a concentration event against its bound.

    which = 1: per-singleton correlations stay below the alpha threshold
    (nominal 1 - 2 exp(-x^2/2)); which = 2: per-group correlation norms stay
    below the beta threshold (nominal 1 - exp(-x)); which = 3: the bilinear
    noise term is controlled by the mixed norm for a random direction
    (nominal 1 - 2 exp(-x^2/2) - exp(-x)).
    """
    if which not in (1, 2, 3):
        raise ValueError("which must be 1, 2 or 3")
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    if x <= 0:
        raise ValueError("x must be positive")
    if psi is None or phi is None:
        psi, phi = _default_dictionaries(n, d1, d2)
    psi_s = math.sqrt(n) * np.asarray(psi, dtype=float)
    phi_s = math.sqrt(n) * np.asarray(phi, dtype=float)

    lam_alpha, lam_beta, lam0 = lambda0(x, sigma, n, k, d1, d2)
    root_nk = math.sqrt(n * k)
    g_star = (d1 + k * d2) / (d1 + d2)

    rng = np.random.default_rng(np.random.SeedSequence([seed, which]))
    hits = 0
    chi2_sum = 0.0
    chi2_count = 0
    done = 0
    while done < trials:
        chunk = min(_TRIAL_CHUNK, trials - done)
        eps = sigma * rng.standard_normal((chunk, n, k))
        if which == 1:
            u = np.einsum("tnk,nj->tj", eps, psi_s) / root_nk
            stat = 2.0 * np.abs(u).max(axis=1)
            hits += int((stat <= root_nk * lam_alpha).sum())
        elif which == 2:
            proj = np.einsum("tnk,nj->tjk", eps, phi_s)
            v = np.sqrt((proj**2).sum(axis=2)) / root_nk
            stat = 2.0 * v.max(axis=1)
            hits += int((stat <= root_nk * lam_beta).sum())
            if sigma > 0:
                chi2_sum += float((k * v**2 / sigma**2).sum())
                chi2_count += v.size
        else:
            alpha = rng.standard_normal((chunk, d1))
            beta = rng.standard_normal((chunk, d2, k))
            fitted = np.einsum("nj,tj->tn", psi_s, alpha)[:, :, None] + np.einsum(
                "nj,tjk->tnk", phi_s, beta
            )
            bilinear = 2.0 * (eps * fitted).sum(axis=(1, 2)) / (n * k)
            norms = np.abs(alpha).sum(axis=1) / math.sqrt(g_star) + math.sqrt(
                k / g_star
            ) * np.sqrt((beta**2).sum(axis=2)).sum(axis=1)
            hits += int((bilinear <= lam0 * math.sqrt(g_star) * norms).sum())
        done += chunk

    nominal = {
        1: 1.0 - 2.0 * math.exp(-x * x / 2.0),
        2: 1.0 - math.exp(-x),
        3: 1.0 - 2.0 * math.exp(-x * x / 2.0) - math.exp(-x),
    }[which]
    extras = {"trials": trials}
    if which == 2 and chi2_count:
        extras["chi2_mean"] = chi2_sum / chi2_count
    return TheoryReport(
        x=x,
        sigma=sigma,
        lambda0_alpha=lam_alpha,
        lambda0_beta=lam_beta,
        lambda0=lam0,
        empirical_probability=hits / trials,
        nominal_probability=nominal,
        extras=extras,
    )


def _partition_mixed_norm(theta: ThetaEstimate, design: GroupedDesign,
                          alpha_groups: np.ndarray, beta_groups: np.ndarray) -> float:
    g_star = design.g_star
    part = np.abs(theta.alpha[alpha_groups]).sum() / math.sqrt(g_star)
    part += math.sqrt(design.n_channels / g_star) * np.linalg.norm(
        theta.beta[beta_groups], axis=1
    ).sum()
    return float(part)


def check_oracle(
    dataset: ScenarioDataset,
    fit: FitResult,
    design: GroupedDesign,
    x: float,
    phi_lower_bound: float,
) -> TheoryReport:
    """Evaluate both sides of the prediction/estimation bound for one fit.

    Requires the fit's penalty to satisfy lambda >= 2*lambda0 at this x and
    the dataset's noise level.  ``phi_lower_bound`` stands in for the
    compatibility constant (see :func:`estimate_phi`).
    """
    if phi_lower_bound <= 0:
        raise ValueError("phi_lower_bound must be positive")
    n, k = design.n, design.n_channels
    lam_alpha, lam_beta, lam0 = lambda0(x, dataset.sigma, n, k, design.d1, design.d2)
    if fit.lam < 2.0 * lam0 - 1e-12:
        raise ValueError(
            f"fit used lambda={fit.lam:.4g} < 2*lambda0={2 * lam0:.4g}"
        )
    delta = ThetaEstimate(
        alpha=fit.theta.alpha - dataset.alpha0,
        beta=fit.theta.beta - dataset.beta0,
    )
    pred = apply_design(delta, design)
    g_star = design.g_star
    lhs = float(np.sum(pred * pred) / (n * k)) + fit.lam * math.sqrt(
        g_star
    ) * mixed_norm(delta, design)
    s0 = dataset.support_alpha.size + dataset.support_beta.size
    rhs = 4.0 * fit.lam**2 * g_star * s0 / phi_lower_bound**2
    return TheoryReport(
        x=x,
        sigma=dataset.sigma,
        lambda0_alpha=lam_alpha,
        lambda0_beta=lam_beta,
        lambda0=lam0,
        oracle_bound=rhs,
        oracle_lhs=lhs,
        oracle_holds=bool(lhs <= rhs),
    )


def estimate_phi(
    design: GroupedDesign,
    s0_groups,
    samples: int = 1000,
    seed: int = 0,
) -> float:
    """Randomized upper-bound estimate of the compatibility constant.

    Samples directions theta in the cone ||theta(S0^c)||_{2,1} <=
    3 ||theta(S0)||_{2,1} and returns the smallest value of

        sqrt(G* |S0| / (nK)) * ||X theta||_2 / (sqrt(G*) ||theta(S0)||_{2,1})

    found.  This is a heuristic diagnostic (an upper bound on the true
    constant), never used inside the solver.
    """
    s0_groups = np.unique(np.asarray(s0_groups, dtype=int))
    if s0_groups.size == 0:
        raise ValueError("S0 must be nonempty")
    if s0_groups.min() < 0 or s0_groups.max() >= design.d1 + design.d2:
        raise ValueError("group index out of range")
    alpha_in = s0_groups[s0_groups < design.d1]
    beta_in = s0_groups[s0_groups >= design.d1] - design.d1
    alpha_mask = np.zeros(design.d1, dtype=bool)
    alpha_mask[alpha_in] = True
    beta_mask = np.zeros(design.d2, dtype=bool)
    beta_mask[beta_in] = True

    n, k = design.n, design.n_channels
    g_star = design.g_star
    s0_size = s0_groups.size
    rng = np.random.default_rng(seed)
    best = math.inf
    drawn = 0
    while drawn < samples:
        alpha = rng.standard_normal(design.d1)
        beta = rng.standard_normal((design.d2, k))
        theta = ThetaEstimate(alpha=alpha, beta=beta)
        on = _partition_mixed_norm(
            theta, design, np.flatnonzero(alpha_mask), np.flatnonzero(beta_mask)
        )
        if on <= 1e-12:
            continue  # degenerate draw, redraw
        off = _partition_mixed_norm(
            theta, design, np.flatnonzero(~alpha_mask), np.flatnonzero(~beta_mask)
        )
        target_off = 3.0 * on * rng.uniform()
        if off > 0:
            scale = target_off / off
            alpha = alpha.copy()
            beta = beta.copy()
            alpha[~alpha_mask] *= scale
            beta[~beta_mask] *= scale
            theta = ThetaEstimate(alpha=alpha, beta=beta)
        fitted = apply_design(theta, design)
        ratio = (
            math.sqrt(g_star * s0_size / (n * k))
            * float(np.linalg.norm(fitted))
            / (math.sqrt(g_star) * on)
        )
        best = min(best, ratio)
        drawn += 1
    return best
