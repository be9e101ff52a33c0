"""Grouped multichannel design over a low- and a high-resonance dictionary.

K channels share one coefficient vector alpha on the low-resonance dictionary
Psi while each channel k has its own beta^(k) on the high-resonance dictionary
Phi.  Stacking channels yields a single regression design whose groups are the
d1 alpha singletons followed by d2 groups of size K (coefficient j of every
channel).  The design is kept implicit; operations work on Psi, Phi directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frame import DictionaryMatrix

__all__ = [
    "GroupedDesign",
    "ThetaEstimate",
    "grouped_design",
    "mixed_norm",
    "apply_design",
    "group_correlations",
]

_UNIT_NORM_TOL = 1e-8


def _as_dictionary(mat) -> np.ndarray:
    if isinstance(mat, DictionaryMatrix):
        mat = mat.matrix
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2:
        raise ValueError("dictionary must be a 2-d array")
    return arr


@dataclass(frozen=True)
class GroupedDesign:
    """Implicit stacked design (Psi shared, Phi per channel) for K channels."""

    psi: np.ndarray
    phi: np.ndarray
    n_channels: int

    def __post_init__(self):
        object.__setattr__(self, "psi", _as_dictionary(self.psi))
        object.__setattr__(self, "phi", _as_dictionary(self.phi))
        if self.psi.shape[0] != self.phi.shape[0]:
            raise ValueError("Psi and Phi must share the same signal length")
        if self.n_channels < 1:
            raise ValueError("need at least one channel")
        for name, mat in (("Psi", self.psi), ("Phi", self.phi)):
            err = np.abs(np.linalg.norm(mat, axis=0) - 1.0).max()
            if err > _UNIT_NORM_TOL:
                raise ValueError(
                    f"{name} columns must have unit norm (max deviation {err:.2e})"
                )

    @property
    def n(self) -> int:
        return self.psi.shape[0]

    @property
    def d1(self) -> int:
        return self.psi.shape[1]

    @property
    def d2(self) -> int:
        return self.phi.shape[1]

    @property
    def g_star(self) -> float:
        """Average group size (d1 + K d2) / (d1 + d2)."""
        return (self.d1 + self.n_channels * self.d2) / (self.d1 + self.d2)

    def group_indices(self, j: int) -> np.ndarray:
        """Flat coefficient indices of group j (0-based over d1 + d2 groups).

        Groups 0..d1-1 are alpha singletons; group d1 + j collects coefficient
        j of every channel at stride d2.
        """
        if not 0 <= j < self.d1 + self.d2:
            raise ValueError("group index out of range")
        if j < self.d1:
            return np.array([j])
        r = j - self.d1
        return self.d1 + r + self.d2 * np.arange(self.n_channels)


def grouped_design(psi, phi, n_channels: int) -> GroupedDesign:
    """Build a :class:`GroupedDesign` from dictionaries (arrays or frames)."""
    return GroupedDesign(psi=psi, phi=phi, n_channels=int(n_channels))


@dataclass
class ThetaEstimate:
    """Coefficients (alpha, beta) with beta column k belonging to channel k."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))

    @property
    def n_channels(self) -> int:
        return self.beta.shape[1]

    def flatten(self) -> np.ndarray:
        """Stacked ordering [alpha, beta^(1), ..., beta^(K)]."""
        return np.concatenate([self.alpha, self.beta.T.ravel()])

    @classmethod
    def from_flat(cls, vec, d1: int, d2: int, n_channels: int) -> "ThetaEstimate":
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != d1 + n_channels * d2:
            raise ValueError("dimension mismatch in flattened coefficients")
        beta = vec[d1:].reshape(n_channels, d2).T
        return cls(alpha=vec[:d1].copy(), beta=beta.copy())

    @classmethod
    def zeros(cls, d1: int, d2: int, n_channels: int) -> "ThetaEstimate":
        return cls(alpha=np.zeros(d1), beta=np.zeros((d2, n_channels)))


def _check_theta(theta: ThetaEstimate, design: GroupedDesign) -> None:
    if theta.alpha.size != design.d1 or theta.beta.shape != (
        design.d2,
        design.n_channels,
    ):
        raise ValueError(
            "dimension mismatch: theta has shape "
            f"({theta.alpha.size}, {theta.beta.shape}) but design expects "
            f"({design.d1}, ({design.d2}, {design.n_channels}))"
        )


def mixed_norm(theta: ThetaEstimate, design: GroupedDesign) -> float:
    """Weighted l1/l2 norm of the grouped coefficients.

    sqrt(1/G*) * sum_j |alpha_j| + sqrt(K/G*) * sum_j ||beta_j(all channels)||_2
    """
    _check_theta(theta, design)
    g_star = design.g_star
    alpha_part = np.abs(theta.alpha).sum() / np.sqrt(g_star)
    beta_part = np.sqrt(design.n_channels / g_star) * np.linalg.norm(
        theta.beta, axis=1
    ).sum()
    return float(alpha_part + beta_part)


def apply_design(theta: ThetaEstimate, design: GroupedDesign) -> np.ndarray:
    """Fitted values, column k = Psi alpha + Phi beta^(k)  (shape n x K)."""
    _check_theta(theta, design)
    shared = design.psi @ theta.alpha
    return shared[:, None] + design.phi @ theta.beta


def group_correlations(residual: np.ndarray, design: GroupedDesign):
    """Per-group correlations of a residual matrix with the stacked design.

    Returns ``(z_alpha, z_beta)``: z_alpha[g] sums <Psi_g, r^(k)> over
    channels (scalar per singleton group), z_beta[j, k] = <Phi_j, r^(k)>
    (a length-K vector per beta group).
    """
    residual = np.asarray(residual, dtype=float)
    if residual.shape != (design.n, design.n_channels):
        raise ValueError(
            f"dimension mismatch: residual shape {residual.shape}, expected "
            f"({design.n}, {design.n_channels})"
        )
    z_alpha = design.psi.T @ residual.sum(axis=1)
    z_beta = design.phi.T @ residual
    return z_alpha, z_beta
