"""Rational-dilation wavelet frames as exact tight analysis/synthesis operators.

A frame is parameterized by ``(p, q, s, J, n)``: dilation factor ``q/p > 1``,
time-dilation factor ``s``, ``J`` decomposition levels, signal length ``n``.
Level ``j`` carries ``ceil(n p^j / (q^j s))`` wavelet coefficients and the
final lowpass block carries ``ceil(n p^J / q^J)`` scaling coefficients.

Each decomposition stage is constructed directly as an isometry in orthonormal
real-DFT coordinates: low frequencies go to the lowpass subband, high
frequencies to the highpass subband, and the bins both subbands can represent
get a raised-cosine power split.  DC/Nyquist bins of the three grids are
matched by a small assignment procedure so every subband slot receives
content for any length parity.  Analysis is then norm-preserving and
synthesis is its transpose, which gives perfect reconstruction to machine
precision.  For ``(p, q, s) = (1, 2, 1)`` the transition band has zero width
and the construction reduces to the orthonormal Shannon wavelet basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "FrameSpec",
    "CoefficientVector",
    "DictionaryMatrix",
    "frame_spec",
    "analyze",
    "synthesize",
    "frame_matrix",
]

_STAGE_GRAM_TOL = 1e-10


def _ceil_div(num: int, den: int) -> int:
    return -(-num // den)


@dataclass(frozen=True)
class FrameSpec:
    """Parameters of one rational-dilation wavelet frame.

    Derived coefficient counts follow the closed-form ceiling formulas in
    terms of the original length ``n`` (not iterated per-stage ceilings).
    """

    p: int
    q: int
    s: int
    J: int
    n: int

    def __post_init__(self):
        for name in ("p", "q", "s", "J", "n"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValueError(f"invalid parameters: {name} must be an integer")
            object.__setattr__(self, name, int(value))
        if not (self.q > self.p >= 1):
            raise ValueError("invalid parameters: need q > p >= 1")
        if self.s < 1 or self.J < 1:
            raise ValueError("invalid parameters: need s >= 1 and J >= 1")
        if self.n < self.q:
            raise ValueError("invalid parameters: need n >= q")
        low = self.lowpass_counts
        for j in range(1, self.J + 1):
            if low[j] >= low[j - 1]:
                raise ValueError(
                    "invalid parameters: lowpass count does not shrink at "
                    f"level {j} (n too short for J={self.J})"
                )
            if low[j] + self.wavelet_counts[j - 1] < low[j - 1]:
                raise ValueError(
                    "invalid parameters: level {} loses dimensions; "
                    "(p, q, s) = ({}, {}, {}) is not a frame".format(
                        j, self.p, self.q, self.s
                    )
                )

    @property
    def lowpass_counts(self) -> tuple[int, ...]:
        """Lowpass length after each level, starting from ``n`` (J+1 values)."""
        return tuple(
            _ceil_div(self.n * self.p**j, self.q**j) for j in range(self.J + 1)
        )

    @property
    def wavelet_counts(self) -> tuple[int, ...]:
        """Wavelet coefficient count at level j = 1..J."""
        return tuple(
            _ceil_div(self.n * self.p**j, self.q**j * self.s)
            for j in range(1, self.J + 1)
        )

    @property
    def scaling_count(self) -> int:
        return self.lowpass_counts[self.J]

    @property
    def total(self) -> int:
        """Total coefficient count d."""
        return sum(self.wavelet_counts) + self.scaling_count


def frame_spec(p: int, q: int, s: int, J: int, n: int) -> FrameSpec:
    """Validate parameters and return a :class:`FrameSpec`."""
    return FrameSpec(p, q, s, J, n)


@dataclass
class CoefficientVector:
    """Analysis coefficients: one block per wavelet level plus the scaling block."""

    wavelet: tuple[np.ndarray, ...]
    scaling: np.ndarray

    def to_array(self) -> np.ndarray:
        """Flatten as [level 1, ..., level J, scaling]."""
        return np.concatenate([*self.wavelet, self.scaling])

    @classmethod
    def from_array(cls, values: np.ndarray, spec: FrameSpec) -> "CoefficientVector":
        values = np.asarray(values, dtype=float).ravel()
        if values.size != spec.total:
            raise ValueError(
                f"layout mismatch: expected {spec.total} coefficients, "
                f"got {values.size}"
            )
        blocks = []
        start = 0
        for count in spec.wavelet_counts:
            blocks.append(values[start : start + count])
            start += count
        return cls(wavelet=tuple(blocks), scaling=values[start:])

    def validate(self, spec: FrameSpec) -> None:
        if len(self.wavelet) != spec.J:
            raise ValueError("layout mismatch: wrong number of wavelet blocks")
        for j, (block, count) in enumerate(zip(self.wavelet, spec.wavelet_counts)):
            if np.asarray(block).size != count:
                raise ValueError(f"layout mismatch: level {j + 1} block size")
        if np.asarray(self.scaling).size != spec.scaling_count:
            raise ValueError("layout mismatch: scaling block size")


@dataclass
class DictionaryMatrix:
    """Explicit synthesis dictionary with unit-norm columns.

    ``column_norms`` records the raw synthesis column norms that were divided
    out, so the unnormalized operator can be recovered exactly.
    """

    matrix: np.ndarray
    spec: FrameSpec
    column_norms: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]


@lru_cache(maxsize=64)
def _real_fourier_basis(length: int) -> np.ndarray:
    """Orthonormal real-DFT basis, rows ordered [DC, cos_1, sin_1, ..., Nyquist].

    Pair rows equal sqrt(2)*Re and sqrt(2)*Im of the unitary DFT (the sine row
    carries the Im sign convention).
    """
    t = np.arange(length)
    rows = [np.full(length, length**-0.5)]
    for m in range(1, (length + 1) // 2):
        w = 2.0 * np.pi * m / length
        rows.append(np.sqrt(2.0 / length) * np.cos(w * t))
        rows.append(-np.sqrt(2.0 / length) * np.sin(w * t))
    if length % 2 == 0:
        rows.append((length**-0.5) * np.where(t % 2 == 0, 1.0, -1.0))
    basis = np.vstack(rows)
    basis.flags.writeable = False
    return basis


def _pair_cols(m: int) -> tuple[int, int]:
    # cos/sin coordinate indices of frequency m in the layout above
    return 2 * m - 1, 2 * m


def _stage_weights(n_in: int, n_lo: int, n_hi: int) -> np.ndarray:
    """Assignment matrix of one stage in real-Fourier coordinates.

    Returns ``w`` of shape ``(n_lo + n_hi, n_in)`` with orthonormal columns;
    rows 0..n_lo-1 are the lowpass subband coordinates, the rest highpass.
    """
    if not (1 <= n_lo < n_in and 1 <= n_hi <= n_in):
        raise ValueError("invalid stage sizes")
    if n_lo + n_hi < n_in:
        raise ValueError("stage loses dimensions; not a frame")

    npairs_in = (n_in + 1) // 2 - 1
    npl = (n_lo + 1) // 2 - 1
    nph = (n_hi + 1) // 2 - 1
    offset = n_in // 2 - n_hi // 2

    w = np.zeros((n_lo + n_hi, n_in))
    lo_row = lambda i: i
    hi_row = lambda i: n_lo + i

    pure_lo, overlap, pure_hi, orphans = [], [], [], []
    for r in range(1, npairs_in + 1):
        has_lo = r <= npl
        has_hi = offset + 1 <= r <= offset + nph
        if has_lo and has_hi:
            overlap.append(r)
        elif has_lo:
            pure_lo.append(r)
        elif has_hi:
            pure_hi.append(r)
        else:
            orphans.append(r)

    # ---- pools of coordinates/slots not settled by pair-to-pair assignment
    coord_pool: list[tuple[int, int, int]] = []  # (freq, tie, column index)
    for r in orphans:
        re, im = _pair_cols(r)
        coord_pool.append((r, 0, re))
        coord_pool.append((r, 1, im))
    nyq_to_hi_nyq = n_in % 2 == 0 and n_hi % 2 == 0
    if n_in % 2 == 0 and not nyq_to_hi_nyq:
        coord_pool.append((n_in // 2, 0, n_in - 1))

    slot_pool: list[tuple[int, int, int]] = []  # (freq, tie, row index)
    has_lo_nyq_slot = n_lo % 2 == 0
    if has_lo_nyq_slot:
        slot_pool.append((n_lo // 2, 0, lo_row(n_lo - 1)))
    slot_pool.append((offset, 1, hi_row(0)))  # highpass DC
    for m in range(max(1, npairs_in - offset + 1), nph + 1):
        re, im = _pair_cols(m)
        slot_pool.append((offset + m, 1, hi_row(re)))
        slot_pool.append((offset + m, 2, hi_row(im)))
    if n_hi % 2 == 0 and not nyq_to_hi_nyq:
        slot_pool.append((offset + n_hi // 2, 1, hi_row(n_hi - 1)))

    # ---- enable micro splits to absorb leftover single slots
    need = len(slot_pool) - len(coord_pool)
    lo_nyq_r = n_lo // 2 if has_lo_nyq_slot else None
    can_lo_nyq = lo_nyq_r is not None and lo_nyq_r in pure_hi
    can_hp_dc = offset == 0 or offset in pure_lo
    use_lo_nyq = use_hp_dc = False
    if need >= 1 and can_lo_nyq:
        use_lo_nyq = True
        need -= 1
    if need >= 1 and can_hp_dc:
        use_hp_dc = True
        need -= 1
    if use_lo_nyq:
        pure_hi.remove(lo_nyq_r)
        slot_pool = [s for s in slot_pool if s[2] != lo_row(n_lo - 1)]
    if use_hp_dc:
        if offset > 0:
            pure_lo.remove(offset)
        slot_pool = [s for s in slot_pool if s[2] != hi_row(0)]

    # ---- raised-cosine transition profile over the shared band
    t0 = offset if use_hp_dc else offset + 1
    t1 = lo_nyq_r if use_lo_nyq else npl

    def split(r: int) -> tuple[float, float]:
        u = (r - t0 + 1) / (t1 - t0 + 2)
        return math.cos(0.5 * math.pi * u), math.sin(0.5 * math.pi * u)

    # ---- emit gains
    if use_hp_dc and offset == 0:
        a, b = split(0)
        w[lo_row(0), 0] = a
        w[hi_row(0), 0] = b
    else:
        w[lo_row(0), 0] = 1.0

    for r in pure_lo:
        re, im = _pair_cols(r)
        w[lo_row(re), re] = 1.0
        w[lo_row(im), im] = 1.0
    if use_hp_dc and offset > 0:
        a, b = split(offset)
        re, im = _pair_cols(offset)
        w[lo_row(re), re] = a
        w[lo_row(im), im] = 1.0
        w[hi_row(0), re] = b
    for r in overlap:
        a, b = split(r)
        re, im = _pair_cols(r)
        hre, him = _pair_cols(r - offset)
        w[lo_row(re), re] = a
        w[lo_row(im), im] = a
        w[hi_row(hre), re] = b
        w[hi_row(him), im] = b
    for r in pure_hi:
        re, im = _pair_cols(r)
        hre, him = _pair_cols(r - offset)
        w[hi_row(hre), re] = 1.0
        w[hi_row(him), im] = 1.0
    if use_lo_nyq:
        a, b = split(lo_nyq_r)
        re, im = _pair_cols(lo_nyq_r)
        hre, him = _pair_cols(lo_nyq_r - offset)
        w[lo_row(n_lo - 1), re] = a
        w[hi_row(hre), re] = b
        w[hi_row(him), im] = 1.0
    if nyq_to_hi_nyq:
        w[hi_row(n_hi - 1), n_in - 1] = 1.0

    # ---- match the remaining coordinates and slots by frequency
    if len(coord_pool) > len(slot_pool):
        raise ValueError("stage has no isometric assignment; not a frame")
    coord_pool.sort(key=lambda c: (-c[0], c[1]))
    slot_pool.sort(key=lambda s: (-s[0], s[1]))
    if coord_pool:
        groups = np.array_split(np.arange(len(slot_pool)), len(coord_pool))
        for (freq, tie, col), idx in zip(coord_pool, groups):
            gain = 1.0 / math.sqrt(len(idx))
            for i in idx:
                w[slot_pool[i][2], col] = gain
    elif slot_pool:
        raise ValueError("stage leaves dead subband slots; not a frame")
    return w


@lru_cache(maxsize=256)
def _stage_operator(n_in: int, n_lo: int, n_hi: int) -> np.ndarray:
    """Time-domain stage isometry of shape (n_lo + n_hi, n_in)."""
    weights = _stage_weights(n_in, n_lo, n_hi)
    basis_in = _real_fourier_basis(n_in)
    out = np.empty((n_lo + n_hi, n_in))
    out[:n_lo] = _real_fourier_basis(n_lo).T @ weights[:n_lo] @ basis_in
    out[n_lo:] = _real_fourier_basis(n_hi).T @ weights[n_lo:] @ basis_in
    gram_err = np.abs(out.T @ out - np.eye(n_in)).max()
    if gram_err > _STAGE_GRAM_TOL:
        raise ValueError(
            f"stage ({n_in}, {n_lo}, {n_hi}) failed the isometry check "
            f"({gram_err:.2e})"
        )
    out.flags.writeable = False
    return out


def _stages(spec: FrameSpec) -> list[np.ndarray]:
    low = spec.lowpass_counts
    high = spec.wavelet_counts
    return [
        _stage_operator(low[j - 1], low[j], high[j - 1])
        for j in range(1, spec.J + 1)
    ]


def analyze(signal: np.ndarray, spec: FrameSpec) -> CoefficientVector:
    """Forward transform under periodic boundary handling.

    The analysis operator is an exact isometry: ``||analyze(x)|| == ||x||``.
    """
    x = np.asarray(signal, dtype=float).ravel()
    if x.size != spec.n:
        raise ValueError(f"length mismatch: expected {spec.n}, got {x.size}")
    blocks = []
    current = x
    for stage, n_lo in zip(_stages(spec), spec.lowpass_counts[1:]):
        out = stage @ current
        current = out[:n_lo]
        blocks.append(out[n_lo:])
    return CoefficientVector(wavelet=tuple(blocks), scaling=current)


def synthesize(coeffs, spec: FrameSpec) -> np.ndarray:
    """Adjoint of :func:`analyze`; reconstructs exactly on analysis output."""
    if not isinstance(coeffs, CoefficientVector):
        coeffs = CoefficientVector.from_array(coeffs, spec)
    coeffs.validate(spec)
    current = np.asarray(coeffs.scaling, dtype=float).ravel()
    stages = _stages(spec)
    for j in range(spec.J, 0, -1):
        block = np.asarray(coeffs.wavelet[j - 1], dtype=float).ravel()
        current = stages[j - 1].T @ np.concatenate([current, block])
    return current


def _analysis_matrix(spec: FrameSpec) -> np.ndarray:
    """Dense (d, n) analysis operator, blocks ordered [levels 1..J, scaling]."""
    rows = []
    current = np.eye(spec.n)
    for stage, n_lo in zip(_stages(spec), spec.lowpass_counts[1:]):
        out = stage @ current
        current = out[:n_lo]
        rows.append(out[n_lo:])
    rows.append(current)
    return np.vstack(rows)


def frame_matrix(spec: FrameSpec) -> DictionaryMatrix:
    """Materialize the synthesis dictionary with unit-norm columns.

    Column ``g`` is ``synthesize(e_g)`` rescaled to unit norm; the raw norms
    are recorded in ``column_norms``.
    """
    synthesis = _analysis_matrix(spec).T
    norms = np.linalg.norm(synthesis, axis=0)
    if norms.min() <= 1e-12:
        raise ValueError("degenerate dictionary column; spec is not usable")
    return DictionaryMatrix(
        matrix=synthesis / norms, spec=spec, column_norms=norms
    )
