"""Analytical constraints on the five-state scattering matrix.

Time-reversal and chiral symmetry reduce ``S`` to nine independent
entries (three real, six complex). On top of that the matrix obeys a
bipartite relation among its diagonal, unitarity, and four hierarchy
determinant identities. Together these leave two independent unknowns,
taken here as ``S33`` and ``|S32|``; everything else follows, up to a
common sign of the rotated-element phases.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    AdiabaticUnderflowError,
    InfeasibleInputError,
    SingularRecoveryError,
    UndefinedRotationError,
)
from .model import LZExponents

__all__ = [
    "SymmetryForm",
    "ConstraintReport",
    "RotatedElements",
    "ReconstructedS",
    "extract_symmetry_form",
    "assemble",
    "check_all",
    "phase_invariants",
    "reconstruct_magnitudes",
    "rotate_elements",
    "rotated_residuals",
    "recover_phases",
    "cofactor_det",
]

Y_FLOOR = 1e-300
CLAMP_EPS = 1e-9
_DENOM_EPS = 1e-12


@dataclass(frozen=True)
class SymmetryForm:
    s11: float
    s22: float
    s33: float
    s21: complex
    s31: complex
    s41: complex
    s51: complex
    s32: complex
    s42: complex
    extraction_residual: float = 0.0


@dataclass(frozen=True)
class ConstraintReport:
    bipartite_residual: float
    unitarity_magnitude_residuals: tuple
    unitarity_phase_residuals: tuple
    hc_residuals: tuple
    max_residual: float

    def to_dict(self) -> dict:
        out = {"bipartite": self.bipartite_residual}
        for i, r in enumerate(self.unitarity_magnitude_residuals, 1):
            out[f"u_row{i}"] = r
        for i, r in enumerate(self.unitarity_phase_residuals, 1):
            out[f"u_phase{i}"] = r
        for i, r in enumerate(self.hc_residuals, 1):
            out[f"hc{i}"] = r
        out["max"] = self.max_residual
        return out

    def values(self) -> np.ndarray:
        return np.array(list(self.to_dict().values())[:-1])


@dataclass(frozen=True)
class RotatedElements:
    """Phase-redefined ``S21, S41, S51, S42`` in which ``arg S31``, ``arg S32`` cancel."""

    s21: complex
    s41: complex
    s51: complex
    s42: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.s21, self.s41, self.s51, self.s42])

    def conj(self) -> "RotatedElements":
        return RotatedElements(*np.conj(self.as_array()))


@dataclass(frozen=True)
class ReconstructedS:
    """Real elements and squared magnitudes implied by ``(S33, |S32|)``.

    ``branch`` is ``"both"`` straight out of :func:`reconstruct_magnitudes`;
    :func:`recover_phases` returns copies tagged ``"plus"`` / ``"minus"``
    with ``rotated`` filled in.
    """

    s11: float
    s22: float
    s33: float
    mag21_sq: float
    mag31_sq: float
    mag41_sq: float
    mag51_sq: float
    mag32_sq: float
    mag42_sq: float
    z: float
    branch: str = "both"
    rotated: Optional[RotatedElements] = field(default=None)

    @property
    def mag21(self):
        return math.sqrt(self.mag21_sq)

    @property
    def mag31(self):
        return math.sqrt(self.mag31_sq)

    @property
    def mag41(self):
        return math.sqrt(self.mag41_sq)

    @property
    def mag51(self):
        return math.sqrt(self.mag51_sq)

    @property
    def mag32(self):
        return math.sqrt(self.mag32_sq)

    @property
    def mag42(self):
        return math.sqrt(self.mag42_sq)

    def column1_probabilities(self) -> np.ndarray:
        return np.array([self.s11**2, self.mag21_sq, self.mag31_sq, self.mag41_sq, self.mag51_sq])


def assemble(form: SymmetryForm) -> np.ndarray:
    """Full 5x5 matrix implied by the nine independent entries."""
    c = np.conj
    s11, s22, s33 = form.s11, form.s22, form.s33
    s21, s31, s41, s51, s32, s42 = form.s21, form.s31, form.s41, form.s51, form.s32, form.s42
    return np.array([
        [s11, -c(s21), -c(s31), -c(s41), c(s51)],
        [s21, s22, c(s32), c(s42), c(s41)],
        [s31, s32, s33, c(s32), c(s31)],
        [s41, s42, s32, s22, c(s21)],
        [s51, -s41, -s31, -s21, s11],
    ], dtype=complex)


def extract_symmetry_form(S) -> SymmetryForm:
    """Read the independent entries and measure deviation from the symmetric pattern.

    Entries come from column 1 and from ``S22, S32, S42, S33``; the
    residual is the largest deviation over all 25 reassembled entries
    (which includes any imaginary part on the real diagonal entries).
    """
    S = np.asarray(S, dtype=complex)
    if S.shape != (5, 5):
        raise ValueError(f"expected a 5x5 matrix, got {S.shape}")
    form = SymmetryForm(
        s11=float(S[0, 0].real), s22=float(S[1, 1].real), s33=float(S[2, 2].real),
        s21=complex(S[1, 0]), s31=complex(S[2, 0]), s41=complex(S[3, 0]),
        s51=complex(S[4, 0]), s32=complex(S[2, 1]), s42=complex(S[3, 1]),
    )
    residual = float(np.max(np.abs(S - assemble(form))))
    return SymmetryForm(**{**asdict(form), "extraction_residual": residual})


def cofactor_det(M) -> complex:
    """Determinant by Laplace expansion along the first row (small matrices only)."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if n == 1:
        return M[0, 0]
    if n == 2:
        return M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    total = 0j
    for k in range(n):
        if M[0, k] != 0:
            minor = np.delete(M[1:], k, axis=1)
            total += (-1) ** k * M[0, k] * cofactor_det(minor)
    return total


def check_all(form: SymmetryForm, ex: LZExponents) -> ConstraintReport:
    """Evaluate all fourteen constraints as nonnegative residuals."""
    c = np.conj
    s11, s22, s33 = form.s11, form.s22, form.s33
    s21, s31, s41, s51, s32, s42 = form.s21, form.s31, form.s41, form.s51, form.s32, form.s42
    a = abs

    bipartite = a(2 * s22 + s33 - 2 * s11 - 1)
    rows = (
        a(s11**2 + a(s21)**2 + a(s31)**2 + a(s41)**2 + a(s51)**2 - 1),
        a(a(s21)**2 + s22**2 + a(s32)**2 + a(s42)**2 + a(s41)**2 - 1),
        a(2 * a(s31)**2 + 2 * a(s32)**2 + s33**2 - 1),
    )
    phases = (
        a(2 * s11 * s51 + 2 * s21 * s41 + s31**2),
        a(2 * c(s21) * s41 + 2 * s22 * s42 + s32**2),
        a(-s11 * s21 + s21 * s22 + s31 * c(s32) + s41 * c(s42) - s51 * c(s41)),
        a(-s11 * s31 + s21 * s32 + s31 * s33 + s41 * c(s32) - s51 * c(s31)),
        a(-s11 * s41 + s21 * s42 + s31 * s32 + s41 * s22 - s51 * c(s21)),
        a(c(s21) * s31 + s22 * s32 + s32 * s33 + s42 * c(s32) + s41 * c(s31)),
    )
    det2 = cofactor_det([[s11, -c(s21)], [s21, s22]])
    det3 = cofactor_det([
        [s11, -c(s21), -c(s31)],
        [s21, s22, c(s32)],
        [s31, s32, s33],
    ])
    det4 = cofactor_det([
        [s11, -c(s21), -c(s31), c(s51)],
        [s21, s22, c(s32), c(s41)],
        [s31, s32, s33, c(s31)],
        [s51, -s41, -s31, s11],
    ])
    hc = (a(s22 - ex.X), a(det2 - ex.Y), a(det3 - ex.Y), a(det4 - ex.X))
    rows = tuple(float(r) for r in rows)
    phases = tuple(float(r) for r in phases)
    hc = tuple(float(r) for r in hc)
    return ConstraintReport(
        bipartite_residual=float(bipartite),
        unitarity_magnitude_residuals=rows,
        unitarity_phase_residuals=phases,
        hc_residuals=hc,
        max_residual=max((float(bipartite),) + rows + phases + hc),
    )


def phase_invariants(S, ex: LZExponents) -> np.ndarray:
    """Constraint residuals of ``S``; unchanged by diagonal phase conjugation of ``S``."""
    return check_all(extract_symmetry_form(S), ex).values()


def _clamp(name, value):
    if value < -CLAMP_EPS:
        raise InfeasibleInputError(f"|{name}|^2 = {value:.3e} < 0: (S33, |S32|) inconsistent with X, Y")
    return max(value, 0.0)


def reconstruct_magnitudes(s33: float, mag32: float, ex: LZExponents) -> ReconstructedS:
    """All remaining real elements and squared magnitudes from ``S33`` and ``|S32|``."""
    X, Y = ex.X, ex.Y
    if Y < Y_FLOOR:
        raise AdiabaticUnderflowError(f"Y = {Y:.3e} below floor {Y_FLOOR:g}")
    if not abs(s33) <= 1.0 + CLAMP_EPS or mag32 < 0:
        raise InfeasibleInputError(f"need -1 <= S33 <= 1 and |S32| >= 0, got {s33}, {mag32}")
    s33 = min(max(s33, -1.0), 1.0)
    m32 = mag32**2
    z = (X * (1 + s33) - m32) ** 2 / (4 * Y)
    s11 = 0.5 * (s33 - 1) + X
    return ReconstructedS(
        s11=s11,
        s22=X,
        s33=s33,
        mag21_sq=_clamp("S21", -0.5 * X * (s33 - 1) - X**2 + Y),
        mag31_sq=_clamp("S31", 0.5 * (1 - s33**2) - m32),
        mag41_sq=_clamp("S41", -0.5 * X * (s33 - 1) - X**2 + z),
        mag51_sq=_clamp("S51", 0.25 * (1 + s33) ** 2 + m32 + X**2 - Y - z),
        mag32_sq=m32,
        mag42_sq=_clamp("S42", 1 + X * (s33 - 1) - m32 + X**2 - Y - z),
        z=z,
    )


def rotate_elements(form: SymmetryForm) -> RotatedElements:
    if form.s31 == 0 or form.s32 == 0:
        raise UndefinedRotationError("rotation needs nonzero S31 and S32")
    a31 = np.angle(form.s31)
    a32 = np.angle(form.s32)
    return RotatedElements(
        s21=form.s21 * np.exp(1j * (a32 - a31)),
        s41=form.s41 * np.exp(-1j * (a31 + a32)),
        s51=form.s51 * np.exp(-2j * a31),
        s42=form.s42 * np.exp(-2j * a32),
    )


def rotated_residuals(s11, s22, s33, mag31, mag32, mag51_sq, rot: RotatedElements,
                      ex: LZExponents) -> np.ndarray:
    """Moduli of the eight rotated-frame constraints (six unitarity, HC3, HC4)."""
    c = np.conj
    t21, t41, t51, t42 = rot.s21, rot.s41, rot.s51, rot.s42
    m31, m32, Y = mag31, mag32, ex.Y
    return np.abs(np.array([
        2 * s11 * t51 + 2 * t21 * t41 + m31**2,
        2 * c(t21) * t41 + 2 * s22 * t42 + m32**2,
        (s22 - s11) * t21 + m31 * m32 + t41 * c(t42) - t51 * c(t41),
        (s33 - s11) * m31 + t21 * m32 + t41 * m32 - t51 * m31,
        (s22 - s11) * t41 + t21 * t42 + m31 * m32 - t51 * c(t21),
        (s22 + s33) * m32 + c(t21) * m31 + t42 * m32 + t41 * m31,
        Y * s33 - s11 * m32**2 + s22 * m31**2 - m31 * m32 * 2 * t21.real - Y,
        ((1 + s11) ** 2 - mag51_sq) * (s11 - s22) + m31**2 * (1 + s11 - t51.real),
    ]))


def recover_phases(recon: ReconstructedS, ex: LZExponents):
    """Rotated elements implied by the magnitudes; returns ``(plus, minus)``.

    ``Re S~21`` follows from the third hierarchy constraint, ``Im S~21`` up
    to sign from ``|S21|``; ``S~41``, ``S~51`` and ``S~42`` then follow from
    the rotated unitarity relations. ``S~42`` has two exact expressions, one
    divided by ``S22`` and one by ``|S32|``; the larger divisor is used so a
    vanishing ``X`` at slow sweeps does not amplify roundoff. The two branches are complex
    conjugates; which one is physical is not fixed by the constraints.
    """
    m31, m32 = recon.mag31, recon.mag32
    if m31 * m32 == 0:
        raise SingularRecoveryError("phase recovery needs |S31| |S32| > 0")
    s11, s22, s33, Y = recon.s11, recon.s22, recon.s33, ex.Y
    re21 = (Y * s33 - s11 * m32**2 + s22 * m31**2 - Y) / (2 * m31 * m32)
    im_sq = recon.mag21_sq - re21**2
    if im_sq < -CLAMP_EPS:
        raise InfeasibleInputError(f"(Re S~21)^2 exceeds |S21|^2 by {-im_sq:.3e}")
    im21 = math.sqrt(max(im_sq, 0.0))
    ratio = m32 / m31
    branches = []
    for sign, label in ((1.0, "plus"), (-1.0, "minus")):
        t21 = complex(re21, sign * im21)
        denom = t21 + s11 * ratio
        if abs(denom) < _DENOM_EPS:
            raise SingularRecoveryError("vanishing denominator for S~41")
        t41 = -(s11 * (s33 - s11) + 0.5 * m31**2 + s11 * t21 * ratio) / denom
        t51 = s33 - s11 + (t21 + t41) * ratio
        # two exact expressions for S~42; divide by the larger of S22, |S32|
        if abs(s22) >= m32:
            t42 = -(np.conj(t21) * t41 + 0.5 * m32**2) / s22
        else:
            t42 = -((s22 + s33) * m32 + (np.conj(t21) + t41) * m31) / m32
        rot = RotatedElements(t21, complex(t41), complex(t51), complex(t42))
        branches.append(ReconstructedS(**{**_fields(recon), "branch": label, "rotated": rot}))
    return tuple(branches)


def _fields(recon: ReconstructedS) -> dict:
    return {k: getattr(recon, k) for k in recon.__dataclass_fields__ if k not in ("branch", "rotated")}
