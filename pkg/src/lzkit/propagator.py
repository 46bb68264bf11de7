"""Time-dependent Schroedinger propagation and scattering-matrix extraction.

The evolution operator is integrated columnwise with an adaptive
Dormand-Prince 8(5,3) pair. For a linear model ``H = Bt + A`` the
interaction frame ``psi = exp(-i B t^2 / 2) c`` removes the diagonal, so
``H_I(t)_jk = A_jk exp(i (b_j - b_k) t^2 / 2)``.

The scattering matrix is reported in the interaction-frame convention
``S = exp(iBT^2/2) U(T, -T) exp(-iBT^2/2)``. At a finite window the
outgoing and incoming states are read out in the (super)adiabatic basis of
``H(+-T)``, which removes the slowly decaying ``1/T`` coupling tails that a
bare diabatic readout carries; both readouts share the same limit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import _dop853
from .errors import IntegrationError, ParameterError
from .model import LZModelSpec

__all__ = [
    "Frame",
    "Readout",
    "SolverSettings",
    "ScatteringResult",
    "evolve_window",
    "scattering_matrix",
    "scattering_at_window",
    "quench_window",
    "auto_window",
    "channel_basis",
    "LinearHamiltonian",
]

_H_MIN_FRAC = 1e-14


class Frame(str, enum.Enum):
    LAB = "lab"
    INTERACTION = "interaction"


class Readout(str, enum.Enum):
    """How finite-window operators are projected onto asymptotic channels."""

    DIABATIC = "diabatic"
    ADIABATIC = "adiabatic"
    SUPERADIABATIC = "superadiabatic"


@dataclass(frozen=True)
class SolverSettings:
    """Integrator and window-doubling controls.

    ``t_window=None`` selects the automatic initial window
    (:func:`auto_window`).
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    t_window: Optional[float] = None
    window_tol: float = 1e-4
    max_doublings: int = 6
    readout: Readout = Readout.SUPERADIABATIC

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.window_tol > 0):
            raise ParameterError("rel_tol, abs_tol and window_tol must be positive")
        if int(self.max_doublings) != self.max_doublings or self.max_doublings < 0:
            raise ParameterError("max_doublings must be a non-negative integer")
        if self.t_window is not None and not self.t_window > 0:
            raise ParameterError("t_window must be positive or None")
        object.__setattr__(self, "readout", Readout(self.readout))
        object.__setattr__(self, "max_doublings", int(self.max_doublings))

    @classmethod
    def from_dict(cls, data: dict) -> "SolverSettings":
        data = dict(data)
        if data.get("t_window") in ("AUTO", "auto"):
            data["t_window"] = None
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ParameterError(f"unknown solver keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "t_window": "AUTO" if self.t_window is None else self.t_window,
            "window_tol": self.window_tol,
            "max_doublings": self.max_doublings,
            "readout": self.readout.value,
        }


@dataclass
class ScatteringResult:
    """Scattering matrix at the last window of the doubling protocol.

    ``window_change`` is the convergence metric between the last two
    windows (``nan`` when only one window was run); ``phase_drift`` holds
    the per-entry change of ``arg S`` between those windows, ``nan`` where an
    entry is too small to carry a phase.
    """

    s_matrix: np.ndarray
    p_matrix: np.ndarray
    t_window_used: float
    converged: bool
    unitarity_residual: float
    window_change: float = math.nan
    doublings: int = 0
    phase_drift: np.ndarray = field(default=None, repr=False)


class LinearHamiltonian:
    """Callable ``H(t) = t * slope_matrix + offset`` with dense matrices.

    Passing one of these to :func:`quench_window` selects the compiled
    integrator path; any other callable goes through SciPy.
    """

    def __init__(self, slope_matrix, offset):
        self.slope_matrix = np.asarray(slope_matrix, dtype=complex)
        self.offset = np.asarray(offset, dtype=complex)

    def __call__(self, t):
        return t * self.slope_matrix + self.offset


def _coupled_rate(spec: LZModelSpec) -> float:
    pairs = spec.coupled_pairs()
    if not pairs:
        return 0.0
    return max(abs(spec.slopes[j] - spec.slopes[k]) for j, k in pairs)


def auto_window(spec: LZModelSpec) -> float:
    """Initial half-window for the doubling protocol.

    ``max(8 / sqrt(min |db|), 2 max |A_jk| / |db_jk|)`` over coupled pairs:
    the first term covers the diabatic transition width, the second the
    adiabatic mixing region at slow sweeps.
    """
    pairs = spec.coupled_pairs()
    if not pairs:
        return 1.0
    diffs = np.array([abs(spec.slopes[j] - spec.slopes[k]) for j, k in pairs])
    if np.any(diffs == 0):
        raise ParameterError("coupled levels must have distinct slopes")
    gs = np.array([abs(spec.couplings[j, k]) for j, k in pairs])
    return float(max(8.0 / math.sqrt(diffs.min()), 2.0 * np.max(gs / diffs)))


def _run(mode, t_i, t_f, Y0, P, Q, rows, cols, settings, rate):
    Y, t_reached, _, _, status = _dop853.integrate(
        mode, float(t_i), float(t_f), Y0, P, Q, rows, cols,
        settings.rel_tol, settings.abs_tol, float(rate), _H_MIN_FRAC,
        _dop853.TABLEAU_A, _dop853.TABLEAU_B, _dop853.TABLEAU_C,
        _dop853.ERR_E3, _dop853.ERR_E5,
    )
    if status != _dop853.STATUS_OK:
        raise IntegrationError("step size underflow", t_reached)
    return Y


def evolve_window(spec: LZModelSpec, t_i: float, t_f: float,
                  settings: Optional[SolverSettings] = None,
                  frame: Frame = Frame.INTERACTION) -> np.ndarray:
    """Evolution operator ``U(t_f, t_i)`` in the requested frame."""
    settings = settings or SolverSettings()
    if not t_f > t_i:
        raise ParameterError(f"need t_i < t_f, got {t_i}, {t_f}")
    n = spec.n_levels
    Y0 = np.eye(n, dtype=complex)
    frame = Frame(frame)
    if frame is Frame.INTERACTION:
        pairs = spec.coupled_pairs()
        if not pairs:
            return Y0
        rows = np.array([j for j, k in pairs] + [k for j, k in pairs], dtype=np.int64)
        cols = np.array([k for j, k in pairs] + [j for j, k in pairs], dtype=np.int64)
        half_diff = 0.5 * (spec.slopes[:, None] - spec.slopes[None, :])
        return _run(_dop853.MODE_INTERACTION, t_i, t_f, Y0,
                    spec.couplings, half_diff.astype(complex), rows, cols,
                    settings, _coupled_rate(spec))
    empty = np.zeros(0, dtype=np.int64)
    P = np.diag(spec.slopes).astype(complex)
    rate = float(np.max(np.abs(spec.slopes))) if n else 0.0
    return _run(_dop853.MODE_LINEAR, t_i, t_f, Y0, P, spec.couplings,
                empty, empty, settings, rate)


def channel_basis(spec: LZModelSpec, t: float, readout: Readout = Readout.SUPERADIABATIC):
    """Asymptotic-channel readout basis at time ``t`` (lab frame).

    Returns ``(W, K)``: the columns of ``W`` are adiabatic eigenvectors of
    ``H(t)``, column ``j`` being the one that connects to diabatic level
    ``j`` as ``|t|`` grows, phased so ``W[j, j] > 0``. ``K`` is the Hermitian
    first-order nonadiabatic generator
    ``K_nm = -<n|B|m> / (E_n - E_m)^2`` (zero for plain adiabatic readout).
    """
    readout = Readout(readout)
    n = spec.n_levels
    if readout is Readout.DIABATIC:
        return np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex)
    if len(np.unique(spec.slopes)) != n:
        raise ParameterError("adiabatic readout needs pairwise distinct slopes")
    H = np.diag(spec.slopes * t) + spec.couplings
    energies, vectors = np.linalg.eigh(H)
    order = np.argsort(spec.slopes if t > 0 else -spec.slopes)
    W = np.empty((n, n), dtype=complex)
    E = np.empty(n)
    W[:, order] = vectors
    E[order] = energies
    for j in range(n):
        w = W[j, j]
        if abs(w) > 0:
            W[:, j] *= abs(w) / w
    K = np.zeros((n, n), dtype=complex)
    if readout is Readout.SUPERADIABATIC:
        Bn = W.conj().T @ (spec.slopes[:, None] * W)
        gaps = E[:, None] - E[None, :]
        np.fill_diagonal(gaps, 1.0)
        K = -Bn / gaps**2
        np.fill_diagonal(K, 0.0)
    return W, K


def scattering_at_window(spec: LZModelSpec, T: float,
                         settings: Optional[SolverSettings] = None) -> np.ndarray:
    """Finite-window estimate of ``S`` over ``[-T, T]`` without doubling."""
    settings = settings or SolverSettings()
    U_I = evolve_window(spec, -T, T, settings, Frame.INTERACTION)
    W_out, K_out = channel_basis(spec, T, settings.readout)
    W_in, K_in = channel_basis(spec, -T, settings.readout)
    phase = np.exp(0.5j * spec.slopes * T * T)
    out = expm(-1j * K_out) @ W_out.conj().T
    inc = W_in @ expm(1j * K_in)
    # conjugate the lab-frame readout into the interaction frame
    out = phase[:, None] * out * phase.conj()[None, :]
    inc = phase[:, None] * inc * phase.conj()[None, :]
    return out @ U_I @ inc


def _phase_drift(new, old, floor=1e-8):
    drift = np.full(new.shape, np.nan)
    ok = (np.abs(new) > floor) & (np.abs(old) > floor)
    drift[ok] = np.angle(new[ok] * np.conj(old[ok]))
    return drift


def scattering_matrix(spec: LZModelSpec, settings: Optional[SolverSettings] = None,
                      invariants: Optional[Callable[[np.ndarray], np.ndarray]] = None
                      ) -> ScatteringResult:
    """Scattering matrix by window doubling.

    Starting from ``settings.t_window`` (or :func:`auto_window`) the window
    is doubled until the largest change in ``|S_jk|^2``, and in the optional
    phase-invariant quantities ``invariants(S)``, drops below
    ``settings.window_tol``. After ``max_doublings`` unsuccessful doublings
    the last estimate is returned with ``converged=False``.
    """
    settings = settings or SolverSettings()
    if any(spec.slopes[j] == spec.slopes[k] for j, k in spec.coupled_pairs()):
        raise ParameterError("coupled levels must have distinct slopes")
    T = settings.t_window if settings.t_window is not None else auto_window(spec)

    def metrics(S):
        P = np.abs(S) ** 2
        extra = np.asarray(invariants(S), dtype=float).ravel() if invariants else np.zeros(0)
        return P, extra

    S = scattering_at_window(spec, T, settings)
    P, extra = metrics(S)
    change = math.nan
    drift = np.full(S.shape, np.nan)
    converged = False
    doublings = 0
    while doublings < settings.max_doublings:
        T *= 2.0
        doublings += 1
        S_new = scattering_at_window(spec, T, settings)
        P_new, extra_new = metrics(S_new)
        change = float(np.max(np.abs(P_new - P)))
        if extra.size:
            change = max(change, float(np.max(np.abs(extra_new - extra))))
        drift = _phase_drift(S_new, S)
        S, P, extra = S_new, P_new, extra_new
        if change < settings.window_tol:
            converged = True
            break
    n = spec.n_levels
    unitarity = float(np.max(np.abs(S.conj().T @ S - np.eye(n))))
    return ScatteringResult(
        s_matrix=S,
        p_matrix=P,
        t_window_used=T,
        converged=converged,
        unitarity_residual=unitarity,
        window_change=change,
        doublings=doublings,
        phase_drift=drift,
    )


def quench_window(spec_builder: Callable[[float], np.ndarray], t_i: float, t_f: float,
                  settings: Optional[SolverSettings] = None) -> np.ndarray:
    """Lab-frame ``U(t_f, t_i)`` for an arbitrary Hermitian ``H(t)``.

    A :class:`LinearHamiltonian` (or any object exposing ``slope_matrix``
    and ``offset``) runs on the compiled integrator; other callables are
    integrated with SciPy's DOP853 at the same tolerances.
    """
    settings = settings or SolverSettings()
    if not (np.isfinite(t_i) and np.isfinite(t_f) and t_f > t_i):
        raise ParameterError(f"need finite t_i < t_f, got {t_i}, {t_f}")
    slope = getattr(spec_builder, "slope_matrix", None)
    offset = getattr(spec_builder, "offset", None)
    if slope is not None and offset is not None:
        P = np.ascontiguousarray(slope, dtype=complex)
        Q = np.ascontiguousarray(offset, dtype=complex)
        n = P.shape[0]
        rate = float(np.max(np.abs(np.linalg.eigvalsh(P)))) if n else 0.0
        empty = np.zeros(0, dtype=np.int64)
        return _run(_dop853.MODE_LINEAR, t_i, t_f, np.eye(n, dtype=complex), P, Q,
                    empty, empty, settings, rate)

    n = np.asarray(spec_builder(t_i)).shape[0]

    def rhs(t, y):
        return (-1j * (np.asarray(spec_builder(t), dtype=complex) @ y.reshape(n, n))).ravel()

    sol = solve_ivp(rhs, (t_i, t_f), np.eye(n, dtype=complex).ravel(), method="DOP853",
                    rtol=settings.rel_tol, atol=settings.abs_tol)
    if not sol.success:
        raise IntegrationError(sol.message, float(sol.t[-1]))
    return sol.y[:, -1].reshape(n, n)
