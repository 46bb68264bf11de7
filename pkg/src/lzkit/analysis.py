"""Sweep-rate scans, analytic fit models and diabatic-limit series.

The two independent unknowns ``S33`` and ``|S32|`` are scanned over a log
grid of sweep rates and fitted with exponential forms in ``1/beta``.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .constraints import ConstraintReport, SymmetryForm, check_all, extract_symmetry_form, phase_invariants
from .errors import DegeneracyError, InsufficientDataError, LZError, ParameterError
from .model import FiveStateParams, LZExponents, compute_exponents, five_state_spec
from .propagator import ScatteringResult, SolverSettings, scattering_matrix

__all__ = [
    "SweepGrid",
    "SweepRow",
    "FitModel",
    "Target",
    "FitResult",
    "PointSolution",
    "solve_point",
    "run_sweep",
    "fit",
    "series_s11",
    "series_s32",
    "series_s33",
    "write_sweep_csv",
    "read_sweep_csv",
    "SWEEP_HEADER",
]

START_GRID = (0.05, 0.2, 0.8, 3.2)
MAX_STARTS = 256
MAX_ITER = 500
STEP_TOL = 1e-12
_EXP_CLIP = 700.0


@dataclass(frozen=True)
class SweepGrid:
    """Log-uniform grid of sweep rates, endpoints included."""

    beta_min: float = 1e-3
    beta_max: float = 1e3
    n_points: int = 61
    spacing: str = "log"

    def __post_init__(self):
        if not 0 < self.beta_min < self.beta_max:
            raise ParameterError("need 0 < beta_min < beta_max")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ParameterError("n_points must be an integer >= 2")
        if self.spacing != "log":
            raise ParameterError(f"only log spacing is supported, got {self.spacing!r}")

    def points(self) -> np.ndarray:
        return np.logspace(math.log10(self.beta_min), math.log10(self.beta_max), int(self.n_points))


@dataclass
class SweepRow:
    beta: float
    s33: float
    mag32: float
    p_matrix: np.ndarray
    constraint_max_residual: float
    converged: bool


@dataclass
class PointSolution:
    """Propagated scattering data for one sweep rate."""

    params: FiveStateParams
    exponents: LZExponents
    result: ScatteringResult
    form: SymmetryForm
    report: ConstraintReport

    def row(self) -> SweepRow:
        return SweepRow(
            beta=self.params.beta,
            s33=self.form.s33,
            mag32=abs(self.form.s32),
            p_matrix=self.result.p_matrix,
            constraint_max_residual=self.report.max_residual,
            converged=self.result.converged,
        )


def solve_point(p: FiveStateParams, settings: Optional[SolverSettings] = None) -> PointSolution:
    """Propagate the five-state model and evaluate every constraint.

    Window convergence tracks probabilities and the constraint residuals.
    """
    ex = compute_exponents(p)
    result = scattering_matrix(five_state_spec(p), settings,
                               invariants=lambda S: phase_invariants(S, ex))
    form = extract_symmetry_form(result.s_matrix)
    return PointSolution(p, ex, result, form, check_all(form, ex))


def _sweep_row(args) -> SweepRow:
    p, settings = args
    try:
        return solve_point(p, settings).row()
    except LZError:
        return SweepRow(p.beta, math.nan, math.nan, np.full((5, 5), math.nan), math.nan, False)


def run_sweep(p: FiveStateParams, grid: SweepGrid = SweepGrid(),
              settings: Optional[SolverSettings] = None, workers: int = 1) -> list[SweepRow]:
    """One row per grid point, ordered by increasing ``beta``.

    A failed propagation yields a row with ``converged=False`` and NaN data
    rather than aborting the scan.
    """
    settings = settings or SolverSettings()
    jobs = [(p.with_beta(b), settings) for b in grid.points()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(job) for job in jobs]


# --- fit models -------------------------------------------------------------


def _e(c, beta):
    return np.exp(np.clip(-c / beta, -_EXP_CLIP, _EXP_CLIP))


def _s33_two_exp(q, beta):
    u, v = q
    return (1 - 2 * _e(u, beta)) * (1 - 2 * _e(v, beta))


def _s33_two_exp_jac(q, beta):
    u, v = q
    eu, ev = _e(u, beta), _e(v, beta)
    return np.column_stack([
        (2 * eu / beta) * (1 - 2 * ev),
        (1 - 2 * eu) * (2 * ev / beta),
    ])


def _s33_four(q, beta):
    u1, u2, v1, v2 = q
    return (1 - _e(u1, beta) - _e(u2, beta)) * (1 - _e(v1, beta) - _e(v2, beta))


def _s33_four_jac(q, beta):
    u1, u2, v1, v2 = q
    fu = 1 - _e(u1, beta) - _e(u2, beta)
    fv = 1 - _e(v1, beta) - _e(v2, beta)
    return np.column_stack([
        _e(u1, beta) / beta * fv,
        _e(u2, beta) / beta * fv,
        fu * _e(v1, beta) / beta,
        fu * _e(v2, beta) / beta,
    ])


def _s32_three(q, beta):
    u, v, w = q
    return w * _e(u, beta) * (1 - _e(v, beta))


def _s32_three_jac(q, beta):
    u, v, w = q
    eu, ev = _e(u, beta), _e(v, beta)
    return np.column_stack([
        -w * eu / beta * (1 - ev),
        w * eu * ev / beta,
        eu * (1 - ev),
    ])


def _canonical_two(q):
    return np.sort(q)


def _canonical_four(q):
    pairs = sorted([tuple(np.sort(q[:2])), tuple(np.sort(q[2:]))])
    return np.array(pairs[0] + pairs[1])


class Target(str, enum.Enum):
    S33 = "s33"
    MAG32 = "abs_s32"


class FitModel(enum.Enum):
    """Analytic forms in ``1/beta``.

    * ``S33_TWO_EXP``: ``(1 - 2e^{-u/b})(1 - 2e^{-v/b})``
    * ``S33_FOUR_PARAM``: ``(1 - e^{-u1/b} - e^{-u2/b})(1 - e^{-v1/b} - e^{-v2/b})``
    * ``S32_THREE_PARAM``: ``w e^{-u/b}(1 - e^{-v/b})``

    Fitted parameters are reported in a canonical order since the S33 forms
    are symmetric under factor and term exchanges: ``u <= v`` for the
    two-exponent form; for the four-parameter form each pair is sorted and
    the pair with the smaller leading value comes first.
    """

    S33_TWO_EXP = ("s33-two-exp", 2, Target.S33, _s33_two_exp, _s33_two_exp_jac, _canonical_two)
    S33_FOUR_PARAM = ("s33-four-param", 4, Target.S33, _s33_four, _s33_four_jac, _canonical_four)
    S32_THREE_PARAM = ("s32-three-param", 3, Target.MAG32, _s32_three, _s32_three_jac, None)

    def __init__(self, label, n_params, target, func, jac, canonical):
        self.label = label
        self.n_params = n_params
        self.default_target = target
        self._func = func
        self._jac = jac
        self._canonical = canonical

    @classmethod
    def from_label(cls, label: str) -> "FitModel":
        for m in cls:
            if m.label == label:
                return m
        raise ParameterError(f"unknown fit model {label!r}; choose from {[m.label for m in cls]}")

    def __call__(self, params, beta):
        return self._func(np.asarray(params, dtype=float), np.asarray(beta, dtype=float))

    def jacobian(self, params, beta):
        return self._jac(np.asarray(params, dtype=float), np.asarray(beta, dtype=float))

    def canonical(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        return self._canonical(params) if self._canonical else params


@dataclass
class FitResult:
    params: np.ndarray
    residual_max: float
    residual_rms: float
    converged: bool
    starts_tried: int
    model: Optional[FitModel] = None
    target: Optional[Target] = None
    n_rows: int = 0

    def to_dict(self) -> dict:
        return {
            "model": self.model.label if self.model else None,
            "target": self.target.value if self.target else None,
            "params": [float(x) for x in self.params],
            "residual_max": float(self.residual_max),
            "residual_rms": float(self.residual_rms),
            "converged": bool(self.converged),
            "starts_tried": int(self.starts_tried),
            "n_rows": int(self.n_rows),
        }


def fit(model: FitModel, rows: Sequence[SweepRow], target: Optional[Target] = None,
        params: Optional[FiveStateParams] = None) -> FitResult:
    """Least-squares fit of ``model`` to the converged rows.

    Every start on the grid ``START_GRID ** n_params`` (in lexicographic
    order, at most ``MAX_STARTS``) is refined with Levenberg-Marquardt; the
    lowest sum of squares wins, ties going to the earlier start. Passing the
    model ``params`` lets degenerate S33 fits be refused up front.
    """
    target = Target(target) if target is not None else model.default_target
    if params is not None and target is Target.S33 and params.is_degenerate():
        raise DegeneracyError(
            "S33 fit refused: |g12| = |g14| makes three adiabatic levels cross at t=0 "
            "(the model experiences a degeneracy), so the fit forms do not apply"
        )
    good = [r for r in rows if r.converged and np.isfinite(r.s33) and np.isfinite(r.mag32)]
    if len(good) < model.n_params + 1:
        raise InsufficientDataError(
            f"{model.label} needs at least {model.n_params + 1} converged rows, got {len(good)}"
        )
    beta = np.array([r.beta for r in good])
    data = np.array([r.s33 if target is Target.S33 else r.mag32 for r in good])

    best = None
    starts = list(itertools.islice(itertools.product(START_GRID, repeat=model.n_params), MAX_STARTS))
    with np.errstate(over="ignore", invalid="ignore"):
        for start in starts:
            try:
                sol = least_squares(
                    lambda q: model(q, beta) - data,
                    np.array(start, dtype=float),
                    jac=lambda q: model.jacobian(q, beta),
                    method="lm",
                    xtol=STEP_TOL,
                    ftol=1e-15,
                    gtol=1e-15,
                    max_nfev=MAX_ITER,
                )
            except ValueError:
                continue
            if not np.all(np.isfinite(sol.fun)):
                continue
            cost = float(np.sum(sol.fun**2))
            if best is None or cost < best[0]:
                best = (cost, sol)
    if best is None:
        return FitResult(np.full(model.n_params, math.nan), math.inf, math.inf, False,
                         len(starts), model, target, len(good))
    sol = best[1]
    q = model.canonical(sol.x)
    resid = model(q, beta) - data
    return FitResult(
        params=q,
        residual_max=float(np.max(np.abs(resid))),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        converged=bool(sol.status > 0),
        starts_tried=len(starts),
        model=model,
        target=target,
        n_rows=len(good),
    )


# --- diabatic series --------------------------------------------------------


def series_s11(ex: LZExponents, beta: float) -> float:
    """``S11`` through second order in ``1/beta``."""
    g2, g3, g4 = ex.gamma2, ex.gamma3, ex.gamma4
    return math.exp(-(g2 + g3 + g4) / beta) - g2 * g3 / beta**2


def series_s32(ex: LZExponents, beta: float) -> float:
    """Leading-order ``|S32|``."""
    return math.sqrt(ex.gamma3 * (ex.gamma2 + ex.gamma4)) / beta


def series_s33(ex: LZExponents, beta: float) -> float:
    g2, g3, g4 = ex.gamma2, ex.gamma3, ex.gamma4
    return 1.0 + 2.0 * (math.exp(-(g2 + g4) / beta) * (math.exp(-g3 / beta) - 1.0) - g2 * g3 / beta**2)


# --- CSV --------------------------------------------------------------------

SWEEP_HEADER = (
    ["beta", "s33", "abs_s32"]
    + [f"p{i}{j}" for i in range(1, 6) for j in range(1, 6)]
    + ["constraint_residual", "converged"]
)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_sweep_csv(rows: Iterable[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow(
                [_fmt(r.beta), _fmt(r.s33), _fmt(r.mag32)]
                + [_fmt(x) for x in np.asarray(r.p_matrix).ravel()]
                + [_fmt(r.constraint_max_residual), "true" if r.converged else "false"]
            )


def read_sweep_csv(path) -> list[SweepRow]:
    """Parse a sweep CSV; raises ``ValueError`` on a schema mismatch."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise ValueError(f"{path}: header does not match the sweep schema")
        rows = []
        for lineno, rec in enumerate(reader, 2):
            if len(rec) != len(SWEEP_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(SWEEP_HEADER)} fields, got {len(rec)}")
            flag = rec[-1].strip().lower()
            if flag not in ("true", "false"):
                raise ValueError(f"{path}:{lineno}: converged must be true/false")
            values = [float(x) for x in rec[:-1]]
            rows.append(SweepRow(
                beta=values[0],
                s33=values[1],
                mag32=values[2],
                p_matrix=np.array(values[3:28]).reshape(5, 5),
                constraint_max_residual=values[28],
                converged=flag == "true",
            ))
    return rows
