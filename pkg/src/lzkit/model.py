"""Linear-in-time Hamiltonians and the five-state bipartite model.

All models here have the form ``H(t) = B t + A`` with ``B`` diagonal (the
diabatic slopes) and ``A`` a constant Hermitian coupling matrix with zero
diagonal, so every diabatic level crosses at ``t = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ParameterError

__all__ = [
    "LZModelSpec",
    "FiveStateParams",
    "LZExponents",
    "THETA",
    "GAMMA",
    "SSH_PARAMS",
    "SECOND_PARAMS",
    "WIDE_PARAMS",
    "DEGENERATE_PARAMS",
    "build_five_state",
    "build_generic",
    "five_state_spec",
    "compute_exponents",
    "load_params",
    "dump_params",
]

#: Time-reversal conjugation, ``H(-t) = -THETA H(t) THETA``.
THETA = np.diag([-1.0, 1.0, 1.0, 1.0, -1.0])
#: Chiral conjugation (unit anti-diagonal), ``H(t) = -GAMMA H(t) GAMMA``.
GAMMA = np.fliplr(np.eye(5))

_HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class LZModelSpec:
    """Generic multistate Landau-Zener model ``H(t) = diag(slopes) t + couplings``.

    Parameters
    ----------
    slopes : array_like, shape (n,)
        Diabatic slopes (energy per unit time), already including any sweep
        rate.
    couplings : array_like, shape (n, n)
        Constant Hermitian coupling matrix with zero diagonal.
    """

    slopes: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        slopes = np.asarray(self.slopes, dtype=float)
        couplings = np.asarray(self.couplings, dtype=complex)
        n = slopes.shape[0]
        if slopes.ndim != 1 or n < 1:
            raise ParameterError("slopes must be a non-empty vector")
        if couplings.shape != (n, n):
            raise ParameterError(f"couplings must be {n}x{n}, got {couplings.shape}")
        if not np.allclose(couplings, couplings.conj().T, atol=_HERMITIAN_ATOL, rtol=0):
            raise ParameterError("couplings must be Hermitian")
        if np.any(np.abs(np.diag(couplings)) > _HERMITIAN_ATOL):
            raise ParameterError("couplings must have a zero diagonal")
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "couplings", couplings)

    @property
    def n_levels(self) -> int:
        return self.slopes.shape[0]

    def coupled_pairs(self):
        """Index pairs ``(j, k)``, ``j < k``, with a nonzero coupling."""
        j, k = np.nonzero(np.triu(np.abs(self.couplings) > 0, 1))
        return list(zip(j.tolist(), k.tolist()))


@dataclass(frozen=True)
class FiveStateParams:
    """Parameters of the five-state model.

    ``b1`` and ``b2`` are slope coefficients at unit sweep rate; the
    effective slopes are ``beta * b1`` and ``beta * b2``.
    """

    b1: float
    b2: float
    g12: float
    g13: float
    g14: float
    beta: float = 1.0

    def __post_init__(self):
        for name in ("b1", "b2", "g12", "g13", "g14", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.beta <= 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if not self.b2 > self.b1 > 0:
            raise ParameterError(f"slopes must satisfy b2 > b1 > 0, got b1={self.b1}, b2={self.b2}")

    def with_beta(self, beta: float) -> "FiveStateParams":
        return replace(self, beta=float(beta))

    @property
    def slopes(self) -> np.ndarray:
        b1, b2 = self.beta * self.b1, self.beta * self.b2
        return np.array([-b1, -b2, 0.0, b2, b1])

    @property
    def coupling_matrix(self) -> np.ndarray:
        g12, g13, g14 = self.g12, self.g13, self.g14
        a = np.zeros((5, 5))
        a[0, 1:4] = (g12, g13, g14)
        a[4, 1:4] = (-g14, -g13, -g12)
        return a + a.T

    def is_degenerate(self, rel: float = 1e-6) -> bool:
        """True when ``|g12| = |g14|``, where three adiabatic levels meet at t=0."""
        scale = max(abs(self.g12), abs(self.g14))
        return abs(abs(self.g12) - abs(self.g14)) <= rel * scale


@dataclass(frozen=True)
class LZExponents:
    """Landau-Zener exponents derived from a :class:`FiveStateParams`.

    ``omega*`` and ``p*`` refer to the actual sweep rate; ``gamma*`` are
    normalised to unit rate so that ``gamma_i / beta = pi * Omega_1i``.
    """

    omega12: float
    omega13: float
    omega14: float
    p12: float
    p13: float
    p14: float
    gamma2: float
    gamma3: float
    gamma4: float
    X: float
    Y: float


SSH_PARAMS = FiveStateParams(
    b1=1.0,
    b2=math.sqrt(3.0),
    g12=-(3.0 - math.sqrt(3.0)) / 12.0,
    g13=-math.sqrt(3.0) / 3.0,
    g14=(3.0 + math.sqrt(3.0)) / 12.0,
)
SECOND_PARAMS = FiveStateParams(b1=1.0, b2=math.sqrt(3.0), g12=0.5, g13=1.0, g14=1.0)
WIDE_PARAMS = FiveStateParams(b1=1.0, b2=3.0, g12=0.5, g13=1.0, g14=1.0)
DEGENERATE_PARAMS = FiveStateParams(b1=1.0, b2=math.sqrt(3.0), g12=1.0, g13=1.0, g14=1.0)


def build_five_state(p: FiveStateParams, t: float) -> np.ndarray:
    """Five-state Hamiltonian at time ``t`` (real symmetric 5x5)."""
    return np.diag(p.slopes * t) + p.coupling_matrix


def five_state_spec(p: FiveStateParams) -> LZModelSpec:
    return LZModelSpec(slopes=p.slopes, couplings=p.coupling_matrix)


def build_generic(spec: LZModelSpec, t: float) -> np.ndarray:
    return np.diag(spec.slopes * t).astype(complex) + spec.couplings


def compute_exponents(p: FiveStateParams) -> LZExponents:
    """LZ exponents, survival factors and the combinations ``X``, ``Y``.

    Examples
    --------
    >>> ex = compute_exponents(SSH_PARAMS)
    >>> round(ex.gamma3, 6)
    1.047198
    """
    beta = p.beta
    d12, d13, d14 = p.b2 - p.b1, p.b1, p.b1 + p.b2
    gamma2 = math.pi * p.g12**2 / d12
    gamma3 = math.pi * p.g13**2 / d13
    gamma4 = math.pi * p.g14**2 / d14
    p12 = math.exp(-2.0 * gamma2 / beta)
    p13 = math.exp(-2.0 * gamma3 / beta)
    p14 = math.exp(-2.0 * gamma4 / beta)
    return LZExponents(
        omega12=gamma2 / (math.pi * beta),
        omega13=gamma3 / (math.pi * beta),
        omega14=gamma4 / (math.pi * beta),
        p12=p12,
        p13=p13,
        p14=p14,
        gamma2=gamma2,
        gamma3=gamma3,
        gamma4=gamma4,
        X=math.sqrt(p12 * p14),
        Y=math.sqrt(p13) * p14,
    )


_PARAM_KEYS = ("b1", "b2", "g12", "g13", "g14", "beta")


def load_params(source) -> FiveStateParams:
    """Read a parameter file (path or already-parsed mapping)."""
    if isinstance(source, (str, Path)):
        source = json.loads(Path(source).read_text())
    missing = [k for k in _PARAM_KEYS[:5] if k not in source]
    if missing:
        raise ParameterError(f"parameter block missing keys: {', '.join(missing)}")
    unknown = set(source) - set(_PARAM_KEYS)
    if unknown:
        raise ParameterError(f"unknown parameter keys: {', '.join(sorted(unknown))}")
    return FiveStateParams(**{k: float(source[k]) for k in _PARAM_KEYS if k in source})


def dump_params(p: FiveStateParams) -> dict:
    return {k: float(v) for k, v in asdict(p).items()}
