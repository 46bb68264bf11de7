"""Odd-length SSH chains under a linear quench and their LZ form.

A chain of ``2N - 1`` sites with hoppings ``J1 = 1/2 + beta t`` and
``J2 = 1/2 - beta t`` is linear in time, ``H = B t + A``. Rotating with the
eigenvectors of ``B`` yields a bipartite multistate LZ model whose levels are
indexed symmetrically by ``l = -N+1 .. N-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MappingConsistencyError, ParameterError, UnsupportedSizeError
from .model import FiveStateParams, LZModelSpec
from .propagator import LinearHamiltonian, SolverSettings, quench_window

__all__ = [
    "SSHChainSpec",
    "SSHMapping",
    "FIVE_STATE_ORDER",
    "V_PRINTED_N3",
    "build_ssh_hamiltonian",
    "ssh_linear_parts",
    "build_mapping",
    "lz_spec",
    "to_five_state",
    "edge_transfer",
]

#: Position in the ``l = -2..2`` ordering of each five-state level 1..5
#: (levels ``-2, -1, 0, 1, 2`` are five-state levels ``2, 1, 3, 5, 4``).
FIVE_STATE_ORDER = (1, 0, 2, 4, 3)

_r3 = math.sqrt(3.0)
V_PRINTED_N3 = np.array([
    [1 / (2 * _r3), 0.5, 1 / _r3, 0.5, 1 / (2 * _r3)],
    [-0.5, -0.5, 0.0, 0.5, 0.5],
    [-1 / _r3, 0.0, 1 / _r3, 0.0, -1 / _r3],
    [0.5, -0.5, 0.0, 0.5, -0.5],
    [1 / (2 * _r3), -0.5, 1 / _r3, -0.5, 1 / (2 * _r3)],
])


@dataclass(frozen=True)
class SSHChainSpec:
    n_half: int
    beta: float

    def __post_init__(self):
        if int(self.n_half) != self.n_half or self.n_half < 2:
            raise ParameterError(f"n_half must be an integer >= 2, got {self.n_half}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")

    @property
    def n_sites(self) -> int:
        return 2 * self.n_half - 1

    @property
    def indices(self) -> np.ndarray:
        """Symmetric LZ level labels ``-N+1 .. N-1``."""
        return np.arange(-self.n_half + 1, self.n_half)

    @property
    def quench_time(self) -> float:
        """``1/(2 beta)``: the chain is fully dimerised at ``t = -+ quench_time``."""
        return 0.5 / self.beta


@dataclass(frozen=True)
class SSHMapping:
    v_matrix: np.ndarray
    b_lz: np.ndarray
    a_lz: np.ndarray
    indices: np.ndarray


def ssh_linear_parts(spec: SSHChainSpec):
    """``(B, A)`` with ``H_SSH(t) = B t + A``."""
    n = spec.n_sites
    bonds = np.arange(n - 1)
    signs = np.where(bonds % 2 == 0, 1.0, -1.0)
    B = spec.beta * (np.diag(signs, 1) + np.diag(signs, -1))
    A = 0.5 * (np.eye(n, k=1) + np.eye(n, k=-1))
    return B, A


def build_ssh_hamiltonian(spec: SSHChainSpec, t: float) -> np.ndarray:
    """Tridiagonal chain Hamiltonian, ``J1`` on bond (1,2), alternating with ``J2``."""
    B, A = ssh_linear_parts(spec)
    return B * t + A


def _closed_form_couplings(spec: SSHChainSpec) -> np.ndarray:
    N = spec.n_half
    k = np.pi * spec.indices / N
    cos_half, sin_half = np.cos(k / 2), np.sin(k / 2)
    odd = (spec.indices[:, None] + spec.indices[None, :]) % 2 == 1
    denom = sin_half[:, None] + sin_half[None, :]
    # opposite-parity labels never give l = -m, so the sine sum stays nonzero
    assert np.all(np.abs(denom[odd]) > 1e-12)
    a = np.zeros((spec.n_sites, spec.n_sites))
    a[odd] = (np.outer(cos_half, cos_half)[odd] / denom[odd]) / N
    return a


def build_mapping(spec: SSHChainSpec, atol: float = 1e-10) -> SSHMapping:
    """Eigenvector matrix ``V`` and the closed-form ``B_LZ``, ``A_LZ``.

    ``A_LZ`` from the closed form is cross-checked against ``V^T A V``.
    """
    N = spec.n_half
    x = np.arange(1, spec.n_sites + 1)[:, None]
    k = np.pi * spec.indices[None, :] / N
    V = np.where(x % 2 == 0, np.sin(0.5 * k * x), np.cos(0.5 * k * x)) / math.sqrt(N)
    b_lz = 2.0 * spec.beta * np.sin(0.5 * np.pi * spec.indices / N)
    a_lz = _closed_form_couplings(spec)
    _, A = ssh_linear_parts(spec)
    mismatch = np.max(np.abs(V.T @ A @ V - a_lz))
    if mismatch > atol:
        raise MappingConsistencyError(f"closed-form A_LZ deviates from V^T A V by {mismatch:.3e}")
    return SSHMapping(v_matrix=V, b_lz=b_lz, a_lz=a_lz, indices=spec.indices.copy())


def lz_spec(mapping: SSHMapping) -> LZModelSpec:
    return LZModelSpec(slopes=mapping.b_lz, couplings=mapping.a_lz)


def to_five_state(spec: SSHChainSpec, atol: float = 1e-12) -> FiveStateParams:
    """Five-state parameters of the ``N = 3`` chain, checked against the mapping."""
    if spec.n_half != 3:
        raise UnsupportedSizeError(f"five-state identification needs N=3, got N={spec.n_half}")
    params = FiveStateParams(
        b1=1.0,
        b2=_r3,
        g12=-(3.0 - _r3) / 12.0,
        g13=-_r3 / 3.0,
        g14=(3.0 + _r3) / 12.0,
        beta=spec.beta,
    )
    mapping = build_mapping(spec)
    order = list(FIVE_STATE_ORDER)
    a_perm = mapping.a_lz[np.ix_(order, order)]
    b_perm = mapping.b_lz[order]
    if (np.max(np.abs(a_perm - params.coupling_matrix)) > atol
            or np.max(np.abs(b_perm - params.slopes)) > atol):
        raise MappingConsistencyError("permuted chain mapping disagrees with five-state parameters")
    return params


def edge_transfer(spec: SSHChainSpec, settings: SolverSettings | None = None):
    """Amplitudes ``<1|U|1>`` and ``<2N-1|U|1>`` for the full quench.

    The window runs from ``-1/(2 beta)`` to ``1/(2 beta)``, joining the two
    dimerised limits.
    """
    B, A = ssh_linear_parts(spec)
    tq = spec.quench_time
    U = quench_window(LinearHamiltonian(B, A), -tq, tq, settings)
    return complex(U[0, 0]), complex(U[-1, 0])
