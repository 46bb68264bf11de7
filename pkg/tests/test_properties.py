import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from lzkit import analysis
from lzkit import constraints as C
from lzkit.analysis import SweepRow
from lzkit.errors import AdiabaticUnderflowError, InfeasibleInputError, SingularRecoveryError
from lzkit.model import GAMMA, THETA, FiveStateParams, build_five_state, compute_exponents, five_state_spec
from lzkit.propagator import SolverSettings, evolve_window

coupling = st.floats(-1.5, 1.5, allow_nan=False)
ratio = st.floats(1.01, 3.0)
beta = st.floats(0.05, 20.0)


@st.composite
def five_state(draw, with_beta=True):
    b1 = draw(st.floats(0.2, 2.0))
    return FiveStateParams(b1, b1 * draw(ratio), draw(coupling), draw(coupling), draw(coupling),
                           beta=draw(beta) if with_beta else 1.0)


@given(five_state(), st.floats(-50, 50))
def test_hamiltonian_symmetries(p, t):
    H = build_five_state(p, t)
    np.testing.assert_allclose(build_five_state(p, -t), -THETA @ H @ THETA, atol=1e-15)
    np.testing.assert_allclose(H, -GAMMA @ H @ GAMMA, atol=1e-15)
    np.testing.assert_array_equal(H, H.T)


@given(five_state(), st.floats(1.1, 10.0))
def test_exponents_bounded_and_monotone(p, factor):
    a = compute_exponents(p)
    b = compute_exponents(p.with_beta(p.beta * factor))
    for name in ("p12", "p13", "p14", "X", "Y"):
        assert 0 <= getattr(a, name) <= getattr(b, name) <= 1
    assert a.X**2 == pytest.approx(a.p12 * a.p14, rel=1e-12)
    assert a.Y <= math.sqrt(a.p13) * (1 + 1e-15)
    assert (a.gamma2, a.gamma3, a.gamma4) == (b.gamma2, b.gamma3, b.gamma4)


@settings(max_examples=25, deadline=None)
@given(five_state())
def test_evolution_symmetries(p):
    s = SolverSettings(rel_tol=1e-10)
    U = evolve_window(five_state_spec(p), -4.0, 4.0, s)
    tol = 100 * s.rel_tol
    assert np.max(np.abs(U.conj().T @ U - np.eye(5))) < tol
    assert np.max(np.abs(THETA @ U @ THETA - U.conj().T)) < tol
    assert np.max(np.abs(GAMMA @ U @ GAMMA - U.conj())) < tol


complex_entry = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)
real_entry = st.floats(-1, 1)


form_entries = st.tuples(real_entry, real_entry, real_entry, *[complex_entry] * 6)


@given(form_entries)
def test_form_round_trip(entries):
    s11, s22, s33, *rest = entries
    form = C.SymmetryForm(*entries)
    back = C.extract_symmetry_form(C.assemble(form))
    assert back.extraction_residual < 1e-15
    np.testing.assert_allclose([back.s11, back.s22, back.s33, back.s21, back.s31, back.s41, back.s51,
                                back.s32, back.s42],
                               [s11, s22, s33, *rest], atol=1e-15)


@given(five_state(), form_entries, st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_residuals_invariant_under_diagonal_phases(p, entries, a, b):
    ex = compute_exponents(p)
    S = C.assemble(C.SymmetryForm(*entries))
    D = np.diag([np.exp(1j * a), np.exp(1j * b), 1, np.exp(-1j * b), np.exp(-1j * a)])
    r1 = C.phase_invariants(S, ex)
    r2 = C.phase_invariants(D @ S @ D.conj(), ex)
    np.testing.assert_allclose(r1, r2, atol=1e-12)
    report = C.check_all(C.extract_symmetry_form(S), ex)
    assert report.max_residual == max(report.values()) and min(report.values()) >= 0


@st.composite
def feasible_pair(draw):
    p = draw(five_state())
    ex = compute_exponents(p)
    s33 = draw(st.floats(-1, 1))
    mag32 = draw(st.floats(0, math.sqrt(max(0.5 * (1 - s33**2), 0.0))))
    try:
        recon = C.reconstruct_magnitudes(s33, mag32, ex)
    except (InfeasibleInputError, AdiabaticUnderflowError):
        assume(False)
    # strictly feasible only: a clamped roundoff negative would add up to 1e-9
    assume(min(recon.mag21_sq, recon.mag41_sq, recon.mag51_sq, recon.mag42_sq) > 0)
    return ex, recon


@settings(suppress_health_check=[HealthCheck.filter_too_much, HealthCheck.too_slow], max_examples=200)
@given(feasible_pair())
def test_reconstruction_conserves_probability(case):
    _, r = case
    assert np.sum(r.column1_probabilities()) == pytest.approx(1.0, abs=1e-12)
    for name in ("mag21_sq", "mag31_sq", "mag41_sq", "mag51_sq", "mag42_sq"):
        assert getattr(r, name) >= 0


@settings(suppress_health_check=[HealthCheck.filter_too_much, HealthCheck.too_slow], max_examples=200)
@given(feasible_pair())
def test_recovered_branches_satisfy_rotated_constraints(case):
    ex, r = case
    assume(r.mag31 > 1e-3 and r.mag32 > 1e-3)
    try:
        branches = C.recover_phases(r, ex)
    except (InfeasibleInputError, SingularRecoveryError):
        assume(False)
    for b in branches:
        res = C.rotated_residuals(b.s11, b.s22, b.s33, b.mag31, b.mag32, b.mag51_sq, b.rotated, ex)
        # residuals scale with the size of the recovered entries
        scale = max(1.0, float(np.max(np.abs(b.rotated.as_array()))))
        assert np.max(res) < 1e-9 * scale**2


@given(five_state(), st.floats(0.01, 1e4))
def test_series_s33_identity(p, b):
    ex = compute_exponents(p)
    X = math.exp(-(ex.gamma2 + ex.gamma4) / b)
    assert analysis.series_s33(ex, b) == pytest.approx(1 + 2 * (analysis.series_s11(ex, b) - X), abs=1e-12)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.tuples(st.floats(1e-3, 1e3), finite, finite, st.lists(finite, min_size=25, max_size=25),
                          finite, st.booleans()), min_size=1, max_size=5))
def test_csv_round_trip_bitwise(tmp_path_factory, data):
    rows = [SweepRow(b, s, m, np.array(pm).reshape(5, 5), c, ok) for b, s, m, pm, c, ok in data]
    path = tmp_path_factory.mktemp("csv") / "rows.csv"
    analysis.write_sweep_csv(rows, path)
    for a, b in zip(rows, analysis.read_sweep_csv(path)):
        assert np.array_equal(a.p_matrix, b.p_matrix)
        assert (a.beta, a.s33, a.mag32, a.constraint_max_residual, a.converged) == \
               (b.beta, b.s33, b.mag32, b.constraint_max_residual, b.converged)
