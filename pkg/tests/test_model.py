import json
import math

import numpy as np
import pytest

from lzkit import model
from lzkit.errors import ParameterError
from lzkit.model import (
    GAMMA, SSH_PARAMS, THETA, FiveStateParams, LZModelSpec, build_five_state, build_generic,
    compute_exponents, five_state_spec,
)
from lzkit.ssh import FIVE_STATE_ORDER, V_PRINTED_N3, SSHChainSpec, build_mapping, build_ssh_hamiltonian


def test_zero_time_pattern():
    H = build_five_state(SSH_PARAMS, 0.0)
    np.testing.assert_array_equal(np.diag(H), 0.0)
    p = SSH_PARAMS
    np.testing.assert_array_equal(H[0, 1:4], [p.g12, p.g13, p.g14])
    np.testing.assert_array_equal(H[4, 1:4], [-p.g14, -p.g13, -p.g12])
    np.testing.assert_array_equal(H, H.T)
    assert H[1, 2] == H[1, 3] == H[2, 3] == 0.0
    assert H[0, 4] == 0.0


def test_slopes_scale_with_beta():
    p = SSH_PARAMS.with_beta(2.5)
    H = build_five_state(p, 1.0)
    np.testing.assert_allclose(np.diag(H), 2.5 * np.array([-1, -math.sqrt(3), 0, math.sqrt(3), 1]))


@pytest.mark.parametrize("t", [-3.0, -0.4, 0.0, 0.7, 11.0])
def test_symmetry_identities(t):
    p = FiveStateParams(1.0, 2.2, 0.3, -0.8, 1.1, beta=0.7)
    H = build_five_state(p, t)
    np.testing.assert_array_equal(build_five_state(p, -t), -THETA @ H @ THETA)
    np.testing.assert_array_equal(H, -GAMMA @ H @ GAMMA)


def test_matches_rotated_chain_at_unit_time():
    # V^T H_SSH V with the printed V, relabelled into five-state order
    H_lz = V_PRINTED_N3.T @ build_ssh_hamiltonian(SSHChainSpec(3, 1.0), 1.0) @ V_PRINTED_N3
    order = list(FIVE_STATE_ORDER)
    np.testing.assert_allclose(H_lz[np.ix_(order, order)], build_five_state(SSH_PARAMS, 1.0), atol=1e-15)


@pytest.mark.parametrize("kwargs", [
    dict(b1=1.0, b2=1.0, g12=0, g13=0, g14=0),
    dict(b1=2.0, b2=1.0, g12=0, g13=0, g14=0),
    dict(b1=0.0, b2=1.0, g12=0, g13=0, g14=0),
    dict(b1=1.0, b2=2.0, g12=0, g13=0, g14=0, beta=0.0),
    dict(b1=1.0, b2=2.0, g12=math.nan, g13=0, g14=0),
])
def test_invalid_params(kwargs):
    with pytest.raises(ParameterError):
        FiveStateParams(**kwargs)


def test_generic_builder():
    zero = LZModelSpec(np.zeros(4), np.zeros((4, 4)))
    np.testing.assert_array_equal(build_generic(zero, 5.0), np.zeros((4, 4)))
    for t in (-2.0, 0.3):
        np.testing.assert_array_equal(build_generic(five_state_spec(SSH_PARAMS), t),
                                      build_five_state(SSH_PARAMS, t))


def test_generic_builder_bow_tie():
    m = build_mapping(SSHChainSpec(2, 1.0))
    H = build_generic(model.LZModelSpec(m.b_lz, m.a_lz), 0.8)
    # the middle (zero-slope) level couples to both outer ones, which do not couple
    assert H.shape == (3, 3)
    assert H[0, 2] == 0 and H[0, 1] != 0 and H[1, 2] != 0
    np.testing.assert_allclose(np.diag(H).real, 0.8 * np.array([-math.sqrt(2), 0, math.sqrt(2)]))


def test_spec_validation():
    with pytest.raises(ParameterError):
        LZModelSpec(np.zeros(2), np.array([[0, 1], [2, 0]]))
    with pytest.raises(ParameterError):
        LZModelSpec(np.zeros(2), np.array([[1, 0], [0, 0]]))
    with pytest.raises(ParameterError):
        LZModelSpec(np.zeros(3), np.zeros((2, 2)))


def test_exponents_ssh_set():
    ex = compute_exponents(SSH_PARAMS)
    assert ex.gamma3 == pytest.approx(math.pi / 3, rel=1e-14)
    # exact values, pi * g^2 / db with g12^2 = (2 - sqrt3)/24, g14^2 = (2 + sqrt3)/24
    assert ex.gamma2 == pytest.approx(math.pi * (2 - math.sqrt(3)) / 24 / (math.sqrt(3) - 1), rel=1e-14)
    assert ex.gamma4 == pytest.approx(math.pi * (2 + math.sqrt(3)) / 24 / (math.sqrt(3) + 1), rel=1e-14)
    assert ex.gamma2 == pytest.approx(0.047915, abs=5e-6)
    assert ex.gamma4 == pytest.approx(0.178823, abs=2e-5)
    assert ex.X == pytest.approx(math.sqrt(ex.p12 * ex.p14))
    assert ex.Y == pytest.approx(math.sqrt(ex.p13) * ex.p14)
    assert ex.p12 == pytest.approx(math.exp(-2 * math.pi * ex.omega12))


def test_exponents_decoupled_middle():
    ex = compute_exponents(FiveStateParams(1.0, 2.0, 0.4, 0.0, 0.6, beta=0.3))
    assert ex.p13 == 1.0
    assert ex.Y == ex.p14


def test_exponents_beta_homogeneous():
    a = compute_exponents(SSH_PARAMS)
    b = compute_exponents(SSH_PARAMS.with_beta(4.0))
    assert (a.gamma2, a.gamma3, a.gamma4) == (b.gamma2, b.gamma3, b.gamma4)
    assert b.omega13 == pytest.approx(a.omega13 / 4)


def test_degeneracy_flag():
    assert model.DEGENERATE_PARAMS.is_degenerate()
    assert FiveStateParams(1, 2, -0.5, 0.1, 0.5).is_degenerate()
    assert not SSH_PARAMS.is_degenerate()
    assert not model.SECOND_PARAMS.is_degenerate()


def test_param_file_round_trip(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(model.dump_params(SSH_PARAMS)))
    assert model.load_params(path) == SSH_PARAMS
    doc = {"b1": 1.0, "b2": 1.7320508, "g12": -0.10566, "g13": -0.57735, "g14": 0.39434}
    assert model.load_params(doc).beta == 1.0
    with pytest.raises(ParameterError):
        model.load_params({**doc, "g15": 0.0})
    with pytest.raises(ParameterError):
        model.load_params({"b1": 1.0})
