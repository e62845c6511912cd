import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_channels, random_complex, random_unit
from risassoc import passive
from risassoc.channels import ChannelSet
from risassoc.fp import update_aux
from risassoc.joint import feasible_init_window_theta
from risassoc.rates import BeamState, fp_objective
from risassoc.smoothing import SmoothingParams, g_delta, phase_norm_sq


def _phases_in_window(rng, J, N, delta, sm):
    lo, hi = feasible_init_window_theta(J, delta, sm.n3, sm.n4)
    theta = rng.uniform(-np.pi, np.pi, (J, N))
    theta *= np.sqrt(np.sqrt(lo * hi)) / np.linalg.norm(theta, axis=1, keepdims=True)
    return np.exp(1j * theta)


def _instance(rng, J=2, K=3, M=3, N=4, sigma2=0.5):
    channels = random_channels(rng, J, K, M, N)
    w = random_complex(rng, J, K, M) * 0.5
    phi = random_unit(rng, J, N)
    aux = update_aux(channels, BeamState(w, phi), sigma2)
    return channels, w, aux, sigma2


def _scalar_map(x, sign, delta):
    """sign * g_delta(||ln phi||^2) as a function of the real coordinates."""
    n = x.size // 2
    phi = x[:n] + 1j * x[n:]
    s = np.sum(np.abs(np.log(phi)) ** 2)
    return sign * g_delta(s, delta)


def test_zero_beams_give_constant_only(rng):
    channels, w, aux, sigma2 = _instance(rng)
    pq = passive.assemble_passive_quadratics(channels, np.zeros_like(w), aux.tau, aux.q, sigma2)
    assert np.all(pq.D == 0) and np.all(pq.v == 0)
    np.testing.assert_allclose(pq.c, -np.sum(np.abs(aux.q) ** 2, axis=1) * sigma2)


def test_quadratics_match_fp_objective(rng):
    for _ in range(10):
        channels, w, aux, sigma2 = _instance(rng)
        pq = passive.assemble_passive_quadratics(channels, w, aux.tau, aux.q, sigma2)
        J, N = pq.v.shape
        phi = random_complex(rng, J, N)
        # value() is the phi-dependent part of f in nats
        direct = fp_objective(aux.tau, aux.q, w, phi, channels, sigma2)
        log_part = (np.log2(1 + aux.tau).sum() - aux.tau.sum() / np.log(2))
        assert pq.value(phi).sum() / np.log(2) + log_part == pytest.approx(direct, rel=1e-10)


def test_scalar_d_for_single_element():
    G = np.array([[[0.3 - 0.2j]]])
    h_r = np.array([[1.5 + 0.5j]])
    channels = ChannelSet(np.zeros((1, 1, 1), complex), G, h_r)
    w = np.array([[[0.7 + 0.1j]]])
    q = np.array([[0.4 - 0.9j]])
    pq = passive.assemble_passive_quadratics(channels, w, np.zeros((1, 1)), q, 1.0)
    a = np.conj(h_r[0, 0] * G[0, 0, 0] * w[0, 0, 0])
    assert pq.D[0, 0, 0].real == pytest.approx(abs(q[0, 0]) ** 2 * abs(a) ** 2)


def test_hessian_at_zero_phase():
    delta = 0.01
    ones = np.ones(3, complex)
    assert passive.hessian_bound_phi(ones, delta, passive.MINUS_G) == pytest.approx(-1 / delta)
    assert passive.hessian_bound_phi(ones, delta, passive.PLUS_G) == pytest.approx(1 / delta)


def test_hessian_rejects_off_circle():
    with pytest.raises(ValueError):
        passive.hessian_bound_phi(np.array([0.5, 1.0], complex), 0.1, passive.MINUS_G)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(1, 3), sign=st.sampled_from([-1, 1]),
       delta=st.floats(0.5, 5.0))
def test_hessian_matches_finite_differences(seed, N, sign, delta):
    rng = np.random.default_rng(seed)
    # stay clear of the branch cut at +-pi
    phi = np.exp(1j * rng.uniform(-2.5, 2.5, N))
    x = np.concatenate([phi.real, phi.imag])
    h = 1e-4
    n = x.size
    Hr = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            ea, eb = np.eye(n)[a] * h, np.eye(n)[b] * h
            Hr[a, b] = (_scalar_map(x + ea + eb, sign, delta) - _scalar_map(x + ea - eb, sign, delta)
                        - _scalar_map(x - ea + eb, sign, delta)
                        + _scalar_map(x - ea - eb, sign, delta)) / (4 * h * h)
    # in (phi, phi*) coordinates the eigenvalues are half those of the real Hessian
    fd = 0.5 * np.linalg.eigvalsh(0.5 * (Hr + Hr.T))[-1]
    assert passive.hessian_bound_phi(phi, delta, sign) == pytest.approx(fd, abs=1e-4)


@pytest.mark.parametrize("safe", [True, False])
def test_surrogates_tangent(rng, safe):
    delta = 0.5
    phi0 = random_unit(rng, 2, 5)
    surr = passive.build_phi_surrogates(phi0, delta, safe)
    g0 = g_delta(np.array([phase_norm_sq(p) for p in phi0]), delta)
    np.testing.assert_allclose(surr.minus_value(phi0), -g0, atol=1e-9)
    np.testing.assert_allclose(surr.plus_value(phi0), g0, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(1, 6), delta=st.floats(0.05, 20.0),
       spread=st.floats(0.0, np.pi))
def test_safe_surrogates_dominate_on_circle(seed, N, delta, spread):
    rng = np.random.default_rng(seed)
    phi0 = np.exp(1j * rng.uniform(-spread, spread, (1, N)))
    surr = passive.build_phi_surrogates(phi0, delta, safe=True)
    phis = random_unit(rng, 300, 1, N)
    for phi in phis:
        g = g_delta(phase_norm_sq(phi[0]), delta)
        assert surr.minus_value(phi)[0] >= -g - 1e-9
        assert surr.plus_value(phi)[0] >= g - 1e-9


def test_kappa_at_zero_phase():
    surr = passive.build_phi_surrogates(np.ones((1, 4), complex), 0.1, safe=False)
    np.testing.assert_allclose(surr.kappa[0], -2 * surr.Xi[0] * np.ones(4))
    np.testing.assert_allclose(surr.phi_ratio[0], 0)


def test_psi_update_examples(rng):
    phi = random_complex(rng, 2, 3)
    np.testing.assert_allclose(passive.update_psi(phi, np.zeros_like(phi), 1.0),
                               np.exp(1j * np.angle(phi)))
    xi = random_complex(rng, 2, 3)
    np.testing.assert_allclose(passive.update_psi(np.zeros_like(xi), xi, 1.0),
                               np.exp(1j * np.angle(xi)))
    np.testing.assert_array_equal(passive.update_psi(np.zeros(2), np.zeros(2), 1.0), [1, 1])
    with pytest.raises(ValueError):
        passive.update_psi(phi, xi, 0.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), rho=st.floats(1e-2, 1e2))
def test_psi_is_unit_modulus(seed, rho):
    rng = np.random.default_rng(seed)
    psi = passive.update_psi(random_complex(rng, 2, 5), random_complex(rng, 2, 5), rho)
    np.testing.assert_allclose(np.abs(psi), 1.0, atol=1e-15)


def test_xi_update_examples():
    xi = np.zeros(2, complex)
    e1 = np.array([1.0, 0.0])
    np.testing.assert_allclose(passive.update_xi(xi, (1 + 1j) * e1, np.zeros(2), 2.0),
                               [2 + 2j, 0])
    xi = np.array([0.3 - 1j, 2.0])
    phi = np.array([1j, -1.0])
    once = passive.update_xi(xi, phi, phi, 3.0)
    np.testing.assert_array_equal(once, xi)
    np.testing.assert_array_equal(passive.update_xi(once, phi, phi, 3.0), xi)


def test_phi_step_monotone_and_bounded(rng):
    sm = SmoothingParams(delta=0.5)
    for _ in range(10):
        channels, w, aux, sigma2 = _instance(rng)
        pq = passive.assemble_passive_quadratics(channels, w, aux.tau, aux.q, sigma2)
        J, N = pq.v.shape
        psi = _phases_in_window(rng, J, N, sm.delta, sm)
        state = passive.AdmmState(psi, 0.1 * random_complex(rng, J, N), 1.0)
        surr = passive.build_phi_surrogates(psi, sm.delta)
        phi, info = passive.update_phi(pq, state, surr, psi, sm)
        assert np.all(np.abs(phi) <= 1 + 1e-6)
        assert passive.al_objective(pq, phi, state) >= passive.al_objective(pq, psi, state) - 1e-7


def test_large_rho_limit_returns_psi(rng):
    J, N = 2, 4
    zero = passive.PassiveQuadratics(np.zeros((J, N, N)), np.zeros((J, N)), np.zeros(J),
                                     None, None)
    sm = SmoothingParams(delta=0.5)
    psi = _phases_in_window(rng, J, N, sm.delta, sm)
    state = passive.AdmmState(psi, np.zeros((J, N)), 1e3)
    surr = passive.build_phi_surrogates(psi, sm.delta)
    phi, _ = passive.update_phi(pq=zero, state=state, surr=surr, phi_prev=psi, smoothing=sm)
    # psi is feasible, so it is the optimum; it sits on |phi_n| = 1, which an
    # interior-point answer approaches only up to the barrier gap
    np.testing.assert_allclose(phi, psi, atol=1e-4)


@pytest.mark.parametrize("rho", [1.0, 5.0])
def test_admm_converges_for_rho(rho):
    rng = np.random.default_rng(7)
    channels, w, aux, sigma2 = _instance(rng, N=8)
    pq = passive.assemble_passive_quadratics(channels, w, aux.tau, aux.q, sigma2)
    phi0 = random_unit(rng, 2, 8)
    res = passive.admm_passive_loop(pq, phi0, rho=rho, tol=1e-4, max_iter=200, rho_growth=1.05)
    assert res.converged and res.iterations <= 100
    np.testing.assert_allclose(np.abs(res.phi), 1.0, atol=1e-15)
    assert len(res.residuals) == res.iterations == len(res.al_objective)


def test_admm_cap_sets_flag(rng):
    channels, w, aux, sigma2 = _instance(rng)
    pq = passive.assemble_passive_quadratics(channels, w, aux.tau, aux.q, sigma2)
    res = passive.admm_passive_loop(pq, random_unit(rng, 2, 4), tol=1e-14, max_iter=3)
    assert not res.converged and res.iterations == 3
    assert res.residual == min(res.residuals)
