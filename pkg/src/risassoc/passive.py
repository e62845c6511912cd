"""ADMM update of the RIS reflection vectors with smoothed BS-RIS association."""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import qcqp
from .active import SubproblemInfeasible
from .smoothing import g_delta, principal_phase

log = logging.getLogger(__name__)

MINUS_G = -1  # surrogate of -g_delta(||ln phi||^2)
PLUS_G = +1  # surrogate of +g_delta(||ln phi||^2)

# cap on the per-element -g ratio for phases sitting on the branch cut
_CUT_CURVATURE = 1e8


@dataclass
class PassiveQuadratics:
    """phi-dependent part of f written as sum_j -phi^H D phi + 2 Re{phi^H v} + c."""
    D: np.ndarray  # (J, N, N)
    v: np.ndarray  # (J, N)
    c: np.ndarray  # (J,)
    a: np.ndarray  # (J, K, K, N), a[j, k, i] pairs user k with stream i
    b: np.ndarray  # (J, K, K)

    def value(self, phi):
        quad = np.einsum("jn,jnm,jm->j", phi.conj(), self.D, phi).real
        lin = np.einsum("jn,jn->j", phi.conj(), self.v).real
        return -quad + 2.0 * lin + self.c


@dataclass
class PhiSurrogates:
    Xi: np.ndarray  # (J,) curvature for -g, i.e. Xi_j = Xi[j] * I
    kappa: np.ndarray  # (J, N)
    mu: np.ndarray  # (J,)
    Gamma: np.ndarray  # (J,) curvature for +g
    zeta: np.ndarray  # (J, N)
    eta: np.ndarray  # (J,)
    eps: np.ndarray  # (J,)
    phi_ratio: np.ndarray  # (J, N), ln(phi) / conj(phi)
    lam_minus: np.ndarray  # (J,) local Hessian eigenvalues
    lam_plus: np.ndarray

    def minus_value(self, phi):
        """Upper bound of -g_delta(||ln phi_j||^2), shape (J,)."""
        return self._value(phi, self.Xi, self.kappa, self.mu)

    def plus_value(self, phi):
        """Upper bound of +g_delta(||ln phi_j||^2), shape (J,)."""
        return self._value(phi, self.Gamma, self.zeta, self.eta)

    @staticmethod
    def _value(phi, curv, lin, const):
        sq = np.sum(np.abs(phi) ** 2, axis=-1)
        return curv * sq + np.einsum("jn,jn->j", lin.conj(), phi).real + const


@dataclass
class AdmmState:
    psi: np.ndarray
    xi: np.ndarray
    rho: float = 1.0

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")


@dataclass
class AdmmResult:
    phi: np.ndarray
    converged: bool
    iterations: int
    residual: float
    residuals: list = field(default_factory=list)
    al_objective: list = field(default_factory=list)


def assemble_passive_quadratics(channels, w, tau, q, sigma2):
    J, K, M = channels.h_d.shape
    if w.shape != (J, K, M) or tau.shape != (J, K) or q.shape != (J, K):
        raise ValueError("dimension mismatch in passive quadratics")
    Gw = np.einsum("jnm,jim->jin", channels.G, w)  # (J, I, N)
    a = channels.h_r[None, :, None, :] * Gw.conj()[:, None, :, :]
    b = np.einsum("jkm,jim->jki", channels.h_d.conj(), w).conj()
    wq = np.abs(q) ** 2
    D = np.einsum("jk,jkin,jkim->jnm", wq, a, a.conj())
    diag_a = np.einsum("jkkn->jkn", a)
    diag_b = np.einsum("jkk->jk", b)
    root = np.sqrt(1.0 + tau)
    v = (np.einsum("jk,jkn->jn", root * q, diag_a)
         - np.einsum("jk,jki,jkin->jn", wq, b.conj(), a))
    c = (2.0 * root * np.real(q.conj() * diag_b.conj())
         - wq * (sigma2 + np.sum(np.abs(b) ** 2, axis=2))).sum(axis=1)
    return PassiveQuadratics(D, v, c, a, b)


def _check_unit(phi):
    phi = np.asarray(phi, dtype=complex)
    if np.any(np.abs(np.abs(phi) - 1.0) > 1e-6):
        raise ValueError("expansion point must be unit modulus")
    return phi


def _log_phi(phi):
    return 1j * principal_phase(phi)


def hessian_phi_matrix(phi_prev, delta, sign):
    """2N x 2N complex Hessian of sign * g_delta(||ln phi||^2) in (phi, phi*) coordinates."""
    phi = _check_unit(phi_prev)
    if sign not in (MINUS_G, PLUS_G):
        raise ValueError("sign must be -1 or +1")
    ln = _log_phi(phi)
    s = float(np.sum(np.abs(ln) ** 2))
    eps = np.exp(-s / delta) / delta
    # sign * g = -sig * (e^{-s/d} - 1) with sig = -sign
    sig = -sign
    d1, d2 = -sig * eps, sig * eps / delta
    ratio = ln / phi.conj()
    A = d2 * np.outer(ratio, ratio.conj()) + d1 * np.diag(1.0 / np.abs(phi) ** 2)
    B = d2 * np.outer(ratio, ratio) + d1 * np.diag(-ln / phi.conj() ** 2)
    return np.block([[A, B], [B.conj(), A.T]])


def hessian_bound_phi(phi_prev, delta, sign):
    H = hessian_phi_matrix(phi_prev, delta, sign)
    return float(np.linalg.eigvalsh(0.5 * (H + H.conj().T))[-1])


def _safe_curvature(phi_prev, delta, sign):
    """Curvature making the surrogate dominate everywhere on the unit circle.

    On the circle the surrogate is g0 + 2c sum(1 - cos d_n) -/+ 2 eps sum(t_n sin d_n)
    with t = theta_prev and d = theta - theta_prev.  For +g concavity leaves the
    per-element ratio (theta^2 - t^2 - 2 t sin d) / |phi - phi_prev|^2, whose sup
    over theta is at most pi^2 / 4.  For -g that ratio turns into -t cot t, and
    the exponential remainder adds H(s0/delta) / delta * sum_n L_n^2 with
    L_n = (pi^2 - t_n^2) / (2 cos(t_n / 2)) bounding |theta^2 - t^2| per unit
    chord.  The -g bound diverges as a phase approaches +-pi, where the target
    has a kink no smooth tangent majorant can cover.
    """
    theta = principal_phase(phi_prev)
    s0 = float(np.sum(theta ** 2))
    eps = np.exp(-s0 / delta) / delta
    if sign == PLUS_G:
        return 0.25 * np.pi ** 2 * eps
    t = np.abs(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        k1 = np.where(t < 1e-8, -1.0, -t / np.tan(t))
        lip = np.where(np.pi - t < 1e-8, 2.0 * np.pi, (np.pi ** 2 - t ** 2) / (2.0 * np.cos(t / 2)))
    k1 = np.where(np.pi - t < 1e-8, _CUT_CURVATURE, np.minimum(k1, _CUT_CURVATURE))
    x = s0 / delta
    # H(x) = (e^x - 1 - x) / x^2 is increasing, so it bounds the remainder for
    # all s < s0; eps * H is written without e^x to avoid overflow
    if x < 1e-4:
        eps_h = eps * (0.5 + x / 6.0)
    else:
        eps_h = (-np.expm1(-x) - x * np.exp(-x)) / (delta * x * x)
    return max(0.0, eps * k1.max(initial=-1.0) + eps_h * np.sum(lip ** 2) / delta)


def build_phi_surrogates(phi_prev, delta, safe=True):
    """Quadratic surrogates of -/+ g_delta(||ln phi_j||^2) tangent at phi_prev.

    With ``safe`` the curvatures are raised above the local Hessian eigenvalue
    so that the bound holds on the whole unit-modulus manifold.
    """
    phi_prev = _check_unit(phi_prev)
    J, N = phi_prev.shape
    out = {k: np.zeros(J) for k in ("Xi", "mu", "Gamma", "eta", "eps", "lam_minus", "lam_plus")}
    kappa = np.zeros((J, N), dtype=complex)
    zeta = np.zeros((J, N), dtype=complex)
    ratio = np.zeros((J, N), dtype=complex)
    for j in range(J):
        p0 = phi_prev[j]
        ln = _log_phi(p0)
        s = float(np.sum(np.abs(ln) ** 2))
        g0 = float(g_delta(s, delta))
        eps = np.exp(-s / delta) / delta
        r = ln / p0.conj()
        lm = hessian_bound_phi(p0, delta, MINUS_G)
        lp = hessian_bound_phi(p0, delta, PLUS_G)
        cm, cp = max(0.0, lm), max(0.0, lp)
        if safe:
            cm = max(cm, _safe_curvature(p0, delta, MINUS_G))
            cp = max(cp, _safe_curvature(p0, delta, PLUS_G))
        cross = float(np.real(np.vdot(r, p0)))
        sq = float(np.sum(np.abs(p0) ** 2))
        kappa[j] = -2.0 * cm * p0 - 2.0 * eps * r
        zeta[j] = -2.0 * cp * p0 + 2.0 * eps * r
        out["Xi"][j], out["Gamma"][j] = cm, cp
        out["mu"][j] = -g0 + cm * sq + 2.0 * eps * cross
        out["eta"][j] = g0 + cp * sq - 2.0 * eps * cross
        out["eps"][j], out["lam_minus"][j], out["lam_plus"][j] = eps, lm, lp
        ratio[j] = r
    return PhiSurrogates(out["Xi"], kappa, out["mu"], out["Gamma"], zeta, out["eta"],
                         out["eps"], ratio, out["lam_minus"], out["lam_plus"])


def al_objective(pq, phi, state):
    """Augmented Lagrangian maximized by the phi step, summed over BSs."""
    diff = phi - state.psi
    return float(pq.value(phi).sum() - np.vdot(state.xi, diff).real
                 - 0.5 * state.rho * np.sum(np.abs(diff) ** 2))


def _phi_problem(pq, state, surr, free, n3, n4):
    idx = np.flatnonzero(free)
    N = pq.v.shape[1]
    n = idx.size * N
    A = np.zeros((n, n), dtype=complex)
    for t, j in enumerate(idx):
        A[t * N:(t + 1) * N, t * N:(t + 1) * N] = pq.D[j] + 0.5 * state.rho * np.eye(N)
    b = (2.0 * pq.v + state.rho * state.psi - state.xi)[idx].reshape(-1)
    c = float(pq.c.sum() - 0.5 * state.rho * np.sum(np.abs(state.psi) ** 2)
              + np.vdot(state.xi, state.psi).real)
    cons = []
    if surr is not None:
        # the fixed BSs still contribute their constant surrogate value
        fixed_m = surr.minus_value(state.psi)[~free].sum() if (~free).any() else 0.0
        fixed_p = surr.plus_value(state.psi)[~free].sum() if (~free).any() else 0.0
        cons.append((np.diag(np.repeat(surr.Xi[idx], N)), surr.kappa[idx].reshape(-1),
                     surr.mu[idx].sum() + fixed_m + n3))
        cons.append((np.diag(np.repeat(surr.Gamma[idx], N)), surr.zeta[idx].reshape(-1),
                     surr.eta[idx].sum() + fixed_p - n4))
    return qcqp.QcqpProblem(A, b, c, cons, box=np.ones(n)), idx


def update_phi(pq, state, surr=None, phi_prev=None, smoothing=None, free=None,
               tol=1e-8, max_iter=200, center=None):
    """Maximize the augmented Lagrangian over |phi_n| <= 1 (and the l0 surrogates).

    BSs outside ``free`` keep ``phi_prev``.  ``center`` is an optional strictly
    feasible point (J, N) used to pull boundary warm starts inside.
    Returns ``(phi, info)``.
    """
    J, N = pq.v.shape
    free = np.ones(J, bool) if free is None else np.asarray(free, bool)
    phi_prev = state.psi if phi_prev is None else phi_prev
    n3 = smoothing.n3 if smoothing is not None else 1.0
    n4 = smoothing.n4 if smoothing is not None else 1.0
    windows = [(n3, n4)] if surr is None else [(n3, n4), (n3 - 0.05, n4 + 0.05)]
    for attempt, (a3, a4) in enumerate(windows):
        prob, idx = _phi_problem(pq, state, surr, free, a3, a4)
        x_c = None if center is None or attempt else center[idx].reshape(-1)
        sol = qcqp.solve(prob, phi_prev[idx].reshape(-1), tol, max_iter, x_c)
        if sol.status != qcqp.INFEASIBLE:
            break
        log.warning("phi step infeasible with window (%.3f, %.3f)", a3, a4)
    else:
        raise SubproblemInfeasible("passive beamforming subproblem infeasible after widening window")
    phi = phi_prev.astype(complex).copy()
    phi[idx] = sol.x.reshape(idx.size, N)
    return phi, {"status": sol.status, "kkt": sol.kkt_residual, "widened": attempt > 0}


def update_psi(phi, xi, rho):
    if rho <= 0:
        raise ValueError("rho must be positive")
    arg = np.asarray(xi) + rho * np.asarray(phi)
    return np.where(arg == 0, 1.0 + 0j, np.exp(1j * np.angle(arg)))


def update_xi(xi, phi, psi, rho):
    return xi + rho * (phi - psi)


def project_unit(phi):
    phi = np.asarray(phi, dtype=complex)
    return np.where(phi == 0, 1.0 + 0j, np.exp(1j * np.angle(phi)))


def _interior_point(pq, state, surr, smoothing, free):
    """Strictly feasible point of the phi-step constraint set, which stays
    fixed across the ADMM iterations."""
    if surr is None:
        return np.zeros_like(state.psi)
    n3 = smoothing.n3 if smoothing is not None else 1.0
    n4 = smoothing.n4 if smoothing is not None else 1.0
    prob, idx = _phi_problem(pq, state, surr, free, n3, n4)
    x0 = state.psi[idx].reshape(-1)
    z = qcqp.find_interior(prob.to_real(), np.concatenate([x0.real, x0.imag]))
    if z is None:
        return None
    center = state.psi.copy()
    center[idx] = qcqp.complexify(z).reshape(idx.size, -1)
    return center


def _scale(pq):
    lam = max(float(np.linalg.eigvalsh(D)[-1]) for D in pq.D)
    return lam + float(np.abs(pq.v).max(initial=0.0)) + 1e-300


def admm_passive_loop(pq, phi_init, rho=1.0, tol=1e-4, max_iter=200, surr=None,
                      smoothing=None, free=None, rho_growth=1.0):
    """Alternate the phi, psi and xi updates; returns an AdmmResult.

    D and v are divided by a common scale first so that ``rho`` is relative to
    the curvature of the rate term.  The returned phi is always unit modulus.
    """
    phi_init = _check_unit(phi_init)
    s = _scale(pq)
    spq = PassiveQuadratics(pq.D / s, pq.v / s, pq.c / s, pq.a, pq.b)
    state = AdmmState(phi_init.copy(), np.zeros_like(phi_init), rho)
    J = phi_init.shape[0]
    free = np.ones(J, bool) if free is None else np.asarray(free, bool)
    phi = phi_init.copy()
    center = _interior_point(spq, state, surr, smoothing, free)
    best, best_res = phi_init.copy(), np.inf
    residuals, trace = [], []
    converged = False
    for it in range(1, max_iter + 1):
        phi, _ = update_phi(spq, state, surr, phi, smoothing, free, center=center)
        trace.append(al_objective(spq, phi, state) * s)
        psi = update_psi(phi, state.xi, rho)
        psi[~free] = phi_init[~free]
        state.xi = update_xi(state.xi, phi, psi, rho)
        state.psi = psi
        state.rho = rho = rho * rho_growth
        res = float(np.max(np.linalg.norm(phi - psi, axis=1)))
        residuals.append(res)
        if res < best_res:
            best, best_res = phi.copy(), res
        if res < tol:
            converged = True
            break
    if not converged:
        log.info("ADMM stopped at max_iter with residual %.2e", best_res)
        phi = best
    return AdmmResult(project_unit(phi), converged, it, best_res, residuals, trace)
