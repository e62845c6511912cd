"""MM update of the active beamformers with smoothed BS-user association."""
import logging
from dataclasses import dataclass

import numpy as np

from . import qcqp
from .rates import compound_channels
from .smoothing import g_delta, grad_g_delta

log = logging.getLogger(__name__)

# sup over x >= 0 of exp(-x/d) (2x/d^2 - 1/d) equals 2 exp(-3/2) / d
W_CURVATURE_FACTOR = 2.0 * np.exp(-1.5)


class SubproblemInfeasible(RuntimeError):
    pass


@dataclass
class ActiveQuadratics:
    Upsilon: np.ndarray  # (J, M, M)
    alpha: np.ndarray  # (J, K, M)
    varsigma: np.ndarray  # (J, K)

    def objective(self, w):
        """sum_{j,k} -w^H Ups_j w + Re{alpha^H w} - varsigma."""
        quad = np.einsum("jkm,jmn,jkn->", w.conj(), self.Upsilon, w).real
        lin = np.vdot(self.alpha, w).real
        return float(-quad + lin - self.varsigma.sum())


@dataclass
class WSurrogate:
    curvature: np.ndarray  # (J, K) scalar multiple of the identity in M_{j,k}
    iota: np.ndarray  # (J, K, M)
    varpi: np.ndarray  # (J, K)
    beta: np.ndarray  # (J, K)
    lam: np.ndarray  # (J, K) local Hessian eigenvalue at the expansion point

    def value(self, w):
        """Surrogate upper bound of -g_delta(||w_jk||^2), shape (J, K)."""
        sq = np.sum(np.abs(w) ** 2, axis=-1)
        lin = np.einsum("jkm,jkm->jk", self.iota.conj(), w).real
        return self.curvature * sq + lin + self.varpi


@dataclass
class PowerAux:
    u: np.ndarray  # (J, K)


def assemble_active_quadratics(channels, phi, tau, q, sigma2):
    h = compound_channels(channels, phi)
    wq = np.abs(q) ** 2
    Upsilon = np.einsum("jk,jkm,jkn->jmn", wq, h, h.conj())
    alpha = 2.0 * (np.sqrt(1.0 + tau) * q)[..., None] * h
    return ActiveQuadratics(Upsilon, alpha, wq * sigma2)


def hessian_w_matrix(w, delta):
    """Explicit 2M x 2M complex Hessian of -g_delta(||w||^2) in (w, w*) coordinates."""
    w = np.asarray(w, dtype=complex)
    e = np.exp(-np.vdot(w, w).real / delta)
    z = np.concatenate([w, w.conj()])
    return e * (np.outer(z, z.conj()) / delta ** 2 - np.eye(2 * w.size) / delta)


def hessian_bound_w(w_prev, delta):
    """Largest eigenvalue of the complex Hessian of -g_delta(||w||^2) at w_prev."""
    x = np.sum(np.abs(np.asarray(w_prev)) ** 2, axis=-1)
    return np.exp(-x / delta) * (2.0 * x / delta ** 2 - 1.0 / delta)


def build_w_surrogates(w_prev, delta, safe=True):
    """Quadratic surrogates of -g_delta(||w_jk||^2), tangent at w_prev.

    With ``safe`` the curvature is the supremum of the Hessian eigenvalue over
    all w, so the bound holds globally.  Otherwise only the local eigenvalue
    at w_prev is used and the bound may fail far from the expansion point.
    """
    w_prev = np.asarray(w_prev, dtype=complex)
    x = np.sum(np.abs(w_prev) ** 2, axis=-1)
    lam = hessian_bound_w(w_prev, delta)
    curv = np.maximum(lam, 0.0)
    if safe:
        curv = np.maximum(curv, W_CURVATURE_FACTOR / delta)
    beta = np.exp(-x / delta) / delta
    iota = -2.0 * (curv + beta)[..., None] * w_prev
    varpi = -g_delta(x, delta) + curv * x + 2.0 * beta * x
    return WSurrogate(curv, iota, varpi, beta, lam)


def _block_layout(J, K, M):
    nw = J * K * M
    return nw, 2 * nw + J * K


def _active_problem(aq, surr, u_prev, p_bs, delta, n1, n2):
    J, K, M = aq.alpha.shape
    nw, n = _block_layout(J, K, M)
    u0 = slice(2 * nw, n)

    A = np.zeros((nw, nw), dtype=complex)
    for j in range(J):
        for k in range(K):
            s = (j * K + k) * M
            A[s:s + M, s:s + M] = aq.Upsilon[j]
    Q = np.zeros((n, n))
    Q[:2 * nw, :2 * nw] = 2.0 * qcqp.realify(A)
    a = aq.alpha.reshape(-1)
    qv = np.zeros(n)
    qv[:nw], qv[nw:2 * nw] = -a.real, -a.imag

    P, p, r = [], [], []
    pj = np.broadcast_to(np.asarray(p_bs, dtype=float), (J,))
    for j in range(J):  # sum_k u_jk <= P_j
        row = np.zeros(n)
        row[u0][j * K:(j + 1) * K] = 1.0
        P.append(np.zeros(n)); p.append(row); r.append(-pj[j])
    for j in range(J):  # ||w_jk||^2 <= u_jk
        for k in range(K):
            s = (j * K + k) * M
            d = np.zeros(n)
            d[s:s + M] = d[nw + s:nw + s + M] = 2.0
            row = np.zeros(n)
            row[2 * nw + j * K + k] = -1.0
            P.append(d); p.append(row); r.append(0.0)
    gu = g_delta(u_prev, delta)
    dgu = grad_g_delta(u_prev, delta)
    for k in range(K):
        d = np.zeros(n)
        row = np.zeros(n)
        for j in range(J):
            s = (j * K + k) * M
            d[s:s + M] = d[nw + s:nw + s + M] = 2.0 * surr.curvature[j, k]
            row[s:s + M] = surr.iota[j, k].real
            row[nw + s:nw + s + M] = surr.iota[j, k].imag
        P.append(d); p.append(row); r.append(surr.varpi[:, k].sum() + n1)
    for k in range(K):
        row = np.zeros(n)
        row[2 * nw + np.arange(J) * K + k] = dgu[:, k]
        P.append(np.zeros(n)); p.append(row)
        r.append(float((gu[:, k] - dgu[:, k] * u_prev[:, k]).sum() - n2))
    return qcqp.RealQcqp(Q, qv, np.array(P), np.array(p), np.array(r))


def _pack(w, u):
    flat = w.reshape(-1)
    return np.concatenate([flat.real, flat.imag, u.reshape(-1)])


def _unpack(z, J, K, M):
    nw = J * K * M
    w = (z[:nw] + 1j * z[nw:2 * nw]).reshape(J, K, M)
    return w, z[2 * nw:].reshape(J, K)


def association_margin(w, delta, n1):
    """Per-user slack of sum_j g_delta(||w_jk||^2) >= n1 (negative if violated)."""
    return g_delta(np.sum(np.abs(w) ** 2, axis=-1), delta).sum(axis=0) - n1


def _solve_step(aq, w_prev, u_prev, p_bs, smoothing, safe, tol, max_iter):
    J, K, M = w_prev.shape
    surr = build_w_surrogates(w_prev, smoothing.delta, safe)
    windows = [(smoothing.n1, smoothing.n2), (smoothing.n1 - 0.05, smoothing.n2 + 0.05)]
    for attempt, (n1, n2) in enumerate(windows):
        prob = _active_problem(aq, surr, u_prev, p_bs, smoothing.delta, n1, n2)
        z, status, kkt, it, _ = qcqp.solve_real(prob, _pack(w_prev, u_prev), tol, max_iter)
        if status != qcqp.INFEASIBLE:
            w, u = _unpack(z, J, K, M)
            return w, u, {"status": status, "kkt": kkt, "iterations": it,
                          "widened": attempt > 0, "n1": n1}
        log.warning("active MM step infeasible with window (%.3f, %.3f)", n1, n2)
    raise SubproblemInfeasible("active beamforming subproblem infeasible after widening window")


def update_active_beamforming(channels, phi, tau, q, w_prev, u_prev, p_bs, sigma2,
                              smoothing, tol=1e-7, max_iter=500, safe=False):
    """One MM step of the joint association/active beamforming problem.

    The step first uses the local-curvature surrogate; if its solution breaks
    the true association constraint it is redone with the global curvature,
    which always keeps feasibility.  Returns ``(w, u, info)``; the previous
    point is kept if the objective would drop.
    """
    aq = assemble_active_quadratics(channels, phi, tau, q, sigma2)
    u_prev = np.maximum(u_prev, np.sum(np.abs(w_prev) ** 2, axis=-1))
    w, u, info = _solve_step(aq, w_prev, u_prev, p_bs, smoothing, safe, tol, max_iter)
    info["safe"] = safe
    if not safe and association_margin(w, smoothing.delta, info["n1"]).min() < -1e-9:
        w, u, info = _solve_step(aq, w_prev, u_prev, p_bs, smoothing, True, tol, max_iter)
        info["safe"] = True
    accepted = aq.objective(w) >= aq.objective(w_prev)
    if not accepted:
        w, u = w_prev.copy(), u_prev.copy()
    info.update(accepted=accepted, objective=aq.objective(w))
    return w, u, info
