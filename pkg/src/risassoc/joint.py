"""Joint association and beamforming: initialization, BCD loop, association
extraction and the fixed-association re-design."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import active, passive
from .fp import AuxState, update_aux
from .rates import (AssociationResult, BeamState, compound_channels, fp_objective,
                    relaxed_sum_rate, sum_rate)
from .smoothing import SmoothingParams, g_delta, phase_norm_sq

log = logging.getLogger(__name__)


@dataclass
class SolverParams:
    smoothing: SmoothingParams = field(default_factory=SmoothingParams)
    rho: float = 1.0
    tol_outer: float = 1e-3
    max_outer_iter: int = 50
    tol_admm: float = 1e-4
    max_admm_iter: int = 200
    # geometric growth of rho per ADMM iteration (1.0 keeps it fixed)
    rho_growth: float = 1.05
    # position inside the feasible power window, on a log scale (0.5 = geometric mean)
    init_power_fraction: float = 0.5
    init_theta_fraction: float = 0.5
    # "local" uses the expansion-point curvature and falls back to the
    # globally valid one when the true constraint would break
    curvature: str = "local"
    redesign_warm_start: bool = True
    redesign_max_iter: int = 100
    redesign_tol: float = 1e-4
    # read smoothing.delta for the beam powers in units of the per-user
    # budget P_j / K (phases always use it as is, in rad^2)
    relative_delta: bool = True

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not (self.tol_outer > 0 and self.tol_admm > 0 and self.redesign_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer_iter < 1 or self.max_admm_iter < 1 or self.redesign_max_iter < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.curvature not in ("local", "safe"):
            raise ValueError("curvature must be 'local' or 'safe'")
        for name in ("init_power_fraction", "init_theta_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def power_delta(self, p_bs, K, delta=None):
        """Smoothing width applied to ||w_jk||^2 (mW)."""
        delta = self.smoothing.delta if delta is None else delta
        return delta * p_bs / K if self.relative_delta else delta


@dataclass
class TraceRecord:
    iteration: int
    objective: float  # f at the end of the sweep, with that sweep's tau and q
    sum_rate: float  # relaxed sum-rate over all (BS, user) pairs
    hard_sum_rate: float
    admm_residual: float
    admm_iterations: int
    admm_converged: bool
    phi_accepted: bool
    w_accepted: bool
    delta: float


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    first_admm: passive.AdmmResult | None = None
    converged: bool = False

    @property
    def iterations(self):
        return len(self.records)


def _window(J, delta, lo, hi):
    if J <= hi:
        raise ValueError(f"empty initialization window: need J > {hi}, got J = {J}")
    return delta * math.log(J / (J - lo)), delta * math.log(J / (J - hi))


def feasible_init_window_w(J, delta, n1, n2):
    """Range of ||w_jk||^2 (equal across j) satisfying both association constraints."""
    return _window(J, delta, n1, n2)


def feasible_init_window_theta(J, delta, n3, n4):
    """Range of ||theta_j||^2 (equal across j) satisfying both RIS constraints."""
    return _window(J, delta, n3, n4)


def _log_interp(lo, hi, frac):
    return lo ** (1.0 - frac) * hi ** frac


def zero_forcing(H, power):
    """Columns of H^H (H H^H)^{-1} scaled to squared norm ``power``.

    ``H`` holds one conjugated channel per row (K x M).  Falls back to the
    pseudo-inverse when H H^H is singular.
    """
    K, M = H.shape
    gram = H @ H.conj().T
    if K <= M and np.linalg.matrix_rank(gram) == K:
        W = H.conj().T @ np.linalg.inv(gram)
    else:
        log.warning("rank-deficient channel (K=%d, M=%d); using pseudo-inverse", K, M)
        W = np.linalg.pinv(H)
    norms = np.linalg.norm(W, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    return W / norms * np.sqrt(power)


def initialize(config, channels, params, rng=None, phi=None):
    """Zero-forcing beams and small random phases inside the feasible windows.

    A given ``phi`` replaces the random phases (used when phi is held fixed).
    """
    rng = np.random.default_rng(rng)
    J, K, M, N = channels.dims
    sm = params.smoothing
    dw = params.power_delta(config.p_bs, K)
    p = _log_interp(*feasible_init_window_w(J, dw, sm.n1, sm.n2), params.init_power_fraction)
    if phi is None:
        t = _log_interp(*feasible_init_window_theta(J, sm.delta, sm.n3, sm.n4),
                        params.init_theta_fraction)
        theta = rng.uniform(-np.pi, np.pi, (J, N))
        theta *= np.sqrt(t) / np.linalg.norm(theta, axis=1, keepdims=True)
        phi = np.exp(1j * theta)
    phi = np.asarray(phi, dtype=complex)
    h = compound_channels(channels, phi)
    w = np.stack([zero_forcing(h[j].conj(), p).T for j in range(J)])
    state = BeamState(w, phi)
    return state, update_aux(channels, state, config.sigma2)


def select_association(state, delta):
    """Serving BS per user and the RIS's BS; ties go to the lowest index.

    g_delta is increasing, so the raw norms are compared instead; this avoids
    false ties once g_delta rounds to one.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    norms = np.sum(np.abs(state.w) ** 2, axis=-1)
    phases = np.array([phase_norm_sq(p) for p in state.phi])
    return AssociationResult(np.argmax(norms, axis=0), int(np.argmax(phases)))


def _phi_feasible(phi, delta, n3, n4):
    total = g_delta(np.array([phase_norm_sq(p) for p in phi]), delta).sum()
    return n3 - 1e-9 <= total <= n4 + 1e-9


def _passive_step(channels, w, aux, phi, f_old, delta, stage, params, sigma2, it):
    """ADMM phi update; returns ``(result, f_new, accepted)``."""
    pq = passive.assemble_passive_quadratics(channels, w, aux.tau, aux.q, sigma2)
    sm = params.smoothing
    for safe in ((False, True) if params.curvature == "local" else (True,)):
        surr = passive.build_phi_surrogates(phi, delta, safe)
        try:
            res = passive.admm_passive_loop(pq, phi, params.rho, params.tol_admm,
                                            params.max_admm_iter, surr, stage,
                                            rho_growth=params.rho_growth)
        except active.SubproblemInfeasible as exc:
            raise active.SubproblemInfeasible(f"outer iteration {it}: {exc}") from exc
        # keep the previous phi unless the projected ADMM output improves f
        # and stays inside the association window
        f_new = fp_objective(aux.tau, aux.q, w, res.phi, channels, sigma2)
        feasible = _phi_feasible(res.phi, delta, sm.n3, sm.n4)
        if feasible:
            break
    return res, f_new, f_new >= f_old and feasible


def bcd_outer_loop(config, channels, params, state=None, aux=None, rng=None,
                   optimize_phi=True):
    """Relaxed BCD over (tau, q), w and phi; returns ``(state, aux, trace)``.

    With ``optimize_phi=False`` the passive step is skipped and phi keeps its
    initial value.
    """
    if state is None:
        state, aux = initialize(config, channels, params, rng)
    state = state.copy()
    sigma2, sm = config.sigma2, params.smoothing
    u = np.sum(np.abs(state.w) ** 2, axis=-1)
    trace = RunTrace()
    prev = relaxed_sum_rate(channels, state, sigma2)
    delta = sm.delta
    K = channels.dims[1]
    for it in range(1, params.max_outer_iter + 1):
        stage = SmoothingParams(delta, sm.n1, sm.n2, sm.n3, sm.n4)
        stage_w = SmoothingParams(params.power_delta(config.p_bs, K, delta),
                                  sm.n1, sm.n2, sm.n3, sm.n4)
        aux = update_aux(channels, state, sigma2)
        try:
            w, u, ainfo = active.update_active_beamforming(
                channels, state.phi, aux.tau, aux.q, state.w, u, config.p_bs, sigma2, stage_w,
                safe=params.curvature == "safe")
        except active.SubproblemInfeasible as exc:
            raise active.SubproblemInfeasible(f"outer iteration {it}: {exc}") from exc
        f_old = fp_objective(aux.tau, aux.q, w, state.phi, channels, sigma2)
        if optimize_phi:
            res, f_new, accepted = _passive_step(channels, w, aux, state.phi, f_old, delta,
                                                 stage, params, sigma2, it)
            if trace.first_admm is None:
                trace.first_admm = res
        else:
            res, accepted = None, False
        state = BeamState(w, res.phi if accepted else state.phi)
        obj = f_new if accepted else f_old
        rate = relaxed_sum_rate(channels, state, sigma2)
        hard = sum_rate(channels, state, select_association(state, delta), sigma2)
        admm = (res.residual, res.iterations, res.converged) if res else (0.0, 0, True)
        trace.records.append(TraceRecord(it, obj, rate, hard, *admm, accepted,
                                         ainfo["accepted"], delta))
        log.debug("outer %d: relaxed rate %.6f, hard rate %.6f", it, rate, hard)
        if abs(rate - prev) < params.tol_outer:
            trace.converged = True
            break
        prev = rate
        delta = max(delta * sm.decay, sm.delta_floor) if sm.decay < 1 else delta
    return state, update_aux(channels, state, sigma2), trace


def _mask_aux(aux, mask):
    return AuxState(np.where(mask, aux.tau, 0.0), np.where(mask, aux.q, 0.0))


def closed_form_w(channels, phi, aux, mask, p_bs, iters=100):
    """Per-BS maximizer of the FP objective in w under a sum-power budget.

    Only serving pairs enter; non-serving beams are set to zero.
    """
    J, K, M = channels.h_d.shape
    h = compound_channels(channels, phi)
    aux = _mask_aux(aux, mask)
    w = np.zeros((J, K, M), dtype=complex)
    pj = np.broadcast_to(np.asarray(p_bs, dtype=float), (J,))
    for j in range(J):
        users = np.flatnonzero(mask[j])
        if users.size == 0:
            continue
        wq = np.abs(aux.q[j, users]) ** 2
        Ups = np.einsum("k,km,kn->mn", wq, h[j, users], h[j, users].conj())
        rhs = (np.sqrt(1.0 + aux.tau[j, users]) * aux.q[j, users])[:, None] * h[j, users]
        lam, U = np.linalg.eigh(Ups)
        proj = U.conj().T @ rhs.T  # (M, users)
        weight = np.sum(np.abs(proj) ** 2, axis=1)

        def power(mu):
            return float(np.sum(weight / (lam + mu) ** 2))

        lo = 0.0
        if lam.min() > 1e-12 * max(lam.max(), 1e-300) and power(0.0) <= pj[j]:
            mu = 0.0
        else:
            hi = max(lam.max(), 1e-300)
            while power(hi) > pj[j]:
                hi *= 2.0
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if power(mid) > pj[j] else (lo, mid)
            mu = hi
        w[j, users] = (U @ (proj / (lam + mu)[:, None])).T
    return w


def redesign_fixed_association(config, channels, association, params, state=None,
                               optimize_phi=True, phi_init=None):
    """Re-optimize beamforming with the association held fixed.

    Non-serving beams are zero, only the RIS's BS has a tunable phi (the
    others stay all-ones) and phi is kept exactly unit modulus.  ``state``
    warm-starts w and phi when ``params.redesign_warm_start`` is set;
    ``phi_init`` overrides the starting phi.  Returns ``(state, rates)`` with
    the hard sum-rate before and after every iteration.
    """
    J, K, M, N = channels.dims
    sigma2 = config.sigma2
    mask = association.mask(J)
    free = np.zeros(J, bool)
    free[association.ris_bs] = True
    warm = state is not None and params.redesign_warm_start
    phi = np.ones((J, N), dtype=complex)
    if phi_init is not None:
        phi = np.array(phi_init, dtype=complex)
    elif warm:
        phi[association.ris_bs] = state.phi[association.ris_bs]
    if warm:
        w = np.where(mask[..., None], state.w, 0.0)
    else:
        h = compound_channels(channels, phi)
        w = np.zeros((J, K, M), dtype=complex)
        for j in range(J):
            users = np.flatnonzero(mask[j])
            if users.size:
                w[j, users] = zero_forcing(h[j, users].conj(), config.p_bs / users.size).T
    cur = BeamState(w, phi)
    rates = [sum_rate(channels, cur, association, sigma2)]
    for _ in range(params.redesign_max_iter):
        aux = _mask_aux(update_aux(channels, cur, sigma2), mask)
        w = closed_form_w(channels, cur.phi, aux, mask, config.p_bs)
        phi = cur.phi
        if optimize_phi:
            pq = passive.assemble_passive_quadratics(channels, w, aux.tau, aux.q, sigma2)
            res = passive.admm_passive_loop(pq, phi, params.rho, params.tol_admm,
                                            params.max_admm_iter, free=free,
                                            rho_growth=params.rho_growth)
            f_old = fp_objective(aux.tau, aux.q, w, phi, channels, sigma2)
            if fp_objective(aux.tau, aux.q, w, res.phi, channels, sigma2) >= f_old:
                phi = res.phi
        cur = BeamState(w, phi)
        rates.append(sum_rate(channels, cur, association, sigma2))
        if abs(rates[-1] - rates[-2]) < params.redesign_tol:
            break
    return cur, rates
