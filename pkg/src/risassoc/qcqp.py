"""Convex QCQP solver (log-barrier interior point).

Problems are posed over complex vectors and mapped to a real vector by
stacking real and imaginary parts, ``z = [Re x; Im x]``.  Under that map a
Hermitian ``A`` becomes ``[[Re A, -Im A], [Im A, Re A]]`` and
``Re{b^H x} = [Re b; Im b]^T z``.

The real core minimizes ``0.5 z^T Q z + q^T z + q0`` subject to
``0.5 z^T P_i z + p_i^T z + r_i <= 0``; it is shared by the active and
passive beamforming updates.
"""
from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"
# required slack of the start point, in units of the normalized constraints
INTERIOR_MARGIN = 0.05
# a few phase-one steps suffice to pull a feasible start off the boundary
RECENTER_MAX_ITER = 15
# slack below which a start point counts as on the boundary
STRICT_SLACK = 1e-9
# fraction of a constraint's slack that one Newton step may not consume
SLACK_KEEP = 0.01


@dataclass
class RealQcqp:
    Q: np.ndarray
    q: np.ndarray
    P: np.ndarray  # (m, n, n), or (m, n) holding diagonals only
    p: np.ndarray  # (m, n)
    r: np.ndarray  # (m,)
    q0: float = 0.0

    @property
    def diagonal(self):
        return self.P.ndim == 2

    def P_times(self, z):
        """Rows P_i z, shape (m, n)."""
        return self.P * z if self.diagonal else self.P @ z

    def P_weighted(self, lam):
        """sum_i lam_i P_i as a dense matrix."""
        if self.diagonal:
            return np.diag(lam @ self.P)
        return np.tensordot(lam, self.P, axes=1)

    @property
    def n(self):
        return self.q.shape[0]

    @property
    def m(self):
        return self.r.shape[0]

    def objective(self, z):
        return 0.5 * z @ self.Q @ z + self.q @ z + self.q0

    def constraints(self, z):
        if self.m == 0:
            return np.zeros(0)
        Pz = self.P_times(z)
        return 0.5 * (Pz @ z) + self.p @ z + self.r


@dataclass
class QcqpProblem:
    """maximize -x^H A x + Re{b^H x} + c  s.t.  x^H P x + Re{r^H x} + s <= 0.

    ``constraints`` is a list of ``(P, r, s)`` triples; ``box`` optionally caps
    each ``|x_n|`` and is expanded into one quadratic constraint per entry.
    """
    A: np.ndarray
    b: np.ndarray
    c: float = 0.0
    constraints: list = field(default_factory=list)
    box: np.ndarray | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        self.b = np.asarray(self.b, dtype=complex)
        n = self.b.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be n x n with n = len(b)")
        for P, _, _ in self.constraints:
            if np.linalg.eigvalsh(_herm(np.asarray(P, dtype=complex))).min() < -1e-8:
                raise ValueError("constraint matrix is not positive semidefinite")
        if np.linalg.eigvalsh(_herm(self.A)).min() < -1e-8:
            raise ValueError("objective matrix is not positive semidefinite")

    @property
    def n(self):
        return self.b.shape[0]

    def objective(self, x):
        x = np.asarray(x, dtype=complex)
        return float(-np.vdot(x, self.A @ x).real + np.vdot(self.b, x).real + self.c)

    def constraint_values(self, x):
        x = np.asarray(x, dtype=complex)
        vals = [np.vdot(x, np.asarray(P) @ x).real + np.vdot(r, x).real + s
                for P, r, s in self.constraints]
        if self.box is not None:
            vals.extend(np.abs(x) ** 2 - np.asarray(self.box, dtype=float) ** 2)
        return np.asarray(vals, dtype=float)

    def to_real(self):
        n = self.n
        Q = 2.0 * realify(self.A)
        q = -np.concatenate([self.b.real, self.b.imag])
        mats = [np.asarray(P, dtype=complex) for P, _, _ in self.constraints]
        diagonal = all(np.count_nonzero(P - np.diag(np.diag(P))) == 0 for P in mats)
        Ps, ps, rs = [], [], []
        for P, (_, r, s) in zip(mats, self.constraints):
            r = np.asarray(r, dtype=complex)
            if diagonal:
                d = 2.0 * np.diag(P).real
                Ps.append(np.concatenate([d, d]))
            else:
                Ps.append(2.0 * realify(P))
            ps.append(np.concatenate([r.real, r.imag]))
            rs.append(float(s))
        if self.box is not None:
            for k, cap in enumerate(np.broadcast_to(self.box, (n,))):
                d = np.zeros(2 * n)
                d[k] = d[n + k] = 2.0
                Ps.append(d if diagonal else np.diag(d))
                ps.append(np.zeros(2 * n))
                rs.append(-float(cap) ** 2)
        m = len(rs)
        shape = (m, 2 * n) if diagonal else (m, 2 * n, 2 * n)
        return RealQcqp(Q, q, np.array(Ps).reshape(shape), np.array(ps).reshape(m, 2 * n),
                        np.array(rs), -self.c)


@dataclass
class QcqpSolution:
    x: np.ndarray
    objective_value: float
    kkt_residual: float
    status: str
    iterations: int = 0
    multipliers: np.ndarray | None = None


def _herm(A):
    return 0.5 * (A + A.conj().T)


def realify(A):
    A = _herm(A)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def complexify(z):
    n = z.shape[0] // 2
    return z[:n] + 1j * z[n:]


def _scaled(prob):
    """Normalize objective and each constraint to unit max coefficient."""
    so = max(np.abs(prob.Q).max(initial=0.0), np.abs(prob.q).max(initial=0.0), 1e-300)
    if prob.m:
        sc = np.maximum.reduce([np.abs(prob.P).reshape(prob.m, -1).max(axis=1),
                                np.abs(prob.p).max(axis=1), np.abs(prob.r)])
        sc = np.where(sc > 0, sc, 1.0)
    else:
        sc = np.ones(0)
    Pscale = sc[:, None] if prob.diagonal else sc[:, None, None]
    return RealQcqp(prob.Q / so, prob.q / so, prob.P / Pscale,
                    prob.p / sc[:, None], prob.r / sc, prob.q0 / so), so, sc


def _kkt(prob, z, lam):
    g0 = prob.Q @ z + prob.q
    if prob.m == 0:
        return np.abs(g0).max(initial=0.0) / (1.0 + np.abs(prob.q).max(initial=0.0))
    f = prob.constraints(z)
    grads = prob.P_times(z) + prob.p
    rd = g0 + lam @ grads
    stat = np.abs(rd).max() / (1.0 + np.abs(g0).max())
    return max(stat, np.abs(lam * f).max(), max(f.max(), 0.0))


def _max_feasible_step(prob, f, grads, dz):
    """Largest s along dz that uses up at most ``-f[i]`` of each constraint's slack.

    Solves the exact quadratic in s; with ``f`` the constraint values this is
    the step to the boundary.
    """
    if prob.m == 0:
        return 1.0
    a = 0.5 * (prob.P_times(dz) @ dz)
    b = grads @ dz
    disc = np.sqrt(np.maximum(b * b - 4.0 * a * f, 0.0))
    # stable positive root of a s^2 + b s + f = 0 (f < 0, a >= 0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        root = np.where(b > 0, -2.0 * f / (b + disc), (disc - b) / (2.0 * a))
    root = np.where((a <= 0) & (b <= 0), np.inf, root)
    return float(np.min(root, initial=np.inf))


def _initial_t(prob, z, f, grads):
    """Barrier weight that best balances objective and barrier gradients at z."""
    g0 = prob.Q @ z + prob.q
    gb = grads.T @ (1.0 / -f)
    gg = g0 @ g0
    t = -(g0 @ gb) / gg if gg > 0 else 1.0
    return float(np.clip(t, 1e-3, 1e3)) if np.isfinite(t) else 1.0


def _barrier(prob, z, tol, max_iter, stop=None):
    """Log-barrier method with damped Newton centering from a strictly feasible z.

    Returns ``(z, lam, newton_steps, converged)``; ``lam = 1 / (t * -f)`` are
    the duals of the last central point, with duality gap ``m / t``.
    """
    m = prob.m
    mu, alpha, beta = 20.0, 0.01, 0.5
    f = prob.constraints(z)
    grads = prob.P_times(z) + prob.p
    t = _initial_t(prob, z, f, grads)

    it = 0
    while it < max_iter:
        stalled, short = False, 0
        # loose centering suffices until the gap target is within reach
        final = m / t <= tol * max(1.0, abs(prob.objective(z)))
        dec_tol = 1e-10 if final else 1e-3
        # centering at fixed t
        while it < max_iter:
            it += 1
            f = prob.constraints(z)
            if stop is not None and stop(z, f):
                return z, 1.0 / (t * -f), it, True
            grads = prob.P_times(z) + prob.p
            d = 1.0 / -f
            g = t * (prob.Q @ z + prob.q) + grads.T @ d
            H = t * prob.Q + prob.P_weighted(d) + (grads.T * d * d) @ grads
            try:
                dz = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                dz = np.linalg.lstsq(H, -g, rcond=None)[0]
            dec = -(g @ dz)
            if dec <= dec_tol:
                break
            # stay strictly inside: keep SLACK_KEEP of every constraint's slack
            s = min(1.0, 0.99 * _max_feasible_step(prob, (1.0 - SLACK_KEEP) * f, grads, dz))
            # change of the barrier merit along dz, from exact quadratic expansions
            # so that it stays accurate when t is large
            g0dz = (prob.Q @ z + prob.q) @ dz
            dQd = dz @ prob.Q @ dz
            gdz = grads @ dz
            dPd = prob.P_times(dz) @ dz
            while s > 1e-12:
                df = s * gdz + 0.5 * s * s * dPd
                if np.all(df / -f > -1.0):
                    change = t * (s * g0dz + 0.5 * s * s * dQd) - np.sum(np.log1p(df / f))
                    if change <= -alpha * s * dec:
                        break
                s *= beta
            z2 = z + s * dz
            # repeated tiny steps mean rounding has taken over
            short = short + 1 if s < 1e-4 else 0
            if s <= 1e-12 or short >= 5:
                stalled = True
                break
            z = z2
        f = prob.constraints(z)
        gap = m / t
        if gap <= tol * max(1.0, abs(prob.objective(z))):
            return z, 1.0 / (t * -f), it, True
        if stalled:
            break
        t *= mu
    return z, 1.0 / (t * -prob.constraints(z)), it, False


def _phase_one(prob, z0, max_iter, target=None):
    """Find a strictly feasible point by minimizing the max constraint value."""
    n, m = prob.n, prob.m
    f0 = prob.constraints(z0)
    # variables (z, s): f_i(z) - s <= 0 and -s - 1 <= 0
    Q = np.zeros((n + 1, n + 1))
    q = np.zeros(n + 1)
    q[-1] = 1.0
    if prob.diagonal:
        P = np.zeros((m + 1, n + 1))
        P[:m, :n] = prob.P
    else:
        P = np.zeros((m + 1, n + 1, n + 1))
        P[:m, :n, :n] = prob.P
    p = np.zeros((m + 1, n + 1))
    p[:m, :n] = prob.p
    p[:m, -1] = -1.0
    p[m, -1] = -1.0
    r = np.concatenate([prob.r, [-1.0]])
    aux = RealQcqp(Q, q, P, p, r)
    y = np.concatenate([z0, [max(f0.max(), -0.5) + 1.0]])

    target = -INTERIOR_MARGIN if target is None else target

    def stop(y, f):
        return prob.constraints(y[:n]).max() < target

    y, _, it, _ = _barrier(aux, y, 1e-9, max_iter, stop=stop)
    z = y[:n]
    return z, prob.constraints(z).max() < 0, it


def _drop_constant_rows(prob):
    """Remove constraints with no variable dependence; flag any that are violated."""
    if prob.m == 0:
        return prob, True, np.ones(0, bool)
    live = np.abs(prob.P).reshape(prob.m, -1).max(axis=1, initial=0.0) > 0
    live |= np.abs(prob.p).max(axis=1, initial=0.0) > 0
    if live.all():
        return prob, True, live
    ok = bool(np.all(prob.r[~live] <= 0))
    return RealQcqp(prob.Q, prob.q, prob.P[live], prob.p[live], prob.r[live], prob.q0), ok, live


def find_interior(prob, z0=None, max_iter=500):
    """Point with (close to) the largest uniform slack, or None if infeasible."""
    prob, ok, _ = _drop_constant_rows(prob)
    if not ok:
        return None
    sp, _, _ = _scaled(prob)
    z0 = np.zeros(sp.n) if z0 is None else np.asarray(z0, dtype=float)
    if sp.m == 0:
        return z0.copy()
    z, ok, _ = _phase_one(sp, z0, max_iter, target=-np.inf)
    return z if ok else None


def solve_real(prob, z0=None, tol=1e-7, max_iter=500, center=None):
    """Solve a real convex QCQP; returns (z, status, kkt_residual, iterations, multipliers).

    ``center``, a strictly feasible point, lets a warm start sitting on the
    boundary be pulled inside without a phase-one solve.
    """
    prob, trivial_ok, live = _drop_constant_rows(prob)
    sp, so, sc = _scaled(prob)
    z = np.zeros(prob.n) if z0 is None else np.asarray(z0, dtype=float).copy()
    if not np.all(np.isfinite(z)):
        raise ValueError("warm start must be finite")
    if not trivial_ok:
        return z, INFEASIBLE, np.inf, 0, None
    if sp.m == 0:
        z = np.linalg.lstsq(sp.Q, -sp.q, rcond=None)[0]
        return z, OPTIMAL, _kkt(sp, z, np.zeros(0)), 1, np.zeros(live.size)
    it1 = 0
    # points hugging the boundary stall the barrier method, so recenter them too
    fmax = sp.constraints(z).max()
    if fmax >= -INTERIOR_MARGIN and center is not None:
        fc = sp.constraints(center).max()
        if fc < min(fmax, 0.0):
            # convexity: the blend is strictly feasible with slack >= half of the center's
            z = 0.5 * (z + center) if fmax <= 0 else center.copy()
            fmax = -np.inf
    if fmax >= -INTERIOR_MARGIN:
        strict = fmax < -STRICT_SLACK
        zc, ok, it1 = _phase_one(sp, z, min(max_iter, RECENTER_MAX_ITER) if strict else max_iter)
        if ok and sp.constraints(zc).max() < min(fmax, 0.0):
            z = zc
        elif not strict:
            return zc, INFEASIBLE, np.inf, it1, None
    z, lam, it, converged = _barrier(sp, z, tol, max_iter)
    kkt = _kkt(sp, z, lam)
    status = OPTIMAL if kkt < tol * 100 else MAX_ITER
    full = np.zeros(live.size)
    full[live] = lam * so / sc
    return z, status, kkt, it + it1, full


def solve(problem, x0=None, tol=1e-7, max_iter=500, center=None):
    """Maximize a concave complex quadratic under convex quadratic constraints."""
    prob = problem.to_real()
    if center is not None:
        center = np.asarray(center, dtype=complex)
        center = np.concatenate([center.real, center.imag])
    z0 = None
    if x0 is not None:
        x0 = np.asarray(x0, dtype=complex)
        z0 = np.concatenate([x0.real, x0.imag])
    z, status, kkt, it, lam = solve_real(prob, z0, tol, max_iter, center)
    x = complexify(z)
    return QcqpSolution(x, problem.objective(x), kkt, status, it, lam)
