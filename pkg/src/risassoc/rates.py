"""Compound channels, SINR, sum-rate and the fractional-programming objective."""
from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


@dataclass
class BeamState:
    w: np.ndarray  # (J, K, M) active beamformers
    phi: np.ndarray  # (J, N) RIS reflection vector per BS band

    def copy(self):
        return BeamState(self.w.copy(), self.phi.copy())

    @property
    def theta(self):
        from .smoothing import principal_phase
        return principal_phase(self.phi)


@dataclass
class AssociationResult:
    user_to_bs: np.ndarray  # (K,) serving BS index per user
    ris_bs: int

    def __post_init__(self):
        self.user_to_bs = np.asarray(self.user_to_bs, dtype=int)
        self.ris_bs = int(self.ris_bs)

    def load(self, J):
        return np.bincount(self.user_to_bs, minlength=J)

    def mask(self, J):
        """Boolean (J, K) serving mask."""
        m = np.zeros((J, self.user_to_bs.size), dtype=bool)
        m[self.user_to_bs, np.arange(self.user_to_bs.size)] = True
        return m


def compound_channel(h_d_jk, h_r_k, phi_j, G_j):
    """h~ with h~^H = h_d^H + h_r^H diag(phi) G."""
    h_d_jk, h_r_k, phi_j, G_j = map(np.asarray, (h_d_jk, h_r_k, phi_j, G_j))
    if G_j.shape != (h_r_k.size, h_d_jk.size) or phi_j.size != h_r_k.size:
        raise ValueError("dimension mismatch in compound channel")
    row = h_d_jk.conj() + (h_r_k.conj() * phi_j) @ G_j
    return row.conj()


def compound_channels(channels, phi):
    """All compound channels, shape (J, K, M)."""
    # row_jk = conj(h_d_jk) + sum_n conj(h_r_kn) phi_jn G_jnm
    rows = channels.h_d.conj() + np.einsum("kn,jn,jnm->jkm", channels.h_r.conj(), phi, channels.G)
    return rows.conj()


def link_gains(h_tilde, w):
    """Z[j, k, i] = h~_{j,k}^H w_{j,i}."""
    return np.einsum("jkm,jim->jki", h_tilde.conj(), w)


def _sinr_from_gains(Z, sigma2):
    p = np.abs(Z) ** 2
    signal = np.einsum("jkk->jk", p)
    interference = p.sum(axis=2) - signal
    return signal / (interference + sigma2)


def sinr_matrix(channels, state, sigma2):
    return _sinr_from_gains(link_gains(compound_channels(channels, state.phi), state.w), sigma2)


def sinr(channels, state, j, k, sigma2):
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    h = compound_channel(channels.h_d[j, k], channels.h_r[k], state.phi[j], channels.G[j])
    z = h.conj() @ state.w[j].T
    p = np.abs(z) ** 2
    return float(p[k] / (p.sum() - p[k] + sigma2))


def relaxed_sum_rate(channels, state, sigma2):
    """Sum over every (BS, user) pair of log2(1 + SINR)."""
    return float(np.log2(1.0 + sinr_matrix(channels, state, sigma2)).sum())


def sum_rate(channels, state, association, sigma2):
    """Sum of log2(1 + SINR) with each user counted only on its serving BS."""
    s = sinr_matrix(channels, state, sigma2)
    k = np.arange(s.shape[1])
    return float(np.log2(1.0 + s[association.user_to_bs, k]).sum())


def user_rates(channels, state, association, sigma2):
    s = sinr_matrix(channels, state, sigma2)
    return np.log2(1.0 + s[association.user_to_bs, np.arange(s.shape[1])])


def fp_objective(tau, q, w, phi, channels, sigma2):
    """Quadratic-transform objective f(tau, q, w, phi)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    Z = link_gains(compound_channels(channels, phi), w)
    total = (np.abs(Z) ** 2).sum(axis=2) + sigma2
    direct = np.einsum("jkk->jk", Z)
    quad = 2.0 * np.sqrt(1.0 + tau) * np.real(np.conj(q) * direct) - np.abs(q) ** 2 * total
    return float(np.log2(1.0 + tau).sum() - tau.sum() / LN2 + quad.sum() / LN2)
