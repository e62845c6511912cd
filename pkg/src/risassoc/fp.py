"""Closed-form block updates of the FP auxiliary variables tau and q."""
from dataclasses import dataclass

import numpy as np

from .rates import compound_channels, link_gains


@dataclass
class AuxState:
    tau: np.ndarray  # (J, K)
    q: np.ndarray  # (J, K) complex


def _powers(channels, state):
    Z = link_gains(compound_channels(channels, state.phi), state.w)
    return Z, np.abs(Z) ** 2


def update_tau(channels, state, sigma2):
    _, p = _powers(channels, state)
    signal = np.einsum("jkk->jk", p)
    interference_only = p.sum(axis=2) - signal  # i != k
    return signal / (interference_only + sigma2)


def update_q(channels, state, tau, sigma2):
    Z, p = _powers(channels, state)
    received_total = p.sum(axis=2) + sigma2  # includes i == k
    return np.sqrt(1.0 + tau) * np.einsum("jkk->jk", Z) / received_total


def update_aux(channels, state, sigma2):
    tau = update_tau(channels, state, sigma2)
    return AuxState(tau, update_q(channels, state, tau, sigma2))
