"""Comparison schemes: gain-based user association, random RIS and no RIS."""
import numpy as np

from .channels import ChannelSet
from .rates import AssociationResult


def gain_based_association(channels, ris_bs=0):
    """Each user picks the BS with the strongest direct channel (lowest index on ties).

    Only ``h_d`` is consulted, so the result does not depend on the RIS.
    The RIS side is left to the caller; ``ris_bs`` fills the slot.
    """
    gains = np.sum(np.abs(channels.h_d) ** 2, axis=-1)  # (J, K)
    return AssociationResult(np.argmax(gains, axis=0), ris_bs)


def random_ris_mode(config, rng=None):
    """Uniform random BS for the RIS and uniform phases in [-pi, pi) for it.

    Returns ``(ris_bs, phi)``; the other BSs keep all-ones (zero phase).
    """
    rng = np.random.default_rng(rng)
    ris_bs = int(rng.integers(config.J))
    phi = np.ones((config.J, config.N), dtype=complex)
    phi[ris_bs] = np.exp(1j * rng.uniform(-np.pi, np.pi, config.N))
    return ris_bs, phi


def no_ris_mode(channels):
    """Channel set with the BS-RIS links removed."""
    return ChannelSet(channels.h_d.copy(), np.zeros_like(channels.G), channels.h_r.copy())
