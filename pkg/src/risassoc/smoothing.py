"""Smooth l0-norm approximation g_delta(x) = 1 - exp(-x / delta)."""
from dataclasses import dataclass

import numpy as np


@dataclass
class SmoothingParams:
    delta: float = 0.75
    n1: float = 0.99
    n2: float = 1.01
    n3: float = 0.99
    n4: float = 1.01
    # optional geometric decay of delta between outer iterations
    decay: float = 1.0
    delta_floor: float = 1e-4

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if not (self.n1 <= 1.0 <= self.n2) or not (self.n3 <= 1.0 <= self.n4):
            raise ValueError("thresholds must bracket one: n1 <= 1 <= n2, n3 <= 1 <= n4")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must lie in (0, 1]")


def g_delta(x, delta):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("g_delta is defined for x >= 0")
    return -np.expm1(-x / delta)


def grad_g_delta(x, delta):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("grad_g_delta is defined for x >= 0")
    return np.exp(-x / delta) / delta


def principal_phase(phi):
    """Phase of each entry mapped into [-pi, pi)."""
    ang = np.angle(phi)
    return np.where(ang >= np.pi, ang - 2 * np.pi, ang)


def phase_norm_sq(phi, atol=1e-6):
    """Squared norm of the principal phases of a unit-modulus vector."""
    phi = np.asarray(phi, dtype=complex)
    if np.any(np.abs(np.abs(phi) - 1.0) > atol):
        raise ValueError("phase_norm_sq expects unit-modulus entries")
    return float(np.sum(principal_phase(phi) ** 2))
