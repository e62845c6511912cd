"""Network geometry and seeded Rician channel generation.

Powers are handled in milliwatts internally; dBm/dB inputs are converted once
through :func:`dbm_to_mw` and :func:`db_to_linear`.
"""
import math
from dataclasses import dataclass, field

import numpy as np

# stream tags for per-link RNG derivation
_USERS, _BS_USER, _BS_RIS, _RIS_USER = 0, 1, 2, 3


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_mw(dbm):
    return db_to_linear(dbm)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)


@dataclass
class SystemConfig:
    J: int = 2
    K: int = 4
    M: int = 4
    N: int = 8
    bs_positions: list = field(default_factory=lambda: [(0.0, 65.0), (60.0, 0.0)])
    ris_position: tuple = (0.0, 0.0)
    ring_center: tuple = (0.0, 0.0)
    ring_inner: float = 2.0
    ring_outer: float = 20.0
    # treat ring numbers as diameters instead of radii
    ring_is_diameter: bool = False
    p_max_dbm: float = 15.0
    noise_dbm: float = -80.0
    # (BS-user, BS-RIS, RIS-user)
    path_loss_exponents: tuple = (3.5, 2.5, 2.8)
    rician_factors: tuple = (0.0, math.inf, 1.0)
    c0_db: float = -30.0
    d0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.bs_positions = [tuple(map(float, p)) for p in self.bs_positions]
        self.ris_position = tuple(map(float, self.ris_position))
        self.ring_center = tuple(map(float, self.ring_center))
        self.path_loss_exponents = tuple(map(float, self.path_loss_exponents))
        self.rician_factors = tuple(map(float, self.rician_factors))
        for name in ("J", "K", "M", "N"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")
        if len(self.bs_positions) != self.J:
            raise ValueError(f"bs_positions has {len(self.bs_positions)} entries, J = {self.J}")
        if not 0 <= self.ring_inner <= self.ring_outer:
            raise ValueError("ring radii must satisfy 0 <= inner <= outer")
        if len(self.path_loss_exponents) != 3 or min(self.path_loss_exponents) <= 0:
            raise ValueError("path_loss_exponents needs three positive values")
        if len(self.rician_factors) != 3 or min(self.rician_factors) < 0:
            raise ValueError("rician_factors needs three non-negative values")
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")

    @property
    def p_max_mw(self):
        return float(dbm_to_mw(self.p_max_dbm))

    @property
    def p_bs(self):
        """Per-BS power budget P_j = P_max / J (mW)."""
        return self.p_max_mw / self.J

    @property
    def sigma2(self):
        return float(dbm_to_mw(self.noise_dbm))

    @property
    def ring_radii(self):
        scale = 0.5 if self.ring_is_diameter else 1.0
        return self.ring_inner * scale, self.ring_outer * scale


@dataclass
class ChannelSet:
    h_d: np.ndarray  # (J, K, M)
    G: np.ndarray  # (J, N, M)
    h_r: np.ndarray  # (K, N)

    def __post_init__(self):
        J, K, M = self.h_d.shape
        if self.G.shape[0] != J or self.G.shape[2] != M or self.h_r.shape != (K, self.G.shape[1]):
            raise ValueError("channel dimensions disagree")

    @property
    def dims(self):
        J, K, M = self.h_d.shape
        return J, K, M, self.G.shape[1]

    def scaled(self, factor):
        return ChannelSet(self.h_d * factor, self.G * factor, self.h_r.copy())

    def copy(self):
        return ChannelSet(self.h_d.copy(), self.G.copy(), self.h_r.copy())


def path_loss(d, alpha, c0_db=-30.0, d0=1.0):
    """Linear power gain 10^(c0/10) (d/d0)^-alpha."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0) or d0 <= 0:
        raise ValueError("distances must be positive")
    return db_to_linear(c0_db) * (d / d0) ** (-alpha)


def steering_vector(n, azimuth):
    """Half-wavelength ULA response exp(j pi n sin(azimuth))."""
    return np.exp(1j * np.pi * np.arange(n) * np.sin(azimuth))


def _azimuth(src, dst):
    return math.atan2(dst[1] - src[1], dst[0] - src[0])


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _rician(los, kappa, rng):
    if math.isinf(kappa):
        return los
    nlos = _cn(rng, los.shape)
    if kappa == 0:
        return nlos
    return math.sqrt(kappa / (1 + kappa)) * los + math.sqrt(1 / (1 + kappa)) * nlos


def place_users(config, rng=None):
    """Uniform-by-area user drop in the annulus around ``ring_center``."""
    if rng is None:
        rng = _stream(config.seed, _USERS)
    r_in, r_out = config.ring_radii
    radius = np.sqrt(rng.uniform(r_in ** 2, r_out ** 2, config.K))
    angle = rng.uniform(-np.pi, np.pi, config.K)
    cx, cy = config.ring_center
    return np.column_stack([cx + radius * np.cos(angle), cy + radius * np.sin(angle)])


def generate_channels(config, user_positions, seed=None):
    """Draw all channels; each link uses its own RNG stream keyed by (seed, link, j, k)."""
    seed = config.seed if seed is None else seed
    J, K, M, N = config.J, config.K, config.M, config.N
    a_bu, a_br, a_ru = config.path_loss_exponents
    k_bu, k_br, k_ru = config.rician_factors
    ris = config.ris_position
    users = np.asarray(user_positions, dtype=float)

    h_d = np.empty((J, K, M), dtype=complex)
    G = np.empty((J, N, M), dtype=complex)
    h_r = np.empty((K, N), dtype=complex)
    for j, bs in enumerate(config.bs_positions):
        for k in range(K):
            d = math.dist(bs, users[k])
            los = steering_vector(M, _azimuth(bs, users[k]))
            gain = math.sqrt(path_loss(d, a_bu, config.c0_db, config.d0))
            h_d[j, k] = gain * _rician(los, k_bu, _stream(seed, _BS_USER, j, k))
        d = math.dist(bs, ris)
        los = np.outer(steering_vector(N, _azimuth(ris, bs)), steering_vector(M, _azimuth(bs, ris)).conj())
        G[j] = math.sqrt(path_loss(d, a_br, config.c0_db, config.d0)) * _rician(los, k_br, _stream(seed, _BS_RIS, j))
    for k in range(K):
        d = math.dist(ris, users[k])
        los = steering_vector(N, _azimuth(ris, users[k]))
        h_r[k] = math.sqrt(path_loss(d, a_ru, config.c0_db, config.d0)) * _rician(los, k_ru, _stream(seed, _RIS_USER, k))
    return ChannelSet(h_d, G, h_r)


def draw_network(config, seed=None):
    """User positions and channels for one seeded realization."""
    seed = config.seed if seed is None else seed
    users = place_users(config, _stream(seed, _USERS))
    return users, generate_channels(config, users, seed)
