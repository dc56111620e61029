"""Scenario and optimizer configuration.

All powers are stored in linear watts; the ``*_dbm`` fields are converted at
the boundary through the properties below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Any, Mapping

import numpy as np

from .errors import InvalidArgument

SPEED_OF_LIGHT = 3e8


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def free_space_gain(distance: float, wavelength: float) -> float:
    """Friis power gain (lambda / (4 pi d))^2 between isotropic elements."""
    if distance <= 0:
        raise InvalidArgument("distance must be positive")
    return (wavelength / (4.0 * math.pi * distance)) ** 2


def ris_shape(n: int) -> tuple[int, int]:
    """Most nearly square (n_y, n_z) factorisation with n_y <= n_z."""
    if n < 1:
        raise InvalidArgument("RIS size must be >= 1")
    n_y = int(math.isqrt(n))
    while n % n_y:
        n_y -= 1
    return n_y, n // n_y


@dataclass(frozen=True)
class SystemConfig:
    """Every scalar describing one deployment scenario."""

    carrier_hz: float = 28e9
    m_bs: int = 4
    n_ris: int = 64
    n_users: int = 3
    p_max_dbm: float = 30.0
    noise_dbm: float = -120.0
    # warden side
    willie_noise_dbm: float = -120.0
    rho: float = 2.0
    varsigma: float = 0.1
    # geometry (meters); user 0 is the covert user (Bob)
    bs_ris_distance: float = 20.0
    user_distance_min: float = 3.0
    user_distance_max: float = 5.0
    willie_distance: float = 4.0
    ff_distance: float = 30.0
    range_spread: float = 0.25
    angle_max: float = math.pi / 3
    # sparse multipath
    n_paths_br: int = 3
    n_paths_ru: int = 3
    # QoS (bit/s/Hz)
    r_min_public: float = 0.5
    r_min_bob: float = 0.0

    def __post_init__(self):
        for name in ("m_bs", "n_ris", "n_users", "n_paths_br", "n_paths_ru"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        for name in ("carrier_hz", "bs_ris_distance", "user_distance_min",
                     "user_distance_max", "willie_distance", "ff_distance"):
            if getattr(self, name) <= 0:
                raise InvalidArgument(f"{name} must be positive")
        if self.user_distance_max < self.user_distance_min:
            raise InvalidArgument("user_distance_max < user_distance_min")
        if self.rho < 1:
            raise InvalidArgument("rho must be >= 1")
        if not 0 <= self.varsigma <= 1:
            raise InvalidArgument("varsigma must lie in [0, 1]")
        if not 0 <= self.range_spread < 1:
            raise InvalidArgument("range_spread must lie in [0, 1)")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def spacing(self) -> float:
        return self.wavelength / 2

    @property
    def ris_dims(self) -> tuple[int, int]:
        return ris_shape(self.n_ris)

    @property
    def p_max(self) -> float:
        return float(dbm_to_watt(self.p_max_dbm))

    @property
    def noise(self) -> float:
        return float(dbm_to_watt(self.noise_dbm))

    @property
    def willie_noise(self) -> float:
        return float(dbm_to_watt(self.willie_noise_dbm))

    @property
    def user_distances(self) -> np.ndarray:
        return np.linspace(self.user_distance_min, self.user_distance_max, self.n_users)

    @property
    def r_min(self) -> np.ndarray:
        r = np.full(self.n_users, self.r_min_public, dtype=float)
        r[0] = self.r_min_bob
        return r

    def with_overrides(self, overrides: Mapping[str, Any]) -> "SystemConfig":
        return apply_overrides(self, overrides)


@dataclass(frozen=True)
class AOConfig:
    """Stopping rules and numerical knobs of the alternating optimizer."""

    eps: float = 1e-4
    j_max: int = 30
    q_max: int = 30
    s_max: int = 100
    common_fraction: float = 0.2
    init_power_fraction: float = 0.9
    leak_margin: float = 1e-3
    qos_penalty: float = 1e3
    tol_feas: float = 1e-6
    tol_opt: float = 1e-6
    solver: str = "CLARABEL"
    backtrack_steps: int = 6
    n_starts: int = 1           # random initial phase draws; the best terminal point is kept

    def __post_init__(self):
        if self.eps < 0:
            raise InvalidArgument("eps must be >= 0")
        for name in ("j_max", "q_max", "s_max", "n_starts"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        if not 0 <= self.common_fraction < 1:
            raise InvalidArgument("common_fraction must lie in [0, 1)")
        if not 0 < self.init_power_fraction <= 1:
            raise InvalidArgument("init_power_fraction must lie in (0, 1]")

    def with_overrides(self, overrides: Mapping[str, Any]) -> "AOConfig":
        return apply_overrides(self, overrides)


def apply_overrides(obj, overrides: Mapping[str, Any]):
    known = {f.name: f for f in fields(obj)}
    clean = {}
    for key, value in overrides.items():
        if key not in known:
            raise KeyError(key)
        current = getattr(obj, key)
        if isinstance(current, bool):
            clean[key] = bool(value)
        elif isinstance(current, int):
            if isinstance(value, float) and not value.is_integer():
                raise InvalidArgument(f"{key} must be an integer")
            clean[key] = int(value)
        elif isinstance(current, float):
            clean[key] = float(value)
        else:
            clean[key] = value
    return replace(obj, **clean)
