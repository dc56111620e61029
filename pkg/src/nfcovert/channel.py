"""Channel generation: far-field BS-RIS link, near-field RIS-user links.

Conventions
-----------
* ``H_br`` has shape ``(N, M_BS)``; user/warden vectors ``g`` have length ``N``.
* The cascaded BS-to-x channel is ``h = H_br^H diag(exp(j theta)) g``.
* Path gains are CN(0, 1) unless given explicitly; angles are uniform on
  ``(-angle_max, angle_max)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .config import SPEED_OF_LIGHT, SystemConfig, free_space_gain, ris_shape
from .errors import InvalidArgument


# ---------------------------------------------------------------------------
# geometry and path containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArrayGeometry:
    m_bs: int
    n_y: int
    n_z: int
    d: float
    wavelength: float

    def __post_init__(self):
        if self.m_bs < 1 or self.n_y < 1 or self.n_z < 1:
            raise InvalidArgument("array sizes must be >= 1")
        if self.d <= 0 or self.wavelength <= 0:
            raise InvalidArgument("spacing and wavelength must be positive")

    @property
    def n(self) -> int:
        return self.n_y * self.n_z

    @property
    def f(self) -> float:
        return SPEED_OF_LIGHT / self.wavelength

    @property
    def ris_aperture(self) -> float:
        """Diagonal extent of the RIS in meters."""
        return self.d * math.hypot(self.n_y - 1, self.n_z - 1)

    @classmethod
    def from_config(cls, cfg: SystemConfig, n_ris: Optional[int] = None) -> "ArrayGeometry":
        if n_ris is None:
            n_y, n_z = cfg.ris_dims
        else:
            n_y, n_z = ris_shape(n_ris)
        return cls(cfg.m_bs, n_y, n_z, cfg.spacing, cfg.wavelength)


@dataclass(frozen=True)
class PathSet:
    """Sparse multipath description of one link.

    BS-RIS paths use ``aod``, ``aoa`` (elevation) and ``azimuth``; RIS-x paths
    use ``theta`` and ``ranges`` (plus ``azimuth`` for the planar-wave
    variant).  ``path_loss`` is the average large-scale power gain.
    """

    gains: np.ndarray
    aod: Optional[np.ndarray] = None
    aoa: Optional[np.ndarray] = None
    azimuth: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    ranges: Optional[np.ndarray] = None
    path_loss: float = 1.0

    def __post_init__(self):
        gains = np.atleast_1d(np.asarray(self.gains, dtype=complex))
        if gains.size == 0:
            raise InvalidArgument("a path set needs at least one path")
        object.__setattr__(self, "gains", gains)
        for name in ("aod", "aoa", "azimuth", "theta", "ranges"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.atleast_1d(np.asarray(value, dtype=float))
            if arr.shape != gains.shape:
                raise InvalidArgument(f"{name} must have one entry per path")
            if name == "ranges" and np.any(arr <= 0):
                raise InvalidArgument("scatterer ranges must be positive")
            if name != "ranges" and np.any(np.abs(arr) >= math.pi / 2):
                raise InvalidArgument(f"{name} must lie in (-pi/2, pi/2)")
            object.__setattr__(self, name, arr)
        if self.path_loss < 0:
            raise InvalidArgument("path_loss must be non-negative")

    @property
    def count(self) -> int:
        return self.gains.size


@dataclass(frozen=True)
class NoiseUncertainty:
    sigma_w2_nominal: float
    rho: float
    sigma_k2: float = 1.0

    def __post_init__(self):
        if self.rho < 1:
            raise InvalidArgument("rho must be >= 1")
        if self.sigma_w2_nominal <= 0:
            raise InvalidArgument("nominal warden noise power must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return self.sigma_w2_nominal / self.rho, self.rho * self.sigma_w2_nominal


# ---------------------------------------------------------------------------
# array responses
# ---------------------------------------------------------------------------


def _check_array(m: int, d: float, wavelength: float):
    if m < 1:
        raise InvalidArgument("element count must be >= 1")
    if d <= 0 or wavelength <= 0:
        raise InvalidArgument("spacing and wavelength must be positive")


def ula_steering(theta: float, m: int, d: float, wavelength: float) -> np.ndarray:
    _check_array(m, d, wavelength)
    k = 2 * np.pi * d / wavelength
    return np.exp(1j * k * np.arange(m) * np.sin(theta)) / np.sqrt(m)


def upa_steering(theta: float, phi: float, n_y: int, n_z: int, d: float,
                 wavelength: float) -> np.ndarray:
    """Planar response ``a_y(theta, phi) kron a_z(phi)``, unit norm."""
    _check_array(n_y, d, wavelength)
    _check_array(n_z, d, wavelength)
    k = 2 * np.pi * d / wavelength
    a_y = np.exp(1j * k * np.arange(n_y) * np.sin(theta) * np.cos(phi))
    a_z = np.exp(1j * k * np.arange(n_z) * np.sin(phi))
    return np.kron(a_y, a_z) / np.sqrt(n_y * n_z)


def nf_response(theta_l: float, r_l: float, n: int, d: float, wavelength: float) -> np.ndarray:
    """Spherical-wave response of an ``n``-element array to a source at
    angle ``theta_l`` and range ``r_l`` from the array centre."""
    _check_array(n, d, wavelength)
    if r_l <= 0:
        raise InvalidArgument("range must be positive")
    delta = (2 * np.arange(1, n + 1) - n - 1) / 2
    r_n = np.sqrt(r_l ** 2 + (delta * d) ** 2 - 2 * r_l * delta * d * np.sin(theta_l))
    return np.exp(-1j * 2 * np.pi / wavelength * (r_n - r_l)) / np.sqrt(n)


# ---------------------------------------------------------------------------
# links
# ---------------------------------------------------------------------------


def _cn(rng: np.random.Generator, size) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2)


def draw_bs_ris_paths(rng: np.random.Generator, n_paths: int = 3, path_loss: float = 1.0,
                      angle_max: float = math.pi / 3) -> PathSet:
    if n_paths < 1:
        raise InvalidArgument("J_p must be >= 1")
    gains = _cn(rng, n_paths)
    aod, aoa, az = rng.uniform(-angle_max, angle_max, size=(3, n_paths))
    return PathSet(gains, aod=aod, aoa=aoa, azimuth=az, path_loss=path_loss)


def draw_ris_user_paths(rng: np.random.Generator, distance: float, n_paths: int = 3,
                        path_loss: float = 1.0, angle_max: float = math.pi / 3,
                        spread: float = 0.25) -> PathSet:
    """Scatterer ranges are uniform on ``distance * [1 - spread, 1 + spread]``.

    The draw order does not depend on ``distance``, so two calls with the same
    generator state and different distances share every angle and gain.
    """
    if n_paths < 1:
        raise InvalidArgument("L_x must be >= 1")
    gains = _cn(rng, n_paths)
    theta, az = rng.uniform(-angle_max, angle_max, size=(2, n_paths))
    u = rng.uniform(size=n_paths)
    ranges = distance * (1 - spread + 2 * spread * u)
    return PathSet(gains, theta=theta, azimuth=az, ranges=ranges, path_loss=path_loss)


def sample_bs_ris_channel(geom: ArrayGeometry, paths: Optional[PathSet] = None,
                          rng: Optional[np.random.Generator] = None, **draw_kw) -> np.ndarray:
    """Far-field BS-RIS matrix, shape ``(N, M_BS)``.

    Either pass ``paths`` explicitly or an ``rng`` to draw them.
    """
    if paths is None:
        if rng is None:
            raise InvalidArgument("need either paths or rng")
        paths = draw_bs_ris_paths(rng, **draw_kw)
    if paths.aod is None or paths.aoa is None or paths.azimuth is None:
        raise InvalidArgument("BS-RIS paths need aod, aoa and azimuth")
    j_p = paths.count
    scale = np.sqrt(geom.m_bs * geom.n * paths.path_loss / j_p)
    H = np.zeros((geom.n, geom.m_bs), dtype=complex)
    for j in range(j_p):
        a_r = upa_steering(paths.aoa[j], paths.azimuth[j], geom.n_y, geom.n_z, geom.d,
                           geom.wavelength)
        a_t = ula_steering(paths.aod[j], geom.m_bs, geom.d, geom.wavelength)
        H += paths.gains[j] * np.outer(a_r, a_t.conj())
    return scale * H


def sample_ris_user_channel(geom: ArrayGeometry, paths: Optional[PathSet] = None,
                            rng: Optional[np.random.Generator] = None, far_field: bool = False,
                            **draw_kw) -> np.ndarray:
    """RIS-to-x vector of length N.

    Near field (default) sums spherical-wave responses; ``far_field=True``
    replaces them by planar UPA responses at the same angles.
    """
    if paths is None:
        if rng is None:
            raise InvalidArgument("need either paths or rng")
        paths = draw_ris_user_paths(rng, **draw_kw)
    n = geom.n
    g = np.zeros(n, dtype=complex)
    for l in range(paths.count):
        if far_field:
            phi = 0.0 if paths.azimuth is None else paths.azimuth[l]
            b = upa_steering(paths.theta[l], phi, geom.n_y, geom.n_z, geom.d, geom.wavelength)
        else:
            if paths.ranges is None:
                raise InvalidArgument("near-field paths need ranges")
            b = nf_response(paths.theta[l], paths.ranges[l], n, geom.d, geom.wavelength)
        g += paths.gains[l] * b
    return np.sqrt(paths.path_loss * n / paths.count) * g


def cascaded_channel(H_br: np.ndarray, theta_vec: np.ndarray, g: np.ndarray) -> np.ndarray:
    H_br = np.asarray(H_br)
    theta_vec = np.asarray(theta_vec, dtype=float)
    g = np.asarray(g)
    if H_br.ndim != 2 or theta_vec.shape != (H_br.shape[0],) or g.shape[-1] != H_br.shape[0]:
        raise InvalidArgument("dimension mismatch in cascaded channel")
    return H_br.conj().T @ (np.exp(1j * theta_vec) * g)


def rayleigh_distance(d_ris_aperture: float, d_user_aperture: float, f: float) -> float:
    if d_ris_aperture < 0 or d_user_aperture < 0 or f <= 0:
        raise InvalidArgument("apertures must be >= 0 and frequency positive")
    return 2 * (d_ris_aperture + d_user_aperture) * f / SPEED_OF_LIGHT


def near_field_lower_bound(d_ris_aperture: float, f: float) -> float:
    if d_ris_aperture < 0 or f <= 0:
        raise InvalidArgument("aperture must be >= 0 and frequency positive")
    return 0.62 * math.sqrt(d_ris_aperture / (SPEED_OF_LIGHT / f))


def sample_willie_noise(nu: NoiseUncertainty, rng: np.random.Generator, size=None):
    """Log-uniform draw on ``[sigma~^2 / rho, rho sigma~^2]``."""
    if nu.rho < 1:
        raise InvalidArgument("rho must be >= 1")
    if nu.rho == 1:
        return nu.sigma_w2_nominal if size is None else np.full(size, nu.sigma_w2_nominal)
    u = rng.uniform(size=size)
    return nu.sigma_w2_nominal * nu.rho ** (2 * u - 1)


def element_distances(geom: ArrayGeometry, distance: float, angle: float = 0.0) -> np.ndarray:
    """Distances from every RIS element to a point ``distance`` away from the
    RIS centre at azimuth ``angle`` (RIS in the y-z plane, boresight along x)."""
    y = (np.arange(geom.n_y) - (geom.n_y - 1) / 2) * geom.d
    z = (np.arange(geom.n_z) - (geom.n_z - 1) / 2) * geom.d
    yy, zz = np.meshgrid(y, z, indexing="ij")
    px, py = distance * math.cos(angle), distance * math.sin(angle)
    return np.sqrt(px ** 2 + (py - yy.ravel()) ** 2 + zz.ravel() ** 2)


# ---------------------------------------------------------------------------
# realizations
# ---------------------------------------------------------------------------


def rng_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for realization ``index`` of experiment ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelRealization:
    H_br: np.ndarray
    g_users: np.ndarray          # (K, N); row 0 is Bob
    g_rw: np.ndarray
    seed: Optional[int] = None
    index: int = 0
    far_field: bool = False
    geometry: dict = field(default_factory=dict)

    def __post_init__(self):
        H = _frozen(self.H_br)
        G = _frozen(np.atleast_2d(self.g_users))
        w = _frozen(self.g_rw)
        if H.ndim != 2 or G.shape[1] != H.shape[0] or w.shape != (H.shape[0],):
            raise InvalidArgument("inconsistent channel dimensions")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(G)) and np.all(np.isfinite(w))):
            raise InvalidArgument("channel entries must be finite")
        object.__setattr__(self, "H_br", H)
        object.__setattr__(self, "g_users", G)
        object.__setattr__(self, "g_rw", w)

    @property
    def n(self) -> int:
        return self.H_br.shape[0]

    @property
    def m_bs(self) -> int:
        return self.H_br.shape[1]

    @property
    def k(self) -> int:
        return self.g_users.shape[0]

    @property
    def g_rb(self) -> np.ndarray:
        return self.g_users[0]

    def user_channels(self, theta_vec) -> np.ndarray:
        """Cascaded channels of all users, shape ``(K, M_BS)``."""
        return np.stack([cascaded_channel(self.H_br, theta_vec, g) for g in self.g_users])

    def willie_channel(self, theta_vec) -> np.ndarray:
        return cascaded_channel(self.H_br, theta_vec, self.g_rw)

    def to_json(self) -> str:
        doc = {
            "schema": "nfcovert.channel/1",
            "seed": self.seed,
            "index": self.index,
            "far_field": self.far_field,
            "geometry": self.geometry,
            "H_br": complex_to_pairs(self.H_br),
            "g_users": complex_to_pairs(self.g_users),
            "g_rw": complex_to_pairs(self.g_rw),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        doc = json.loads(text)
        return cls(H_br=pairs_to_complex(doc["H_br"]), g_users=pairs_to_complex(doc["g_users"]),
                   g_rw=pairs_to_complex(doc["g_rw"]), seed=doc.get("seed"),
                   index=doc.get("index", 0), far_field=doc.get("far_field", False),
                   geometry=doc.get("geometry", {}))


def complex_to_pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def pairs_to_complex(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1] != 2:
        raise InvalidArgument("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

CHANNEL_JSON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ChannelRealization",
    "type": "object",
    "required": ["schema", "H_br", "g_users", "g_rw"],
    "properties": {
        "schema": {"const": "nfcovert.channel/1"},
        "seed": {"type": ["integer", "null"]},
        "index": {"type": "integer"},
        "far_field": {"type": "boolean"},
        "geometry": {"type": "object"},
        "H_br": {"type": "array", "items": {"type": "array", "items": _PAIR}},
        "g_users": {"type": "array", "items": {"type": "array", "items": _PAIR}},
        "g_rw": {"type": "array", "items": _PAIR},
    },
}


def realize(cfg: SystemConfig, seed: int, index: int = 0, far_field: bool = False,
            n_ris: Optional[int] = None) -> ChannelRealization:
    """Draw one scenario realization.

    The random stream depends only on ``(seed, index)``: changing a distance
    or switching to the far-field variant reuses every gain and angle, which
    keeps sweeps paired across their grid points.
    """
    geom = ArrayGeometry.from_config(cfg, n_ris)
    rng = rng_stream(seed, index)
    lam = cfg.wavelength
    br = draw_bs_ris_paths(rng, cfg.n_paths_br, free_space_gain(cfg.bs_ris_distance, lam),
                           cfg.angle_max)
    H = sample_bs_ris_channel(geom, br)

    def link(distance):
        if far_field:
            distance = max(distance, cfg.ff_distance)
        paths = draw_ris_user_paths(rng, distance, cfg.n_paths_ru, free_space_gain(distance, lam),
                                    cfg.angle_max, cfg.range_spread)
        return sample_ris_user_channel(geom, paths, far_field=far_field)

    g_users = np.stack([link(d) for d in cfg.user_distances])
    g_rw = link(cfg.willie_distance)
    meta = asdict(geom)
    meta["n"] = geom.n
    return ChannelRealization(H, g_users, g_rw, seed=seed, index=index, far_field=far_field,
                              geometry=meta)
