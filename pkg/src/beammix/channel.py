"""Narrowband geometric mmWave channel simulator.

Channels are sums of L discrete propagation paths over a uniform linear
array (ULA):

    h = sqrt(N_t / rho) * sum_l alpha_l * exp(-j*2*pi*f_c*tau_l) * a(theta_l, phi_l)

where rho is the linear path loss, alpha_l a complex path gain, tau_l the
path delay (narrowband: the delay only contributes a carrier phase) and
a(.) the array response. The ULA phase convention is

    a_m(theta, phi) = exp(j * 2*pi * d * m * sin(theta) * cos(phi)),  m = 0..N_t-1

with d the element spacing in wavelengths; elevation phi = pi/2 collapses
the response to the all-ones (boresight) vector.

Scene families are parameterized distributions over path angles, gains and
delays that stand in for the environment statistics of a dataset. Two
families with disjoint azimuth supports emulate a train/test distribution
shift. All sampling is driven by explicit integer seeds; batch generation
uses the rule seed_index = base_seed + sample index.
"""

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and spacing in wavelengths."""

    n_antennas: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError(f"n_antennas must be >= 1, got {self.n_antennas}")
        if not self.spacing_wavelengths > 0:
            raise ValueError(
                f"spacing_wavelengths must be > 0, got {self.spacing_wavelengths}"
            )


@dataclass(frozen=True)
class PathComponent:
    """One propagation path: complex gain, azimuth/elevation AoA, delay."""

    gain: complex
    azimuth_rad: float
    elevation_rad: float = 0.0
    delay_s: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.gain):
            raise ValueError("path gain must be finite")
        if not -math.pi <= self.azimuth_rad <= math.pi:
            raise ValueError(f"azimuth {self.azimuth_rad} outside [-pi, pi]")
        if not 0.0 <= self.elevation_rad <= math.pi:
            raise ValueError(f"elevation {self.elevation_rad} outside [0, pi]")
        if self.delay_s < 0:
            raise ValueError("delay must be >= 0")


@dataclass(frozen=True)
class SceneFamily:
    """Distribution over path parameters standing in for one dataset.

    Azimuths are uniform on [center - spread, center + spread] (wrapped to
    [-pi, pi]); elevations are fixed in-plane (0 rad). Path l has complex
    Gaussian gain with mean power 10**(-l * gain_decay_db_per_path / 10),
    and a delay uniform on [0, delay_spread_s]. pathloss_db is 10*log10(rho).
    """

    id: str
    n_paths: int = 5
    azimuth_center_rad: float = 0.0
    azimuth_spread_rad: float = 0.3
    gain_decay_db_per_path: float = 3.0
    pathloss_db: float = 0.0
    delay_spread_s: float = 100e-9
    carrier_hz: float = 60e9

    def __post_init__(self):
        if not self.id:
            raise ValueError("scene id must be nonempty")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.azimuth_spread_rad < 0:
            raise ValueError("azimuth_spread_rad must be >= 0")
        if self.gain_decay_db_per_path < 0:
            raise ValueError("gain_decay_db_per_path must be >= 0")
        if self.delay_spread_s < 0:
            raise ValueError("delay_spread_s must be >= 0")
        if not self.carrier_hz > 0:
            raise ValueError("carrier_hz must be > 0")

    def path_gain_powers(self) -> np.ndarray:
        """Mean power of each path's complex Gaussian gain."""
        decay = 10.0 ** (-self.gain_decay_db_per_path * np.arange(self.n_paths) / 10.0)
        return decay

    def mean_channel_power(self, geometry: ArrayGeometry) -> float:
        """Closed-form E[||h||^2] = (N_t^2 / rho) * sum_l E[|alpha_l|^2].

        Each path contributes independently; the array response has
        ||a||^2 = N_t regardless of angle.
        """
        rho = 10.0 ** (self.pathloss_db / 10.0)
        n_t = geometry.n_antennas
        return float(n_t * n_t / rho * self.path_gain_powers().sum())


@dataclass(frozen=True)
class ChannelSample:
    """One generated channel vector with its provenance."""

    h: np.ndarray
    scene_id: str
    seed_index: int = 0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        object.__setattr__(self, "h", h)
        if h.ndim != 1:
            raise ValueError(f"h must be a vector, got shape {h.shape}")
        if not np.all(np.isfinite(h.view(np.float64))):
            raise ValueError("channel entries must be finite")
        if not np.any(h != 0):
            raise ValueError("channel must not be the all-zero vector")
        if self.seed_index < 0:
            raise ValueError("seed_index must be >= 0")

    @property
    def n_antennas(self) -> int:
        return self.h.shape[0]


def array_response(
    geometry: ArrayGeometry, azimuth_rad: float, elevation_rad: float = 0.0
) -> np.ndarray:
    """ULA response a_m = exp(j*2*pi*d*m*sin(az)*cos(el)); unit-modulus entries."""
    m = np.arange(geometry.n_antennas)
    phase = (
        TWO_PI
        * geometry.spacing_wavelengths
        * math.sin(azimuth_rad)
        * math.cos(elevation_rad)
    )
    return np.exp(1j * phase * m)


def channel_from_paths(
    paths: list[PathComponent],
    geometry: ArrayGeometry,
    pathloss_db: float = 0.0,
    carrier_hz: float = 60e9,
) -> np.ndarray:
    """Superpose explicit paths into a narrowband channel vector.

    The path delay is folded into a carrier phase exp(-j*2*pi*f_c*tau);
    the result is linear in the path gains.
    """
    if not paths:
        raise ValueError("at least one path is required")
    rho = 10.0 ** (pathloss_db / 10.0)
    scale = math.sqrt(geometry.n_antennas / rho)
    h = np.zeros(geometry.n_antennas, dtype=np.complex128)
    for p in paths:
        delay_phase = np.exp(-1j * TWO_PI * carrier_hz * p.delay_s)
        h += p.gain * delay_phase * array_response(geometry, p.azimuth_rad, p.elevation_rad)
    return scale * h


def sample_paths(scene: SceneFamily, rng: np.random.Generator) -> list[PathComponent]:
    """Draw one realization of the scene's path parameters.

    Draw order (fixed for reproducibility): azimuths, then gains (re/im
    pairs), then delays. Elevations are 0 (in-plane ULA propagation).
    """
    lo = scene.azimuth_center_rad - scene.azimuth_spread_rad
    hi = scene.azimuth_center_rad + scene.azimuth_spread_rad
    azimuths = rng.uniform(lo, hi, size=scene.n_paths)
    # wrap into [-pi, pi]
    azimuths = np.mod(azimuths + math.pi, TWO_PI) - math.pi
    powers = scene.path_gain_powers()
    gains = rng.normal(scale=np.sqrt(powers / 2.0), size=(2, scene.n_paths))
    delays = rng.uniform(0.0, scene.delay_spread_s, size=scene.n_paths)
    return [
        PathComponent(
            gain=complex(gains[0, l], gains[1, l]),
            azimuth_rad=float(azimuths[l]),
            elevation_rad=0.0,
            delay_s=float(delays[l]),
        )
        for l in range(scene.n_paths)
    ]


def generate_channel(
    scene: SceneFamily, geometry: ArrayGeometry, rng_seed: int
) -> ChannelSample:
    """Generate one channel sample; a pure function of (scene, geometry, seed)."""
    if scene.n_paths < 1:
        raise ValueError("scene must have at least one path")
    rng = np.random.default_rng(rng_seed)
    paths = sample_paths(scene, rng)
    h = channel_from_paths(paths, geometry, scene.pathloss_db, scene.carrier_hz)
    return ChannelSample(h=h, scene_id=scene.id, seed_index=int(rng_seed))


def estimate_channel(h: np.ndarray, pnr_db: float, rng_seed: int) -> np.ndarray:
    """Add circular complex Gaussian estimation noise at the given PNR.

    The per-element noise variance is referenced to the average per-element
    channel power: sigma_e^2 = (||h||^2 / N_t) * 10**(-pnr_db / 10), so the
    contract is independent of the array size. pnr_db = +inf means a
    noiseless estimate.
    """
    h = np.asarray(h, dtype=np.complex128)
    energy = float(np.sum(np.abs(h) ** 2))
    if energy == 0.0:
        raise ValueError("PNR is undefined for an all-zero channel")
    if math.isinf(pnr_db) and pnr_db > 0:
        return h.copy()
    n_t = h.shape[0]
    sigma_e2 = (energy / n_t) * 10.0 ** (-pnr_db / 10.0)
    rng = np.random.default_rng(rng_seed)
    noise = rng.normal(scale=math.sqrt(sigma_e2 / 2.0), size=(2, n_t))
    return h + noise[0] + 1j * noise[1]


def default_scene_families() -> dict[str, SceneFamily]:
    """The two stock families used by the cross-dataset experiments.

    Identical power statistics, disjoint dominant-angle supports
    (azimuth sectors [-0.3, 0.3] and [0.7, 1.3] rad). The path loss puts
    the mean per-element channel power near 1 for the default 64-element
    array (N_t * sum_l E|alpha_l|^2 / rho ~= 1).
    """
    common = dict(
        n_paths=5,
        azimuth_spread_rad=0.3,
        gain_decay_db_per_path=3.0,
        pathloss_db=21.0,
        delay_spread_s=100e-9,
        carrier_hz=60e9,
    )
    return {
        "family_A": SceneFamily(id="family_A", azimuth_center_rad=0.0, **common),
        "family_B": SceneFamily(id="family_B", azimuth_center_rad=1.0, **common),
    }
