"""Slow-time echo model for a frequency-agile pulse radar.

Each pulse hops its carrier to f_c + d_n * B where d_n in [0, 1) is the
(random) frequency code of pulse n.  After stretch processing, a point
scatterer contributes one sample per pulse:

    y[n] = gamma * exp(1j * (p * M * d_n + q * n * zeta_n))

with p the range phase, q the Doppler phase, M the number of range bins
resolved inside one coarse bin, and zeta_n an optional per-pulse Doppler
scaling that accounts for the carrier hop (``BandwidthMode.EXACT``) or is
frozen to 1 (``BandwidthMode.APPROXIMATE``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as _SPEED_OF_LIGHT

from .errors import ConfigurationError, DomainError, ShapeError

TWO_PI = 2.0 * math.pi


class BandwidthMode(enum.Enum):
    """How the per-pulse Doppler scaling zeta_n is treated."""

    EXACT = "exact"  # zeta_n = 1 + d_n * B / f_c
    APPROXIMATE = "approximate"  # zeta_n = 1


@dataclass(frozen=True)
class RadarParams:
    """Static description of one coherent processing interval.

    Only the pulse count and range-bin count are required; carrier,
    bandwidth and timing are optional and only needed when converting to
    physical units or when running in ``BandwidthMode.EXACT``.
    """

    n_pulses: int  # N, pulses per CPI
    n_hrr_bins: int  # M, fine range bins per coarse bin
    n_codes: int | None = None  # M*, size of the hop set (defaults to M)
    carrier_hz: float | None = None  # f_c
    bandwidth_hz: float | None = None  # B, synthetic bandwidth
    pri_s: float | None = None  # T_r, pulse repetition interval
    pulse_width_s: float | None = None  # T_p
    mode: BandwidthMode = BandwidthMode.APPROXIMATE

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ConfigurationError(f"n_pulses must be >= 1, got {self.n_pulses}")
        if self.n_hrr_bins < 1:
            raise ConfigurationError(f"n_hrr_bins must be >= 1, got {self.n_hrr_bins}")
        if self.n_codes is None:
            object.__setattr__(self, "n_codes", self.n_hrr_bins)
        if self.n_codes < self.n_hrr_bins:
            raise ConfigurationError(
                f"n_codes={self.n_codes} must be >= n_hrr_bins={self.n_hrr_bins} "
                "(coarser hop sets alias range bins)"
            )
        if self.carrier_hz is not None and not self.carrier_hz > 0:
            raise ConfigurationError(f"carrier_hz must be > 0, got {self.carrier_hz}")
        # bandwidth_hz == 0.0 is tolerated as the degenerate "no relative
        # bandwidth" setting used by dimensionless studies; physical
        # configurations (with pulse timing) need a real bandwidth.
        if self.bandwidth_hz is not None and self.bandwidth_hz < 0:
            raise ConfigurationError(f"bandwidth_hz must be >= 0, got {self.bandwidth_hz}")
        if self.pulse_width_s is not None:
            if not self.pulse_width_s > 0:
                raise ConfigurationError("pulse_width_s must be > 0")
            if not self.bandwidth_hz:
                raise ConfigurationError("pulse_width_s given without a positive bandwidth_hz")
            expected = math.ceil(self.pulse_width_s * self.bandwidth_hz)
            if expected != self.n_hrr_bins:
                raise ConfigurationError(
                    f"n_hrr_bins={self.n_hrr_bins} inconsistent with "
                    f"ceil(pulse_width_s * bandwidth_hz)={expected}"
                )
        if self.pri_s is not None:
            if not self.pri_s > 0:
                raise ConfigurationError("pri_s must be > 0")
            if self.pulse_width_s is not None and not self.pri_s > self.pulse_width_s:
                raise ConfigurationError("pri_s must exceed pulse_width_s")
        if self.mode is BandwidthMode.EXACT:
            if self.carrier_hz is None or self.bandwidth_hz is None:
                raise ConfigurationError(
                    "BandwidthMode.EXACT needs carrier_hz and bandwidth_hz to form B/f_c"
                )

    @classmethod
    def abstract(cls, n_pulses, n_hrr_bins, n_codes=None, relative_bandwidth=0.0, mode=None):
        """Dimensionless setup for numerical studies.

        ``relative_bandwidth`` is B/f_c; the carrier is pinned to 1 Hz so the
        stored bandwidth doubles as the ratio.  With a positive ratio the
        default mode is EXACT, otherwise APPROXIMATE.
        """
        if relative_bandwidth < 0:
            raise ConfigurationError("relative_bandwidth must be >= 0")
        if mode is None:
            mode = BandwidthMode.EXACT if relative_bandwidth > 0 else BandwidthMode.APPROXIMATE
        return cls(
            n_pulses=n_pulses,
            n_hrr_bins=n_hrr_bins,
            n_codes=n_codes,
            carrier_hz=1.0,
            bandwidth_hz=float(relative_bandwidth),
            mode=mode,
        )

    @property
    def n_columns(self) -> int:
        """Number of range-Doppler grid cells, N * M."""
        return self.n_pulses * self.n_hrr_bins

    @property
    def relative_bandwidth(self) -> float:
        """B/f_c, or 0.0 when carrier or bandwidth are unset."""
        if self.carrier_hz is None or self.bandwidth_hz is None:
            return 0.0
        return self.bandwidth_hz / self.carrier_hz

    @property
    def hrr_bin_size_m(self) -> float:
        """Fine range resolution c / (2B)."""
        if not self.bandwidth_hz:
            raise ConfigurationError("hrr_bin_size_m needs a positive bandwidth_hz")
        return _SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)

    @property
    def unambiguous_velocity_mps(self) -> float:
        """One-sided unambiguous velocity span c / (2 f_c T_r)."""
        if not self.carrier_hz or not self.pri_s:
            raise ConfigurationError("unambiguous_velocity_mps needs carrier_hz and pri_s")
        return _SPEED_OF_LIGHT / (2.0 * self.carrier_hz * self.pri_s)


@dataclass(frozen=True, eq=False)
class FrequencyCodes:
    """One realization d_0..d_{N-1} of the per-pulse frequency codes.

    ``n_codes`` is the size of the discrete hop set the codes were drawn
    from, or None for continuous (uniform on [0, 1)) codes.
    """

    codes: np.ndarray
    n_codes: int | None = None

    def __post_init__(self):
        arr = np.asarray(self.codes, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ShapeError(f"codes must be a 1-D non-empty array, got shape {arr.shape}")
        if np.any(arr < 0.0) or np.any(arr >= 1.0):
            raise DomainError("codes must lie in [0, 1)")
        if self.n_codes is not None:
            if self.n_codes < 1:
                raise ConfigurationError(f"n_codes must be >= 1, got {self.n_codes}")
            scaled = arr * self.n_codes
            if np.max(np.abs(scaled - np.round(scaled))) > 1e-9:
                raise DomainError(
                    f"discrete codes must be integer multiples of 1/{self.n_codes}"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "codes", arr)

    @property
    def n_pulses(self) -> int:
        return self.codes.size

    @property
    def is_discrete(self) -> bool:
        return self.n_codes is not None


def sample_codes(seed, n_pulses, n_codes=None) -> FrequencyCodes:
    """Draw one code realization.

    Parameters
    ----------
    seed : int, np.random.Generator, or anything default_rng accepts.
    n_pulses : number of codes to draw.
    n_codes : size of the discrete hop set {0, 1/M*, ..., (M*-1)/M*};
        None draws continuous codes uniform on [0, 1).
    """
    if n_pulses < 1:
        raise ConfigurationError(f"n_pulses must be >= 1, got {n_pulses}")
    rng = np.random.default_rng(seed)
    if n_codes is None:
        codes = rng.random(n_pulses)
    else:
        if n_codes < 1:
            raise ConfigurationError(f"n_codes must be >= 1, got {n_codes}")
        codes = rng.integers(0, n_codes, size=n_pulses) / n_codes
    return FrequencyCodes(codes=codes, n_codes=n_codes)


def zeta(code, bandwidth_hz, carrier_hz, mode=BandwidthMode.EXACT):
    """Per-pulse Doppler scaling 1 + d_n * B / f_c (EXACT) or 1 (APPROXIMATE).

    Accepts a scalar code or an array of codes.
    """
    code = np.asarray(code, dtype=np.float64)
    if np.any(code < 0.0) or np.any(code >= 1.0):
        raise DomainError("codes must lie in [0, 1)")
    if mode is BandwidthMode.APPROXIMATE:
        out = np.ones_like(code)
    else:
        if not carrier_hz or carrier_hz <= 0:
            raise ConfigurationError("zeta in EXACT mode needs carrier_hz > 0")
        if bandwidth_hz < 0:
            raise ConfigurationError("bandwidth_hz must be >= 0")
        out = 1.0 + code * (bandwidth_hz / carrier_hz)
    return out if out.ndim else float(out)


def pulse_doppler_scalings(params: RadarParams, codes: FrequencyCodes) -> np.ndarray:
    """zeta_n for every pulse of a code realization, shape (N,)."""
    if codes.n_pulses != params.n_pulses:
        raise ShapeError(
            f"codes has {codes.n_pulses} pulses, params expects {params.n_pulses}"
        )
    if params.mode is BandwidthMode.APPROXIMATE:
        return np.ones(params.n_pulses)
    return zeta(codes.codes, params.bandwidth_hz, params.carrier_hz, params.mode)


@dataclass(frozen=True)
class Scatterer:
    """One point scatterer in phase coordinates.

    ``p`` and ``q`` are the range and Doppler phases in [0, 2*pi); ``grid``
    optionally records the integer grid cell (m, n) with p = 2*pi*m/M and
    q = 2*pi*n/N.
    """

    amplitude: complex
    p: float
    q: float
    grid: tuple[int, int] | None = None

    def __post_init__(self):
        for name, val in (("p", self.p), ("q", self.q)):
            if not 0.0 <= val < TWO_PI:
                raise DomainError(f"{name}={val} outside [0, 2*pi)")
        if self.grid is not None:
            m, n = self.grid
            if m < 0 or n < 0:
                raise DomainError(f"grid indices must be non-negative, got {self.grid}")

    @classmethod
    def on_grid(cls, m, n, params: RadarParams, amplitude=1.0 + 0.0j) -> "Scatterer":
        """Scatterer sitting exactly on grid cell (m, n)."""
        if not 0 <= m < params.n_hrr_bins:
            raise DomainError(f"m={m} outside [0, {params.n_hrr_bins})")
        if not 0 <= n < params.n_pulses:
            raise DomainError(f"n={n} outside [0, {params.n_pulses})")
        return cls(
            amplitude=complex(amplitude),
            p=TWO_PI * m / params.n_hrr_bins,
            q=TWO_PI * n / params.n_pulses,
            grid=(int(m), int(n)),
        )


@dataclass(frozen=True)
class Scene:
    """A collection of scatterers with pairwise-distinct (p, q)."""

    scatterers: tuple[Scatterer, ...]

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        seen = set()
        for s in self.scatterers:
            key = (s.p, s.q)
            if key in seen:
                raise ConfigurationError(f"duplicate scatterer at (p, q)={key}")
            seen.add(key)

    @property
    def sparsity(self) -> int:
        return len(self.scatterers)


def flat_grid_index(hrr_idx, doppler_idx, n_pulses) -> int:
    """Column index of grid cell (m, n) in the vectorized scene: n + m * N."""
    if not 0 <= doppler_idx < n_pulses:
        raise DomainError(f"doppler_idx={doppler_idx} outside [0, {n_pulses})")
    if hrr_idx < 0:
        raise DomainError(f"hrr_idx must be >= 0, got {hrr_idx}")
    return int(doppler_idx) + int(hrr_idx) * int(n_pulses)


def scene_to_vector(scene: Scene, params: RadarParams) -> np.ndarray:
    """Vectorize an on-grid scene into the length-N*M coefficient vector.

    Every scatterer must sit on the (m, n) grid; scatterers constructed via
    ``Scatterer.on_grid`` carry their indices, otherwise the indices are
    recovered from (p, q) and validated.
    """
    M, N = params.n_hrr_bins, params.n_pulses
    x = np.zeros(N * M, dtype=np.complex128)
    for s in scene.scatterers:
        if s.grid is not None:
            m, n = s.grid
            if abs(s.p - TWO_PI * m / M) > 1e-12 or abs(s.q - TWO_PI * n / N) > 1e-12:
                raise DomainError(
                    f"scatterer grid {s.grid} inconsistent with (p, q)=({s.p}, {s.q})"
                )
        else:
            m = s.p * M / TWO_PI
            n = s.q * N / TWO_PI
            if abs(m - round(m)) > 1e-9 or abs(n - round(n)) > 1e-9:
                raise DomainError(f"scatterer at (p, q)=({s.p}, {s.q}) is off-grid")
            m, n = int(round(m)), int(round(n))
        if not 0 <= m < M:
            raise DomainError(f"grid index m={m} outside [0, {M})")
        x[flat_grid_index(m, n, N)] += s.amplitude
    return x


def synthesize_echoes(params: RadarParams, codes: FrequencyCodes, scene: Scene) -> np.ndarray:
    """Noise-free slow-time samples of a scene, shape (N,) complex.

    Superposition over scatterers of
    ``amplitude * exp(1j * (p * M * d_n + q * n * zeta_n))``.
    """
    zetas = pulse_doppler_scalings(params, codes)
    n_idx = np.arange(params.n_pulses)
    y = np.zeros(params.n_pulses, dtype=np.complex128)
    for s in scene.scatterers:
        phase = s.p * params.n_hrr_bins * codes.codes + s.q * n_idx * zetas
        y += s.amplitude * np.exp(1j * phase)
    return y


def add_noise(y, sigma2, seed) -> np.ndarray:
    """Add circular complex white Gaussian noise of total variance sigma2.

    Real and imaginary parts each get variance sigma2 / 2, so
    E|noise|^2 = sigma2.  ``seed`` may be an int or a Generator.
    """
    if sigma2 < 0:
        raise ConfigurationError(f"sigma2 must be >= 0, got {sigma2}")
    y = np.asarray(y, dtype=np.complex128)
    if sigma2 == 0:
        return y.copy()
    rng = np.random.default_rng(seed)
    scale = math.sqrt(sigma2 / 2.0)
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    return y + scale * noise


def _require_physical(params: RadarParams, need_pri: bool):
    if not params.carrier_hz:
        raise ConfigurationError("physical conversion needs carrier_hz")
    if not params.bandwidth_hz:
        raise ConfigurationError("physical conversion needs a positive bandwidth_hz")
    if need_pri and not params.pri_s:
        raise ConfigurationError("physical conversion needs pri_s")


def to_physical(p, q, amplitude, params: RadarParams):
    """Map phase coordinates to (range_m, velocity_mps, intensity).

    range = -M c p / (4 pi B), velocity = -c q / (4 pi f_c T_r),
    intensity = |amplitude|.  The phases are taken as-is (no wrapping), so
    the map is the exact inverse of ``from_physical``.
    """
    _require_physical(params, need_pri=True)
    rng_m = -params.n_hrr_bins * _SPEED_OF_LIGHT * p / (4.0 * math.pi * params.bandwidth_hz)
    vel = -_SPEED_OF_LIGHT * q / (4.0 * math.pi * params.carrier_hz * params.pri_s)
    return rng_m, vel, abs(amplitude)


def from_physical(range_m, velocity_mps, params: RadarParams):
    """Map (range, velocity) to raw phase coordinates (p, q).

    p = -4 pi B range / (M c), q = -4 pi f_c velocity T_r / c.  The result is
    not wrapped into [0, 2*pi); wrap with ``p % (2*pi)`` before building a
    ``Scatterer`` if needed.
    """
    _require_physical(params, need_pri=True)
    p = -4.0 * math.pi * params.bandwidth_hz * range_m / (params.n_hrr_bins * _SPEED_OF_LIGHT)
    q = -4.0 * math.pi * params.carrier_hz * velocity_mps * params.pri_s / _SPEED_OF_LIGHT
    return p, q
