"""Scene configuration: waveform, arrays, geometry, synchronization offsets.

All angles live in one global frame, measured counterclockwise from +x.
A ULA's steering phase depends on the angle relative to its broadside, so
every base station carries a broadside direction (default +x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

Point = Tuple[float, float]


def _as_point(p) -> Point:
    x, y = (float(v) for v in p)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite coordinate {p!r}")
    return (x, y)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def direction(src: Point, dst: Point) -> float:
    """Global angle of the ray from ``src`` towards ``dst``."""
    return math.atan2(dst[1] - src[1], dst[0] - src[0])


def to_array_angle(global_angle: float, broadside: float) -> float:
    """Angle seen by a ULA with the given broadside, folded into [-pi/2, pi/2].

    A ULA only observes sin(angle - broadside); front and back are aliased.
    """
    return float(np.arcsin(np.clip(np.sin(global_angle - broadside), -1.0, 1.0)))


@dataclass(frozen=True)
class OfdmConfig:
    n_subcarriers: int = 512
    n_symbols: int = 256
    carrier_freq: float = 24e9
    subcarrier_spacing: float = 120e3
    cp_duration: float = 1.33e-6

    def __post_init__(self):
        if self.n_subcarriers < 2 or self.n_symbols < 2:
            raise ValueError("need at least 2 subcarriers and 2 OFDM symbols")
        if not self.subcarrier_spacing > 0:
            raise ValueError("subcarrier_spacing must be positive")
        if not self.carrier_freq > 0:
            raise ValueError("carrier_freq must be positive")
        if self.cp_duration < 0:
            raise ValueError("cp_duration must be non-negative")

    @property
    def symbol_duration(self) -> float:
        """Total OFDM symbol duration T (elementary duration plus CP)."""
        return 1.0 / self.subcarrier_spacing + self.cp_duration

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq


@dataclass(frozen=True)
class ArrayConfig:
    n_tx_per_tbs: int = 64
    n_rx_pbs: int = 64
    element_spacing: Optional[float] = None  # None -> half wavelength

    def __post_init__(self):
        if self.n_tx_per_tbs < 1 or self.n_rx_pbs < 1:
            raise ValueError("antenna counts must be >= 1")
        if self.element_spacing is not None and not self.element_spacing > 0:
            raise ValueError("element_spacing must be positive")

    def spacing(self, wavelength: float) -> float:
        return self.element_spacing if self.element_spacing is not None else wavelength / 2


@dataclass(frozen=True)
class Geometry:
    tbs_positions: Tuple[Point, ...]
    pbs_position: Point
    target_position: Point
    target_speed: float = 0.0
    target_heading: float = 0.0
    tbs_broadside: Optional[Tuple[float, ...]] = None  # None -> all +x
    pbs_broadside: float = 0.0

    def __post_init__(self):
        tbs = tuple(_as_point(p) for p in self.tbs_positions)
        object.__setattr__(self, "tbs_positions", tbs)
        object.__setattr__(self, "pbs_position", _as_point(self.pbs_position))
        object.__setattr__(self, "target_position", _as_point(self.target_position))
        if not tbs:
            raise ValueError("at least one TBS is required")
        if self.target_speed < 0:
            raise ValueError("target_speed must be >= 0")
        object.__setattr__(self, "target_heading", float(np.mod(self.target_heading, 2 * np.pi)))
        if self.tbs_broadside is None:
            object.__setattr__(self, "tbs_broadside", (0.0,) * len(tbs))
        else:
            bs = tuple(float(b) for b in self.tbs_broadside)
            if len(bs) < len(tbs):
                raise ValueError("one broadside angle per TBS is required")
            object.__setattr__(self, "tbs_broadside", bs[: len(tbs)])
        pbs, tar = self.pbs_position, self.target_position
        for i, p in enumerate(tbs):
            if math.dist(p, pbs) == 0:
                raise ValueError(f"TBS {i} coincides with the PBS")
            if math.dist(p, tar) == 0:
                raise ValueError(f"target coincides with TBS {i}")
        if math.dist(pbs, tar) == 0:
            raise ValueError("target coincides with the PBS")

    @property
    def n_tbs(self) -> int:
        return len(self.tbs_positions)

    def with_tbs_count(self, n: int) -> "Geometry":
        if not 1 <= n <= self.n_tbs:
            raise ValueError(f"tbs count must be in [1, {self.n_tbs}]")
        return replace(self, tbs_positions=self.tbs_positions[:n],
                       tbs_broadside=self.tbs_broadside[:n])

    def bounding_box(self) -> Tuple[float, float, float, float]:
        pts = np.array(self.tbs_positions + (self.pbs_position,))
        return (pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max())


@dataclass(frozen=True)
class SyncOffsets:
    """Per-TBS time offset (s) and CFO (Hz) as functions of the symbol index.

    In ``linear-drift`` mode ``xi(m) = xi0 + drift * m``; in ``constant`` mode
    the drift terms are ignored.
    """

    time_offset: Tuple[float, ...] = (0.0,)
    carrier_freq_offset: Tuple[float, ...] = (0.0,)
    time_offset_drift: Tuple[float, ...] = (0.0,)
    cfo_drift: Tuple[float, ...] = (0.0,)
    mode: str = "constant"

    def __post_init__(self):
        if self.mode not in ("constant", "linear-drift"):
            raise ValueError(f"unknown offset mode {self.mode!r}")
        for name in ("time_offset", "carrier_freq_offset", "time_offset_drift", "cfo_drift"):
            vals = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if vals.size == 0 or not np.all(np.isfinite(vals)):
                raise ValueError(f"{name} must be finite and non-empty")
            object.__setattr__(self, name, tuple(vals.tolist()))

    @staticmethod
    def _pick(vals: Tuple[float, ...], i: int) -> float:
        return vals[i] if i < len(vals) else vals[-1]

    def time_offset_at(self, i: int, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        base = self._pick(self.time_offset, i)
        if self.mode == "constant":
            return np.full(m.shape, base)
        return base + self._pick(self.time_offset_drift, i) * m

    def cfo_at(self, i: int, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        base = self._pick(self.carrier_freq_offset, i)
        if self.mode == "constant":
            return np.full(m.shape, base)
        return base + self._pick(self.cfo_drift, i) * m

    @classmethod
    def zero(cls) -> "SyncOffsets":
        return cls()


@dataclass(frozen=True)
class NoiseConfig:
    snr_db: Optional[float] = -5.0  # None disables noise
    rng_seed: int = 0

    def noise_variance(self, signal_power: float) -> float:
        if self.snr_db is None:
            return 0.0
        return signal_power / 10 ** (self.snr_db / 10)


@dataclass(frozen=True)
class ChannelParams:
    attenuation_mode: str = "normalized"
    reflecting_factor: Tuple[complex, ...] = (1.0,)

    def __post_init__(self):
        if self.attenuation_mode not in ("normalized", "physical"):
            raise ValueError(f"unknown attenuation mode {self.attenuation_mode!r}")
        object.__setattr__(self, "reflecting_factor",
                           tuple(complex(b) for b in np.atleast_1d(self.reflecting_factor)))


@dataclass(frozen=True)
class PathParameters:
    """Geometry of the NLoS (TBS -> target -> PBS) and LoS (TBS -> PBS) paths.

    ``aod_nlos``/``aoa_nlos`` are global directions from the TBS and from the
    PBS towards the target; ``los_aod``/``los_aoa`` point from the TBS to the
    PBS and from the PBS to the TBS.
    """

    r_i_ns: float
    r_p_ns: float
    r_i_s: float
    tau_p_ns: float
    tau_i_s: float
    aod_nlos: float
    aoa_nlos: float
    los_aod: float
    los_aoa: float


def derive_path_parameters(geometry: Geometry, tbs_index: int) -> PathParameters:
    tbs = geometry.tbs_positions[tbs_index]
    pbs, tar = geometry.pbs_position, geometry.target_position
    r_i_ns = math.dist(tbs, tar)
    r_p_ns = math.dist(pbs, tar)
    r_i_s = math.dist(tbs, pbs)
    if min(r_i_ns, r_p_ns, r_i_s) <= 0:
        raise ValueError("degenerate geometry: zero-length path")
    return PathParameters(
        r_i_ns=r_i_ns,
        r_p_ns=r_p_ns,
        r_i_s=r_i_s,
        tau_p_ns=(r_i_ns + r_p_ns) / SPEED_OF_LIGHT,
        tau_i_s=r_i_s / SPEED_OF_LIGHT,
        aod_nlos=direction(tbs, tar),
        aoa_nlos=direction(pbs, tar),
        los_aod=direction(tbs, pbs),
        los_aoa=direction(pbs, tbs),
    )


def doppler_quadratic_term(speed, heading, aod, aoa, carrier_freq):
    """Second-order term dropped by the first-order bistatic Doppler model."""
    return (np.asarray(speed) ** 2 * carrier_freq
            * np.cos(heading - aoa) * np.cos(heading - aod) / SPEED_OF_LIGHT ** 2)


def bistatic_doppler(speed, heading, aod, aoa, carrier_freq, exact=False):
    """Total Doppler shift (Hz) seen at the PBS for a TBS -> target -> PBS path.

    ``aod`` is the global direction from the TBS to the target and ``aoa``
    the global direction from the PBS to the target. Vectorized over
    ``speed``/``heading`` (and the angles).

    With ``exact=True`` the carrier shift on the first leg is propagated into
    the second leg's Doppler, adding the ``v**2`` term.
    """
    speed = np.asarray(speed, dtype=float)
    if np.any(speed < 0):
        raise ValueError("speed must be >= 0")
    f = -speed * carrier_freq / SPEED_OF_LIGHT * (np.cos(heading - aoa) + np.cos(heading - aod))
    if exact:
        f = f + doppler_quadratic_term(speed, heading, aod, aoa, carrier_freq)
    return float(f) if np.ndim(f) == 0 else f


@dataclass(frozen=True)
class Scene:
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    array: ArrayConfig = field(default_factory=ArrayConfig)
    geometry: Geometry = None  # type: ignore[assignment]
    offsets: SyncOffsets = field(default_factory=SyncOffsets)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    doppler_exact: bool = False

    def __post_init__(self):
        if self.geometry is None:
            raise ValueError("a Geometry is required")

    @property
    def wavelength(self) -> float:
        return self.ofdm.wavelength

    @property
    def element_spacing(self) -> float:
        return self.array.spacing(self.wavelength)

    @property
    def n_tbs(self) -> int:
        return self.geometry.n_tbs

    def path(self, tbs_index: int) -> PathParameters:
        return derive_path_parameters(self.geometry, tbs_index)

    def doppler(self, tbs_index: int) -> float:
        p = self.path(tbs_index)
        g = self.geometry
        return bistatic_doppler(g.target_speed, g.target_heading, p.aod_nlos, p.aoa_nlos,
                                self.ofdm.carrier_freq, exact=self.doppler_exact)

    def attenuations(self, tbs_index: int) -> Tuple[complex, float]:
        """(NLoS attenuation incl. reflecting factor, LoS attenuation)."""
        if self.channel.attenuation_mode == "normalized":
            return 1.0 + 0j, 1.0
        p = self.path(tbs_index)
        lam = self.wavelength
        refl = self.channel.reflecting_factor
        beta = refl[tbs_index] if tbs_index < len(refl) else refl[-1]
        b_ns = math.sqrt(lam ** 2 / ((4 * math.pi) ** 3 * p.r_i_ns ** 2 * p.r_p_ns ** 2)) * beta
        b_s = math.sqrt(lam ** 2 / ((4 * math.pi) ** 3 * p.r_i_s ** 4))
        return complex(b_ns), b_s

    def with_tbs_count(self, n: int) -> "Scene":
        return replace(self, geometry=self.geometry.with_tbs_count(n))

    def replace(self, **kw) -> "Scene":
        return replace(self, **kw)


def facing(src: Point, dst: Point) -> float:
    """Broadside angle for an array at ``src`` facing ``dst``."""
    return direction(src, dst)


# reference deployment; TBS order matters for I < 4
TABLE_TBS_POSITIONS: Tuple[Point, ...] = ((40.0, 0.0), (0.0, 40.0), (0.0, 80.0), (80.0, 0.0))
TABLE_PBS_POSITION: Point = (80.0, 80.0)
TABLE_TARGET_POSITION: Point = (40.0, 40.0)
DEPLOYMENT_CENTER: Point = (40.0, 40.0)


def table_geometry(n_tbs: int = 3, target: Sequence[float] = TABLE_TARGET_POSITION,
                   speed: float = 27.0, heading: float = 0.785) -> Geometry:
    """Reference geometry with every ULA facing the center of the deployment square."""
    tbs = TABLE_TBS_POSITIONS[:n_tbs]
    return Geometry(
        tbs_positions=tbs,
        pbs_position=TABLE_PBS_POSITION,
        target_position=tuple(target),
        target_speed=speed,
        target_heading=heading,
        tbs_broadside=tuple(facing(p, DEPLOYMENT_CENTER) for p in tbs),
        pbs_broadside=facing(TABLE_PBS_POSITION, DEPLOYMENT_CENTER),
    )
