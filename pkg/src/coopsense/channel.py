"""Post-demodulation echo synthesis at the passive base station.

The PBS observes, per subcarrier ``n`` and OFDM symbol ``m``, an
``N_Rx x N_Tx`` virtual-array snapshot: transmit antennas carry separable
signatures, so the return of Tx element ``k`` at Rx element ``J`` is
``b * exp(j2pi m T (f + xi_f)) * exp(-j2pi n df (tau + xi_tau)) * a_rx[J] a_tx[k] d[m, n]``.
Summing over ``k`` gives the single-vector received signal in which the
transmit array only contributes the scalar array factor (see
:meth:`EchoCube.superposed`).

Phase indices start at ``m = n = 0``. RNG streams: TBS ``i`` draws from
``SeedSequence(seed).spawn(I)[i]``, first its QPSK symbols, then NLoS-path
noise, then LoS-path noise.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from .scene import Scene

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]

_QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2)


def steering_vector(angle: float, n_elements: int, element_spacing: float,
                    wavelength: float) -> np.ndarray:
    """ULA steering vector with entries exp(j J 2pi (d/lambda) sin(angle)), J = 1..N.

    ``angle`` is measured from the array broadside.
    """
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    psi = 2 * np.pi * element_spacing / wavelength * np.sin(angle)
    return np.exp(1j * psi * np.arange(1, n_elements + 1))


def steering_matrix(angles, n_elements: int, element_spacing: float,
                    wavelength: float) -> np.ndarray:
    """Columns are steering vectors for each angle in ``angles``."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    psi = 2 * np.pi * element_spacing / wavelength * np.sin(angles)
    return np.exp(1j * np.outer(np.arange(1, n_elements + 1), psi))


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_tx_symbols(ofdm, rng_seed: SeedLike = None) -> np.ndarray:
    """I.i.d. uniform QPSK symbols, shape (n_symbols, n_subcarriers)."""
    rng = _rng(rng_seed)
    idx = rng.integers(0, 4, size=(ofdm.n_symbols, ofdm.n_subcarriers))
    return _QPSK[idx]


@dataclass
class EchoCube:
    """Noise-free path returns plus per-path noise for one TBS.

    ``los``/``nlos`` and the noise arrays have shape
    (n_rx, n_tx, n_subcarriers, n_symbols); ``tx_symbols`` is
    (n_symbols, n_subcarriers).
    """

    los: np.ndarray
    nlos: np.ndarray
    tx_symbols: np.ndarray
    tbs_index: int = 0
    noise_nlos: Optional[np.ndarray] = None
    noise_los: Optional[np.ndarray] = None
    noise_var: float = 0.0

    @property
    def shape(self):
        return self.nlos.shape

    @property
    def nlos_rx(self) -> np.ndarray:
        return self.nlos if self.noise_nlos is None else self.nlos + self.noise_nlos

    @property
    def los_rx(self) -> np.ndarray:
        return self.los if self.noise_los is None else self.los + self.noise_los

    @property
    def combined(self) -> np.ndarray:
        out = self.los + self.nlos
        if self.noise_nlos is not None:
            out += self.noise_nlos
        return out

    def superposed(self, which: str = "combined") -> np.ndarray:
        """Tx-summed receive vectors, shape (n_rx, n_subcarriers, n_symbols)."""
        return getattr(self, which).sum(axis=1)


def _path_phase(ofdm, tau, doppler, xi_tau, xi_f) -> np.ndarray:
    n = np.arange(ofdm.n_subcarriers)[:, None]
    m = np.arange(ofdm.n_symbols)[None, :]
    T, df = ofdm.symbol_duration, ofdm.subcarrier_spacing
    return (np.exp(2j * np.pi * m * T * (doppler + xi_f[None, :]))
            * np.exp(-2j * np.pi * n * df * (tau + xi_tau[None, :])))


def _noise(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    z = rng.standard_normal(tuple(shape) + (2,)).view(np.complex128)[..., 0]
    z *= np.sqrt(var / 2)
    return z


def synthesize_tbs_echo(scene: Scene, tbs_index: int, tx_symbols: np.ndarray,
                        rng: SeedLike = None) -> EchoCube:
    """Echo cube of TBS ``tbs_index`` as received at the PBS."""
    ofdm, arr, geo = scene.ofdm, scene.array, scene.geometry
    lam, dr = scene.wavelength, scene.element_spacing
    p = scene.path(tbs_index)
    bs_t, bs_p = geo.tbs_broadside[tbs_index], geo.pbs_broadside
    m = np.arange(ofdm.n_symbols)
    xi_tau = scene.offsets.time_offset_at(tbs_index, m)
    xi_f = scene.offsets.cfo_at(tbs_index, m)
    b_ns, b_s = scene.attenuations(tbs_index)
    data = tx_symbols.T  # (N_c, M)

    def cube(aoa, aod, gain, tau, fd):
        a_rx = steering_vector(aoa - bs_p, arr.n_rx_pbs, dr, lam)
        a_tx = steering_vector(aod - bs_t, arr.n_tx_per_tbs, dr, lam)
        grid = gain * _path_phase(ofdm, tau, fd, xi_tau, xi_f) * data
        return np.outer(a_rx, a_tx)[:, :, None, None] * grid[None, None, :, :]

    nlos = cube(p.aoa_nlos, p.aod_nlos, b_ns, p.tau_p_ns, scene.doppler(tbs_index))
    los = cube(p.los_aoa, p.los_aod, b_s, p.tau_i_s, 0.0)

    echo = EchoCube(los=los, nlos=nlos, tx_symbols=tx_symbols, tbs_index=tbs_index)
    if scene.noise.snr_db is not None:
        g = _rng(rng)
        var = scene.noise.noise_variance(float(np.mean(np.abs(nlos) ** 2)))
        echo.noise_var = var
        echo.noise_nlos = _noise(g, nlos.shape, var)
        echo.noise_los = _noise(g, los.shape, var)
    return echo


def tbs_generators(seed: SeedLike, n_tbs: int) -> List[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(c) for c in ss.spawn(n_tbs)]


def synthesize_tbs(scene: Scene, tbs_index: int, rng: np.random.Generator) -> EchoCube:
    """Draw symbols and noise for one TBS from its own stream."""
    symbols = generate_tx_symbols(scene.ofdm, rng)
    return synthesize_tbs_echo(scene, tbs_index, symbols, rng)


def synthesize_scene(scene: Scene, seed: SeedLike = None) -> List[EchoCube]:
    """One echo cube per TBS, with independent symbol and noise streams."""
    if seed is None:
        seed = scene.noise.rng_seed
    gens = tbs_generators(seed, scene.n_tbs)
    return [synthesize_tbs(scene, i, gens[i]) for i in range(scene.n_tbs)]


# ---------------------------------------------------------------------------
# binary dump: one text header line, then little-endian float64 re/im pairs

_MAGIC = "COOPSENSE-CUBE v1"


def dump_cube(path, array: np.ndarray, scene: Optional[Scene] = None) -> None:
    from .config import scene_hash

    arr = np.ascontiguousarray(array, dtype="<c16")
    shape = ",".join(str(s) for s in arr.shape)
    digest = scene_hash(scene) if scene is not None else "none"
    header = f"{_MAGIC} shape={shape} scene={digest}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def load_cube(path):
    """Returns (array, scene_hash)."""
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    fields = raw[:nl].decode("ascii").split()
    if " ".join(fields[:2]) != _MAGIC:
        raise ValueError(f"{path}: not a cube dump")
    meta = dict(f.split("=", 1) for f in fields[2:])
    shape = tuple(int(s) for s in meta["shape"].split(",")) if meta["shape"] else ()
    arr = np.frombuffer(raw[nl + 1:], dtype="<c16").reshape(shape)
    return arr.astype(np.complex128), meta["scene"]


def array_digest(array: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(array, dtype="<c16").tobytes()).hexdigest()[:16]
