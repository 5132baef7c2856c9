"""Joint AoA/AoD estimation: 2D-FFT rough search followed by restricted MUSIC.

Angles here are array-relative (measured from each ULA's broadside) and lie
in [-pi/2, pi/2]. Search grids are taken from a global lattice ``k * step`` so
that a restricted grid is always a subset of the full grid with the same
step, which makes argmax comparisons between the two searches exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .channel import steering_matrix

_LATTICE_TOL = 1e-9


class AliasingError(ValueError):
    """Rough FFT peak maps outside the visible region (|sin| > 1)."""


def all_antenna_matrix(observation: np.ndarray, tx: np.ndarray,
                       rho: Optional[float] = None) -> np.ndarray:
    """Regularized least-squares channel estimate from one subcarrier/symbol snapshot.

    Two observation forms are accepted:

    * a receive vector ``y`` (N_R,) with transmit vector ``x`` (N_T,): returns
      ``y x^H / (x^H x + rho)``, the rank-one solution of
      ``min ||y - H x||^2 + rho ||H||_F^2``;
    * a virtual-array snapshot ``Y`` (N_R, N_T) where column ``k`` carries
      ``H[:, k] x[k]``: the data matrix is ``diag(x)`` and the solution is
      ``Y[:, k] conj(x[k]) / (|x[k]|^2 + rho)``.

    ``rho`` defaults to ``1e-3 * ||x||^2``.
    """
    obs = np.asarray(observation)
    x = np.asarray(tx, dtype=complex)
    if rho is None:
        rho = 1e-3 * float(np.vdot(x, x).real)
    if rho < 0:
        raise ValueError("rho must be >= 0")
    if obs.ndim == 1:
        den = float(np.vdot(x, x).real) + rho
        if den == 0:
            raise ValueError("zero transmit vector with rho = 0")
        return np.outer(obs, x.conj()) / den
    if obs.ndim != 2 or obs.shape[1] != x.size:
        raise ValueError("observation must be (N_R,) or (N_R, N_T) matching tx")
    den = np.abs(x) ** 2 + rho
    if np.any(den == 0):
        raise ValueError("zero transmit entry with rho = 0")
    return obs * (x.conj() / den)[None, :]


def all_antenna_cube(observation: np.ndarray, tx_symbols: np.ndarray,
                     rho_scale: float = 1e-3) -> np.ndarray:
    """All-antenna matrices for every (subcarrier, symbol).

    ``observation`` is (N_R, N_T, N_c, M); every Tx element sends the symbol
    ``d[m, n]`` so ``x = d * 1`` and ``rho = rho_scale * N_T |d|^2``.
    """
    n_tx = observation.shape[1]
    d = tx_symbols.T  # (N_c, M)
    p = np.abs(d) ** 2
    w = d.conj() / (p + rho_scale * n_tx * p)
    return observation * w[None, None, :, :]


# ---------------------------------------------------------------------------
# rough stage

@dataclass(frozen=True)
class RoughEstimate:
    mu_aoa: int
    mu_aod: int
    aoa: float
    aod: float
    aoa_interval: Tuple[float, float]
    aod_interval: Tuple[float, float]
    clamped: bool = False


def _signed_bin(idx: int, n: int) -> int:
    return idx - n if idx >= n - n // 2 else idx


def _bin_to_angle(mu: int, n: int, ratio: float) -> float:
    s = mu / (ratio * n)
    if abs(s) > 1 + 1e-12:
        raise AliasingError(f"FFT bin {mu} of {n} maps to sin = {s:.4f}")
    return math.asin(max(-1.0, min(1.0, s)))


def _bin_interval(mu: int, n: int, ratio: float):
    lo = (mu - 1) / (ratio * n)
    hi = (mu + 1) / (ratio * n)
    clamped = lo < -1 or hi > 1
    return (math.asin(min(1.0, max(-1.0, lo))), math.asin(max(-1.0, min(1.0, hi)))), clamped


def rough_estimate(snapshot: np.ndarray, element_spacing: float,
                   wavelength: float) -> RoughEstimate:
    """Rough AoA/AoD from the 2D-FFT peak of one all-antenna matrix.

    The peak bin is read as a signed spatial frequency ``mu`` and mapped via
    ``sin = lambda * mu / (d * N)``. The fine-search interval spans one bin
    either side, clamped to the visible region.
    """
    n_r, n_t = snapshot.shape
    spec = np.abs(np.fft.fft2(snapshot))
    ir, it = np.unravel_index(int(np.argmax(spec)), spec.shape)
    ratio = element_spacing / wavelength
    mu_r, mu_t = _signed_bin(int(ir), n_r), _signed_bin(int(it), n_t)
    aoa, aod = _bin_to_angle(mu_r, n_r, ratio), _bin_to_angle(mu_t, n_t, ratio)
    aoa_iv, c1 = _bin_interval(mu_r, n_r, ratio)
    aod_iv, c2 = _bin_interval(mu_t, n_t, ratio)
    return RoughEstimate(mu_r, mu_t, aoa, aod, aoa_iv, aod_iv, c1 or c2)


# ---------------------------------------------------------------------------
# grids and MUSIC

def angle_lattice(lo: float, hi: float, step: float) -> np.ndarray:
    """Points ``k * step`` inside [lo, hi] (inclusive, with a tiny tolerance)."""
    if not step > 0:
        raise ValueError("step must be positive")
    k0 = math.ceil(lo / step - _LATTICE_TOL)
    k1 = math.floor(hi / step + _LATTICE_TOL)
    return np.arange(k0, k1 + 1) * step


def full_angle_grid(step: float) -> np.ndarray:
    return angle_lattice(-math.pi / 2, math.pi / 2, step)


def snapshot_matrix(cube: np.ndarray) -> np.ndarray:
    """(N_R, N_T, N_c, M) -> (N_R N_T, N_c M), row index J * N_T + k."""
    n_r, n_t = cube.shape[:2]
    return cube.reshape(n_r * n_t, -1)


def noise_subspace(snapshots: np.ndarray, n_sources: int = 1) -> np.ndarray:
    """Noise-subspace basis of the sample covariance (ascending-eigenvalue order)."""
    n = snapshots.shape[0]
    if not 1 <= n_sources < n:
        raise ValueError("need 1 <= n_sources < number of virtual elements")
    cov = snapshots @ snapshots.conj().T / snapshots.shape[1]
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, : n - n_sources]


def music_spectrum(en: np.ndarray, aoa_grid: np.ndarray, aod_grid: np.ndarray,
                   n_rx: int, n_tx: int, element_spacing: float,
                   wavelength: float, chunk_cols: int = 4096) -> np.ndarray:
    """Pseudo-spectrum 1 / ||E_n^H (a_r kron a_t)||^2 on the (aoa, aod) grid."""
    a_t = steering_matrix(aod_grid, n_tx, element_spacing, wavelength)
    a_r = steering_matrix(aoa_grid, n_rx, element_spacing, wavelength)
    n_t = len(aod_grid)
    out = np.empty((len(aoa_grid), n_t))
    rows = max(1, chunk_cols // max(n_t, 1))
    en_h = en.conj().T
    for s in range(0, len(aoa_grid), rows):
        ar = a_r[:, s:s + rows]
        steer = (ar.T[:, :, None, None] * a_t[None, None, :, :])  # (g, N_R, N_T, n_t)
        steer = steer.transpose(1, 2, 0, 3).reshape(n_rx * n_tx, -1)
        proj = en_h @ steer
        den = np.einsum("ij,ij->j", proj.conj(), proj).real
        out[s:s + ar.shape[1]] = (1.0 / den).reshape(ar.shape[1], n_t)
    return out


@dataclass
class AngleEstimate:
    aoa: float
    aod: float
    spectrum_evals: int
    peak_index: Tuple[int, int]
    aoa_grid: np.ndarray
    aod_grid: np.ndarray
    rough: Optional[RoughEstimate] = None
    spectrum: Optional[np.ndarray] = field(default=None, repr=False)


def _search(en, aoa_grid, aod_grid, n_rx, n_tx, spacing, wavelength, rough, keep):
    if aoa_grid.size == 0 or aod_grid.size == 0:
        raise ValueError("empty angle search grid")
    spec = music_spectrum(en, aoa_grid, aod_grid, n_rx, n_tx, spacing, wavelength)
    i, j = np.unravel_index(int(np.argmax(spec)), spec.shape)
    return AngleEstimate(float(aoa_grid[i]), float(aod_grid[j]), int(spec.size),
                         (int(i), int(j)), aoa_grid, aod_grid, rough,
                         spec if keep else None)


def estimate_angles(observation: np.ndarray, tx_symbols: np.ndarray,
                    element_spacing: float, wavelength: float, step: float = 0.01,
                    rho_scale: float = 1e-3, keep_spectrum: bool = False) -> AngleEstimate:
    """Rough-then-fine joint AoA/AoD estimate from a virtual-array NLoS cube.

    ``observation`` is (N_R, N_T, N_c, M). The rough stage uses the first
    subcarrier of the first symbol; MUSIC uses every snapshot but only scans
    the lattice points inside the rough intervals.
    """
    n_r, n_t = observation.shape[:2]
    h = all_antenna_cube(observation, tx_symbols, rho_scale)
    rough = rough_estimate(h[:, :, 0, 0], element_spacing, wavelength)
    aoa_grid = angle_lattice(*rough.aoa_interval, step)
    aod_grid = angle_lattice(*rough.aod_interval, step)
    en = noise_subspace(snapshot_matrix(h))
    return _search(en, aoa_grid, aod_grid, n_r, n_t, element_spacing, wavelength,
                   rough, keep_spectrum)


def full_grid_music(observation: np.ndarray, tx_symbols: np.ndarray,
                    element_spacing: float, wavelength: float, step: float = 0.01,
                    rho_scale: float = 1e-3, keep_spectrum: bool = False) -> AngleEstimate:
    """Baseline: MUSIC over the full [-pi/2, pi/2]^2 lattice."""
    n_r, n_t = observation.shape[:2]
    h = all_antenna_cube(observation, tx_symbols, rho_scale)
    grid = full_angle_grid(step)
    en = noise_subspace(snapshot_matrix(h))
    return _search(en, grid, grid, n_r, n_t, element_spacing, wavelength, None,
                   keep_spectrum)


def write_spectrum_csv(path, est: AngleEstimate) -> None:
    if est.spectrum is None:
        raise ValueError("estimate was computed without keep_spectrum=True")
    with open(path, "w", newline="") as fh:
        fh.write("aoa,aod,spectrum\n")
        spec = est.spectrum.tolist()
        for i, a in enumerate(est.aoa_grid.tolist()):
            for j, b in enumerate(est.aod_grid.tolist()):
                fh.write(f"{a!r},{b!r},{spec[i][j]!r}\n")
