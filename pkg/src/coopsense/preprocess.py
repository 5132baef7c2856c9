"""Delay-Doppler matrices, offset cancellation and feature-vector compression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import steering_vector
from .scene import Scene, to_array_angle


@dataclass
class DelayDopplerMatrix:
    """Per-TBS matrix indexed [subcarrier n, symbol m]."""

    matrix: np.ndarray
    kind: str  # "nlos", "los" or "corrected"
    tbs_index: int = 0

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class FeatureVectors:
    range_fv: np.ndarray  # length N_c - 1
    velocity_fv: np.ndarray  # length M - 1
    tbs_index: int = 0


def _beam_accumulate(observation, aoa, aod, spacing, wavelength):
    n_r, n_t = observation.shape[:2]
    w_r = steering_vector(aoa, n_r, spacing, wavelength).conj() / n_r
    w_t = steering_vector(aod, n_t, spacing, wavelength).conj() / n_t
    w = np.outer(w_r, w_t).ravel()
    return (w @ observation.reshape(n_r * n_t, -1)).reshape(observation.shape[2:])


def compensate_accumulate_nlos(observation: np.ndarray, tx_symbols: np.ndarray,
                               aoa: float, aod: float, element_spacing: float,
                               wavelength: float, tbs_index: int = 0) -> DelayDopplerMatrix:
    """Beam towards the estimated array angles, average, strip the data symbols."""
    acc = _beam_accumulate(observation, aoa, aod, element_spacing, wavelength)
    return DelayDopplerMatrix(acc / tx_symbols.T, "nlos", tbs_index)


def compensate_accumulate_los(observation: np.ndarray, tx_symbols: np.ndarray,
                              scene: Scene, tbs_index: int) -> DelayDopplerMatrix:
    """Same as the NLoS path but with the known LoS angles, plus removal of the known LoS delay."""
    geo, p = scene.geometry, scene.path(tbs_index)
    aoa = to_array_angle(p.los_aoa, geo.pbs_broadside)
    aod = to_array_angle(p.los_aod, geo.tbs_broadside[tbs_index])
    acc = _beam_accumulate(observation, aoa, aod, scene.element_spacing, scene.wavelength)
    n = np.arange(observation.shape[2])[:, None]
    acc = acc / tx_symbols.T * np.exp(2j * np.pi * n * scene.ofdm.subcarrier_spacing * p.tau_i_s)
    return DelayDopplerMatrix(acc, "los", tbs_index)


def accumulation_factor(true_angle: float, est_angle: float, n_elements: int,
                        element_spacing: float, wavelength: float) -> complex:
    """Gain (1/N) a(est)^H a(true) left after beamforming with a mismatched angle."""
    a = steering_vector(true_angle, n_elements, element_spacing, wavelength)
    b = steering_vector(est_angle, n_elements, element_spacing, wavelength)
    return complex(np.vdot(b, a) / n_elements)


def nlcc(nlos: DelayDopplerMatrix, los: DelayDopplerMatrix) -> DelayDopplerMatrix:
    """Cancel TO/CFO by multiplying with the conjugate LoS matrix."""
    if nlos.shape != los.shape:
        raise ValueError(f"shape mismatch {nlos.shape} vs {los.shape}")
    if nlos.tbs_index != los.tbs_index:
        raise ValueError("NLoS and LoS matrices belong to different TBSs")
    return DelayDopplerMatrix(nlos.matrix * los.matrix.conj(), "corrected", nlos.tbs_index)


def compress_range(d: DelayDopplerMatrix) -> np.ndarray:
    """f[n'-1] = mean_m D[n', m] conj(D[0, m]), n' = 1..N_c-1."""
    mat = d.matrix
    return (mat[1:, :] * mat[0:1, :].conj()).mean(axis=1)


def compress_velocity(d: DelayDopplerMatrix) -> np.ndarray:
    """e[m'-1] = mean_n D[n, m'] conj(D[n, 0]), m' = 1..M-1."""
    mat = d.matrix
    return (mat[:, 1:] * mat[:, 0:1].conj()).mean(axis=0)


def feature_vectors(d: DelayDopplerMatrix) -> FeatureVectors:
    return FeatureVectors(compress_range(d), compress_velocity(d), d.tbs_index)


def write_feature_vector_csv(path, vec: np.ndarray, index_name: str = "index") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"{index_name},re,im\n")
        for k, z in enumerate(vec, start=1):
            fh.write(f"{k},{float(z.real)!r},{float(z.imag)!r}\n")
