"""Operation counts for the two angle searches and fusion SNR-gain calculators."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .angle_est import angle_lattice, full_angle_grid
from .fusion import fuse_profiles, position_profile, velocity_profile
from .scene import OfdmConfig


@dataclass(frozen=True)
class ComplexityReport:
    """Complex multiply-accumulate counts for rough+fine search and full-grid MUSIC.

    ``eps_*``/``gamma_*`` are the grid sizes actually searched (lattice point
    counts); ``nominal_*`` are the continuous values width/step and pi/step.
    """

    n_rx: int
    n_tx: int
    snapshots: int
    rough_ops: int
    fine_ops: int
    proposed_total: int
    baseline_total: int
    eps_aoa: int
    eps_aod: int
    gamma_aoa: int
    gamma_aod: int
    aoa_step: float
    aod_step: float
    nominal_eps_aoa: float
    nominal_eps_aod: float
    nominal_gamma_aoa: float
    nominal_gamma_aod: float

    @property
    def ratio(self) -> float:
        return self.baseline_total / self.proposed_total

    @property
    def search_ratio(self) -> float:
        return (self.gamma_aoa * self.gamma_aod) / (self.eps_aoa * self.eps_aod)


def _shared_costs(n_rx, n_tx, snapshots):
    mn = n_rx * n_tx
    return snapshots * mn ** 2 + mn ** 3, mn * mn - 1


def complexity_report(n_rx: int, n_tx: int, ofdm: OfdmConfig, step: float,
                      aoa_interval: Tuple[float, float],
                      aod_interval: Tuple[float, float]) -> ComplexityReport:
    """Evaluate the rough, fine and full-grid operation counts.

    The intervals are the rough-stage search intervals (array-relative
    radians); ``step`` is the common angle grid step for both searches.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if n_rx < 1 or n_tx < 1:
        raise ValueError("antenna counts must be >= 1")
    snapshots = ofdm.n_subcarriers * ofdm.n_symbols
    shared, per_cell = _shared_costs(n_rx, n_tx, snapshots)
    eps_r = len(angle_lattice(*aoa_interval, step))
    eps_t = len(angle_lattice(*aod_interval, step))
    gamma = len(full_angle_grid(step))
    rough = n_rx * n_tx * (n_rx ** 2 + n_tx ** 2)
    fine = shared + eps_r * eps_t * per_cell
    baseline = shared + gamma * gamma * per_cell
    return ComplexityReport(
        n_rx=n_rx, n_tx=n_tx, snapshots=snapshots,
        rough_ops=rough, fine_ops=fine, proposed_total=rough + fine,
        baseline_total=baseline, eps_aoa=eps_r, eps_aod=eps_t,
        gamma_aoa=gamma, gamma_aod=gamma, aoa_step=step, aod_step=step,
        nominal_eps_aoa=(aoa_interval[1] - aoa_interval[0]) / step,
        nominal_eps_aod=(aod_interval[1] - aod_interval[0]) / step,
        nominal_gamma_aoa=math.pi / step, nominal_gamma_aod=math.pi / step,
    )


def bin_interval(mu: int, n: int, spacing_ratio: float = 0.5) -> Tuple[float, float]:
    """Search interval one FFT bin either side of signed bin ``mu``."""
    lo = max(-1.0, (mu - 1) / (spacing_ratio * n))
    hi = min(1.0, (mu + 1) / (spacing_ratio * n))
    return (math.asin(lo), math.asin(hi))


# ---------------------------------------------------------------------------
# fusion SNR gain

@dataclass(frozen=True)
class SnrGainReport:
    n_tbs: int
    g_position: int
    g_velocity: int
    measured_g_position: Optional[float] = None
    measured_g_velocity: Optional[float] = None

    @staticmethod
    def db(x: float) -> float:
        return 10 * math.log10(x)


def snr_gain_report(ofdm: OfdmConfig, n_tbs: int, measured_position: Optional[float] = None,
                    measured_velocity: Optional[float] = None) -> SnrGainReport:
    if n_tbs < 1:
        raise ValueError("need at least one TBS")
    return SnrGainReport(n_tbs, (ofdm.n_subcarriers - 1) * n_tbs,
                         (ofdm.n_symbols - 1) * n_tbs, measured_position, measured_velocity)


def measure_fusion_gain(clean_range_fvs: Sequence[np.ndarray],
                        clean_velocity_fvs: Sequence[np.ndarray],
                        tbs_positions, pbs_position, aoas: Sequence[float],
                        aods: Sequence[float], target_position, target_velocity,
                        ofdm: OfdmConfig, trials: int, rng: np.random.Generator,
                        input_snr_db: float = 0.0) -> Tuple[float, float]:
    """Monte Carlo fused-peak SNR gain over the per-element feature-vector SNR.

    I.i.d. circular Gaussian noise at ``input_snr_db`` (relative to the mean
    per-element power of the clean feature vectors) is added to every
    feature-vector element. The output SNR is |mean fused value|^2 over the
    variance of the fused value at the true cell; returns the linear ratios
    (position, velocity) of output SNR to input SNR.
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    pos_cell = np.asarray([target_position], dtype=float)
    vel_cell = np.asarray([target_velocity], dtype=float)

    def gain(clean, evaluate):
        power = np.mean([np.mean(np.abs(v) ** 2) for v in clean])
        var = power / 10 ** (input_snr_db / 10)
        samples = np.empty(trials, dtype=complex)
        for t in range(trials):
            noisy = [v + np.sqrt(var / 2) * (rng.standard_normal(v.shape)
                                             + 1j * rng.standard_normal(v.shape)) for v in clean]
            samples[t] = evaluate(noisy)
        signal = abs(evaluate(list(clean))) ** 2
        out_snr = signal / np.var(samples)
        return out_snr / (power / var)

    def pos_eval(fvs):
        profs = [position_profile(f, pos_cell, t, pbs_position, ofdm)
                 for f, t in zip(fvs, tbs_positions)]
        return fuse_profiles(profs).values[0]

    def vel_eval(fvs):
        profs = [velocity_profile(e, vel_cell, a, d, ofdm) for e, a, d in zip(fvs, aoas, aods)]
        return fuse_profiles(profs).values[0]

    return gain(clean_range_fvs, pos_eval), gain(clean_velocity_fvs, vel_eval)


# ---------------------------------------------------------------------------
# emitters

def format_report(report) -> str:
    width = max(len(k) for k in asdict(report))
    lines = [f"{k.ljust(width)}  {v}" for k, v in asdict(report).items()]
    if isinstance(report, ComplexityReport):
        lines.append(f"{'ratio'.ljust(width)}  {float(report.ratio)!r}")
    return "\n".join(lines) + "\n"


def write_report_csv(path, reports: Sequence) -> None:
    if not reports:
        raise ValueError("nothing to write")
    keys = list(asdict(reports[0]))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(keys) + "\n")
        for r in reports:
            fh.write(",".join("" if v is None else repr(v.item() if isinstance(v, np.generic) else v)
                               for v in asdict(r).values()) + "\n")
