"""Monte Carlo orchestration: single trials, RMSE sweeps and the angle benchmark.

Seeding: trial ``t`` of an experiment with master seed ``s`` uses
``SeedSequence([s, t])`` regardless of the sweep point, so every sweep point
and curve sees the same symbols and unit-variance noise draws (common random
numbers); only the scaling and offsets change between points.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis import ComplexityReport, complexity_report
from .angle_est import AngleEstimate, estimate_angles, full_grid_music
from .channel import EchoCube, synthesize_scene, synthesize_tbs, tbs_generators
from .config import ExperimentConfig, ProcessingConfig
from .fusion import (LocalizationResult, VelocityResult, estimate_velocity, localize,
                     localize_single_tbs, resolve_global_angle)
from .preprocess import (DelayDopplerMatrix, FeatureVectors, compensate_accumulate_los,
                         compensate_accumulate_nlos, feature_vectors, nlcc)
from .scene import NoiseConfig, Scene, SyncOffsets, wrap_angle


def trial_seed(master: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), int(trial)])


@dataclass
class TrialResult:
    position: Tuple[float, float]
    speed: float
    heading: float
    angles: List[AngleEstimate]
    features: List[FeatureVectors]
    localization: Optional[LocalizationResult] = None
    velocity: Optional[VelocityResult] = None
    matrices: Optional[List[DelayDopplerMatrix]] = None

    def errors(self, scene: Scene) -> Tuple[float, float, float]:
        """(location error m, speed error m/s, heading error rad)."""
        g = scene.geometry
        loc = math.dist(self.position, g.target_position)
        return (loc, self.speed - g.target_speed, wrap_angle(self.heading - g.target_heading))


def process_cubes(scene: Scene, cubes: Sequence[EchoCube],
                  processing: ProcessingConfig = ProcessingConfig(),
                  keep: bool = False) -> TrialResult:
    """Angle estimation, offset cancellation, compression and fusion."""
    geo = scene.geometry
    lam, dr = scene.wavelength, scene.element_spacing
    angles, feats, mats = [], [], []
    for cube in cubes:
        i = cube.tbs_index
        est = estimate_angles(cube.nlos_rx, cube.tx_symbols, dr, lam,
                              processing.music_step, processing.rho_scale)
        d_ns = compensate_accumulate_nlos(cube.nlos_rx, cube.tx_symbols, est.aoa, est.aod,
                                          dr, lam, i)
        if processing.nlcc:
            d = nlcc(d_ns, compensate_accumulate_los(cube.los_rx, cube.tx_symbols, scene, i))
        else:
            d = d_ns
        angles.append(est)
        feats.append(feature_vectors(d))
        mats.append(d)

    search = processing.search
    if len(cubes) == 1:
        i = cubes[0].tbs_index
        pos = localize_single_tbs(feats[0].range_fv, angles[0].aoa, geo.pbs_broadside,
                                  geo.tbs_positions[i], geo.pbs_position, scene.ofdm,
                                  search.scope, search.position_step)
        return TrialResult(pos, math.nan, math.nan, angles, feats, None, None,
                           mats if keep else None)

    tbs = [geo.tbs_positions[c.tbs_index] for c in cubes]
    loc = localize([f.range_fv for f in feats], tbs, geo.pbs_position, scene.ofdm, search)
    aoas = [resolve_global_angle(a.aoa, geo.pbs_broadside, geo.pbs_position, loc.position)
            for a in angles]
    aods = [resolve_global_angle(a.aod, geo.tbs_broadside[c.tbs_index], t, loc.position)
            for a, c, t in zip(angles, cubes, tbs)]
    vel = estimate_velocity([f.velocity_fv for f in feats], aoas, aods, scene.ofdm, search)
    return TrialResult(loc.position, vel.speed, vel.heading, angles, feats,
                       loc if keep else None, vel if keep else None, mats if keep else None)


def run_trial(scene: Scene, seed, processing: ProcessingConfig = ProcessingConfig(),
              keep: bool = False) -> TrialResult:
    """Synthesize one realization and run the full processing chain."""
    try:
        return process_cubes(scene, synthesize_scene(scene, seed), processing, keep)
    except Exception as exc:
        raise RuntimeError(f"trial failed (seed={seed!r}): {exc}") from exc


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class ExperimentSpec:
    base: ExperimentConfig
    snr_db: Tuple[Optional[float], ...] = (-5.0,)
    to_ns: Tuple[float, ...] = (30.0,)
    cfo_frac: Tuple[float, ...] = (0.03,)
    tbs_count: Tuple[int, ...] = (3,)
    nlcc: Tuple[bool, ...] = (True,)
    offsets_enabled: bool = True
    trials: int = 100
    seed: int = 0
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for v in self.to_ns + self.cfo_frac + tuple(s for s in self.snr_db if s is not None):
            if not math.isfinite(v):
                raise ValueError("sweep values must be finite")
        if any(n < 1 for n in self.tbs_count):
            raise ValueError("tbs_count values must be >= 1")


@dataclass(frozen=True)
class RmseRecord:
    snr_db: Optional[float]
    to_ns: float
    cfo_frac: float
    tbs_count: int
    nlcc: bool
    trials: int
    rmse_location: float
    rmse_speed: float
    rmse_heading: float
    rmse_velocity_avg: float
    ci_location: float
    ci_speed: float
    ci_heading: float


def rmse_with_ci(errors: Sequence[float], z: float = 1.96) -> Tuple[float, float]:
    """RMSE and a delta-method normal CI half-width."""
    e2 = np.square(np.asarray(errors, dtype=float))
    n = e2.size
    mse = math.fsum(e2) / n
    rmse = math.sqrt(mse)
    if n < 2 or rmse == 0 or not math.isfinite(rmse):
        return rmse, (0.0 if math.isfinite(rmse) else math.nan)
    sd = float(np.std(e2, ddof=1))
    return rmse, z * sd / math.sqrt(n) / (2 * rmse)


def point_scene(base: Scene, snr_db, to_ns: float, cfo_frac: float, tbs_count: int,
                offsets_enabled: bool = True) -> Scene:
    df = base.ofdm.subcarrier_spacing
    off = base.offsets
    if offsets_enabled:
        off = replace(off, time_offset=(to_ns * 1e-9,), carrier_freq_offset=(cfo_frac * df,))
    else:
        off = SyncOffsets.zero()
    return replace(base.with_tbs_count(tbs_count), offsets=off,
                   noise=NoiseConfig(snr_db, base.noise.rng_seed))


def _curve_name(tbs_count: int, use_nlcc: bool) -> str:
    return f"rmse_I{tbs_count}_{'nlcc' if use_nlcc else 'no_nlcc'}.csv"


RMSE_HEADER = ("snr_db,to_ns,cfo_frac,tbs_count,nlcc,trials,rmse_location,rmse_speed,"
               "rmse_heading,rmse_velocity_avg,ci_location,ci_speed,ci_heading")


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, np.generic):
        v = v.item()
    return repr(v)


def write_rmse_csv(path, records: Sequence[RmseRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(RMSE_HEADER + "\n")
        for r in records:
            fh.write(",".join(_fmt(getattr(r, k)) for k in RMSE_HEADER.split(",")) + "\n")


def run_point(scene: Scene, processing: ProcessingConfig, trials: int, seed: int,
              use_nlcc: bool, label: Dict) -> RmseRecord:
    proc = replace(processing, nlcc=use_nlcc)
    loc, spd, hdg = [], [], []
    for t in range(trials):
        res = run_trial(scene, trial_seed(seed, t), proc)
        e = res.errors(scene)
        loc.append(e[0])
        spd.append(e[1])
        hdg.append(e[2])
    rl, cl = rmse_with_ci(loc)
    rs, cs = rmse_with_ci(spd)
    rh, ch = rmse_with_ci(hdg)
    return RmseRecord(label["snr_db"], label["to_ns"], label["cfo_frac"], scene.n_tbs,
                      use_nlcc, trials, rl, rs, rh, (rs + rh) / 2, cl, cs, ch)


def run_sweep(spec: ExperimentSpec, progress=None) -> List[RmseRecord]:
    """Every combination of the sweep lists; one CSV per (TBS count, NLCC) curve."""
    out = Path(spec.out_dir) if spec.out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if not out.is_dir():
            raise OSError(f"cannot write to {out}")
    base = spec.base.full_scene
    records: List[RmseRecord] = []
    curves: Dict[Tuple[int, bool], List[RmseRecord]] = {}
    for n, use_nlcc in itertools.product(spec.tbs_count, spec.nlcc):
        for snr, to, cfo in itertools.product(spec.snr_db, spec.to_ns, spec.cfo_frac):
            scene = point_scene(base, snr, to, cfo, n, spec.offsets_enabled)
            rec = run_point(scene, spec.base.processing, spec.trials, spec.seed, use_nlcc,
                            {"snr_db": snr, "to_ns": to, "cfo_frac": cfo})
            records.append(rec)
            curves.setdefault((n, use_nlcc), []).append(rec)
            if progress is not None:
                progress(rec)
    if out is not None:
        for (n, use_nlcc), recs in curves.items():
            write_rmse_csv(out / _curve_name(n, use_nlcc), recs)
        write_rmse_csv(out / "summary.csv", records)
    return records


# ---------------------------------------------------------------------------
# angle estimator benchmark

@dataclass
class BenchRow:
    trial: int
    aoa_proposed: float
    aod_proposed: float
    aoa_full: float
    aod_full: float
    mu_aoa: int  # rough-stage FFT bins
    mu_aod: int
    identical: bool
    spectrum_evals_proposed: int
    spectrum_evals_full: int
    ops_proposed: int
    ops_full: int
    time_proposed: float = field(default=0.0, compare=False)
    time_full: float = field(default=0.0, compare=False)


BENCH_HEADER = ("trial,aoa_proposed,aod_proposed,aoa_full,aod_full,mu_aoa,mu_aod,identical,"
                "spectrum_evals_proposed,spectrum_evals_full,ops_proposed,ops_full")


def angle_benchmark(scene: Scene, step: float = 0.01, trials: int = 10, seed: int = 0,
                    jitter: float = 10.0, rho_scale: float = 1e-3,
                    out_dir: Optional[str] = None) -> Tuple[List[BenchRow], List[ComplexityReport]]:
    """Paired rough+fine vs full-grid MUSIC on the NLoS cube of TBS 0.

    The target is displaced uniformly within +-``jitter`` m per trial so the
    angles vary across trials. Deterministic fields go to
    ``angle_bench.csv``; wall-clock times go to ``angle_bench_timing.csv``.
    """
    rows, reports = [], []
    lam, dr = scene.wavelength, scene.element_spacing
    g0 = scene.geometry
    n_rx, n_tx = scene.array.n_rx_pbs, scene.array.n_tx_per_tbs
    for t in range(trials):
        rng = np.random.default_rng(trial_seed(seed, t))
        dx, dy = rng.uniform(-jitter, jitter, size=2)
        target = (g0.target_position[0] + dx, g0.target_position[1] + dy)
        sc = replace(scene, geometry=replace(g0, target_position=target))
        cube = synthesize_tbs(sc, 0, tbs_generators(trial_seed(seed, t), 1)[0])
        obs = cube.nlos_rx
        t0 = time.perf_counter()
        prop = estimate_angles(obs, cube.tx_symbols, dr, lam, step, rho_scale)
        t1 = time.perf_counter()
        full = full_grid_music(obs, cube.tx_symbols, dr, lam, step, rho_scale)
        t2 = time.perf_counter()
        rep = complexity_report(n_rx, n_tx, sc.ofdm, step, prop.rough.aoa_interval,
                                prop.rough.aod_interval)
        reports.append(rep)
        rows.append(BenchRow(t, prop.aoa, prop.aod, full.aoa, full.aod,
                             prop.rough.mu_aoa, prop.rough.mu_aod,
                             prop.aoa == full.aoa and prop.aod == full.aod,
                             prop.spectrum_evals, full.spectrum_evals,
                             rep.proposed_total, rep.baseline_total, t1 - t0, t2 - t1))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "angle_bench.csv", "w", newline="") as fh:
            fh.write(BENCH_HEADER + "\n")
            for r in rows:
                fh.write(",".join(_fmt(getattr(r, k)) for k in BENCH_HEADER.split(",")) + "\n")
        with open(out / "angle_bench_timing.csv", "w", newline="") as fh:
            fh.write("trial,time_proposed,time_full,ratio\n")
            for r in rows:
                fh.write(f"{r.trial},{r.time_proposed!r},{r.time_full!r},"
                         f"{r.time_full / r.time_proposed!r}\n")
    return rows, reports
