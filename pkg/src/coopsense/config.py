"""YAML experiment configuration.

Schema (all sections optional; missing keys take the defaults below)::

    ofdm:      n_subcarriers, n_symbols, carrier_freq [Hz], subcarrier_spacing [Hz], cp_duration [s]
    array:     n_tx_per_tbs, n_rx_pbs, element_spacing [m or null = lambda/2]
    geometry:  tbs_positions [[x, y], ...], pbs_position, target_position [m],
               target_speed [m/s], target_heading [rad],
               tbs_broadside [rad list or null], pbs_broadside [rad or null],
               face_point [x, y]  (arrays with null broadside face this point)
    offsets:   mode (constant | linear-drift), time_offset_ns [list],
               cfo_frac [list, units of subcarrier spacing],
               time_offset_drift_ns [ns/symbol], cfo_drift_frac [spacing/symbol]
    noise:     snr_db (null = noise-free), rng_seed
    channel:   attenuation_mode (normalized | physical), reflecting_factor
    doppler_exact: bool
    processing: music_step, rho_scale, nlcc, search: {SearchConfig fields}
    experiment: trials, seed, n_tbs

``n_tbs`` truncates ``tbs_positions`` (order matters).
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .fusion import SearchConfig
from .scene import (ArrayConfig, ChannelParams, Geometry, NoiseConfig, OfdmConfig, Scene,
                    SyncOffsets, facing)


@dataclass(frozen=True)
class ProcessingConfig:
    music_step: float = 0.01
    rho_scale: float = 1e-3
    nlcc: bool = True
    search: SearchConfig = field(default_factory=SearchConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    scene: Scene
    processing: ProcessingConfig = field(default_factory=ProcessingConfig)
    trials: int = 100
    seed: int = 0
    full_scene: Optional[Scene] = None  # every listed TBS, before n_tbs truncation

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.full_scene is None:
            object.__setattr__(self, "full_scene", self.scene)


DESK_OVERRIDES = {
    "ofdm": {"n_subcarriers": 128, "n_symbols": 64},
    "array": {"n_tx_per_tbs": 16, "n_rx_pbs": 16},
    "experiment": {"trials": 100},
}

PAPER_SCALE_OVERRIDES = {
    "ofdm": {"n_subcarriers": 512, "n_symbols": 256},
    "array": {"n_tx_per_tbs": 64, "n_rx_pbs": 64},
    "experiment": {"trials": 10000},
}


def _merge(base: Dict[str, Any], over: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def table_defaults() -> Dict[str, Any]:
    """Raw dict of the shipped reference-deployment defaults."""
    text = resources.files("coopsense").joinpath("table.yaml").read_text()
    return yaml.safe_load(text)


def _floats(v):
    if v is None:
        return None
    if isinstance(v, (list, tuple)):
        return [_floats(x) for x in v]
    return float(v)


def build_experiment(raw: Dict[str, Any]) -> ExperimentConfig:
    """Turn a fully merged config dict into typed objects."""
    o, a, g = raw["ofdm"], raw["array"], raw["geometry"]
    ofdm = OfdmConfig(int(o["n_subcarriers"]), int(o["n_symbols"]), float(o["carrier_freq"]),
                      float(o["subcarrier_spacing"]), float(o["cp_duration"]))
    array = ArrayConfig(int(a["n_tx_per_tbs"]), int(a["n_rx_pbs"]), _floats(a.get("element_spacing")))

    exp = raw.get("experiment", {})
    tbs = [tuple(_floats(p)) for p in g["tbs_positions"]]
    n_tbs = int(exp.get("n_tbs") or len(tbs))
    if not 1 <= n_tbs <= len(tbs):
        raise ValueError(f"n_tbs must be in [1, {len(tbs)}]")
    pbs = tuple(_floats(g["pbs_position"]))
    face = g.get("face_point")
    tbs_bs = g.get("tbs_broadside")
    if tbs_bs is None:
        tbs_bs = [facing(p, face) if face is not None else 0.0 for p in tbs]
    pbs_bs = g.get("pbs_broadside")
    if pbs_bs is None:
        pbs_bs = facing(pbs, face) if face is not None else 0.0
    geometry = Geometry(tuple(tbs), pbs, tuple(_floats(g["target_position"])),
                        float(g["target_speed"]), float(g["target_heading"]),
                        tuple(_floats(tbs_bs))[: len(tbs)], float(pbs_bs))

    off = raw["offsets"]
    df = ofdm.subcarrier_spacing
    offsets = SyncOffsets(
        time_offset=tuple(float(t) * 1e-9 for t in off["time_offset_ns"]),
        carrier_freq_offset=tuple(float(c) * df for c in off["cfo_frac"]),
        time_offset_drift=tuple(float(t) * 1e-9 for t in off["time_offset_drift_ns"]),
        cfo_drift=tuple(float(c) * df for c in off["cfo_drift_frac"]),
        mode=off["mode"],
    )
    nz = raw["noise"]
    noise = NoiseConfig(_floats(nz.get("snr_db")), int(nz.get("rng_seed", 0)))
    ch = raw["channel"]
    refl = ch.get("reflecting_factor", 1.0)
    refl = tuple(complex(r) for r in (refl if isinstance(refl, list) else [refl]))
    channel = ChannelParams(ch["attenuation_mode"], refl)
    full = Scene(ofdm, array, geometry, offsets, noise, channel, bool(raw.get("doppler_exact", False)))

    pr = raw.get("processing", {})
    search_kw = {}
    for f in dataclasses.fields(SearchConfig):
        if f.name in pr.get("search", {}):
            v = pr["search"][f.name]
            if f.name == "scope":
                v = None if v is None else tuple(_floats(v))
            elif isinstance(v, bool) or f.name == "max_recenter":
                v = v if isinstance(v, bool) else int(v)
            else:
                v = float(v)
            search_kw[f.name] = v
    proc = ProcessingConfig(float(pr.get("music_step", 0.01)), float(pr.get("rho_scale", 1e-3)),
                            bool(pr.get("nlcc", True)), SearchConfig(**search_kw))
    return ExperimentConfig(full.with_tbs_count(n_tbs), proc, int(exp.get("trials", 100)),
                            int(exp.get("seed", 0)), full)


def load_raw(path: Optional[str] = None, paper_scale: bool = False) -> Dict[str, Any]:
    """Merged config dict: shipped defaults, then desk or paper-scale sizes, then the file."""
    raw = _merge(table_defaults(), PAPER_SCALE_OVERRIDES if paper_scale else DESK_OVERRIDES)
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        raw = _merge(raw, user)
        if paper_scale:
            raw = _merge(raw, {k: v for k, v in PAPER_SCALE_OVERRIDES.items() if k != "experiment"})
    return raw


def load_experiment(path: Optional[str] = None, paper_scale: bool = False) -> ExperimentConfig:
    return build_experiment(load_raw(path, paper_scale))


def dump_raw(raw: Dict[str, Any], path) -> None:
    Path(path).write_text(yaml.safe_dump(raw, sort_keys=False))


def scene_to_dict(scene: Scene) -> Dict[str, Any]:
    def conv(v):
        if isinstance(v, complex):
            return [v.real, v.imag]
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        return v

    return conv(dataclasses.asdict(scene))


def scene_hash(scene: Scene) -> str:
    blob = json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
