"""Command-line entry point: simulate, sweep, angle-bench, report."""

from __future__ import annotations

import argparse
import math
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from . import analysis, config
from .channel import dump_cube, synthesize_scene
from .fusion import write_heatmap_csv
from .harness import (ExperimentSpec, angle_benchmark, point_scene, process_cubes,
                      run_sweep, trial_seed)
from .preprocess import write_feature_vector_csv


def _float_list(text: str) -> List[Optional[float]]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok.lower() in ("none", "off", "inf"):
            out.append(None)
            continue
        v = float(tok)
        if not math.isfinite(v):
            raise argparse.ArgumentTypeError(f"non-finite value {tok!r}")
        out.append(v)
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _int_list(text: str) -> List[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _finite(vals, name):
    if any(v is None for v in vals):
        raise argparse.ArgumentTypeError(f"--{name} values must be numbers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML scene/processing config")
    common.add_argument("--paper-scale", action="store_true",
                        help="use full reference sizes (512x256 OFDM, 64 antennas)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory")
    common.add_argument("--snr-db", type=_float_list, metavar="LIST",
                        help="comma list of per-element SNRs in dB ('none' = noise-free)")
    common.add_argument("--to-ns", type=_float_list, metavar="LIST", help="time offsets (ns)")
    common.add_argument("--cfo-frac", type=_float_list, metavar="LIST",
                        help="CFOs as fractions of the subcarrier spacing")
    common.add_argument("--tbs-count", type=_int_list, metavar="LIST", help="numbers of TBSs")
    common.add_argument("--no-nlcc", action="store_true", help="skip LoS cross-correlation")

    p = argparse.ArgumentParser(prog="coopsense",
                                description="Multi-BS cooperative passive sensing simulator")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="one trial; dump profiles")
    s.add_argument("--dump-cubes", action="store_true", help="write binary echo cubes")
    w = sub.add_parser("sweep", parents=[common], help="RMSE curves")
    w.add_argument("--both-nlcc", action="store_true", help="run with and without NLCC")
    w.add_argument("--no-offsets", action="store_true", help="zero TO/CFO")
    b = sub.add_parser("angle-bench", parents=[common], help="rough+fine vs full-grid MUSIC")
    b.add_argument("--step", type=float, default=0.01, help="angle grid step (rad)")
    b.add_argument("--n-rx", type=int, help="override PBS antenna count")
    b.add_argument("--n-tx", type=int, help="override TBS antenna count")
    r = sub.add_parser("report", parents=[common], help="complexity and SNR-gain tables")
    r.add_argument("--step", type=float, default=0.01, help="angle grid step (rad)")
    return p


def _raw_config(args) -> dict:
    raw = config.load_raw(args.config, args.paper_scale)
    if args.seed is not None:
        raw["experiment"]["seed"] = args.seed
    if args.trials is not None:
        raw["experiment"]["trials"] = args.trials
    return raw


def _first(lst, default):
    return lst[0] if lst else default


def _defaults(raw):
    off = raw["offsets"]
    return float(off["time_offset_ns"][0]), float(off["cfo_frac"][0])


def cmd_simulate(args, exp, raw, out: Path) -> None:
    base = exp.full_scene
    to0, cfo0 = _defaults(raw)
    snr = _first(args.snr_db, base.noise.snr_db)
    to = _first(args.to_ns, to0)
    cfo = _first(args.cfo_frac, cfo0)
    n = int(_first(args.tbs_count, exp.scene.n_tbs))
    scene = point_scene(base, snr, to, cfo, n)
    proc = replace(exp.processing, nlcc=not args.no_nlcc)
    cubes = synthesize_scene(scene, trial_seed(exp.seed, 0))
    res = process_cubes(scene, cubes, proc, keep=True)
    err = res.errors(scene)
    g = scene.geometry
    with open(out / "result.csv", "w", newline="") as fh:
        fh.write("x_est,y_est,speed_est,heading_est,x_true,y_true,speed_true,heading_true,"
                 "location_error,speed_error,heading_error\n")
        vals = res.position + (res.speed, res.heading) + g.target_position + (
            g.target_speed, g.target_heading) + err
        fh.write(",".join(repr(float(v)) for v in vals) + "\n")
    with open(out / "angles.csv", "w", newline="") as fh:
        fh.write("tbs,aoa,aod,rough_aoa,rough_aod,spectrum_evals\n")
        for c, a in zip(cubes, res.angles):
            vals = ",".join(repr(float(v)) for v in (a.aoa, a.aod, a.rough.aoa, a.rough.aod))
            fh.write(f"{c.tbs_index},{vals},"
                     f"{a.spectrum_evals}\n")
    for c, f in zip(cubes, res.features):
        write_feature_vector_csv(out / f"range_fv_tbs{c.tbs_index}.csv", f.range_fv, "n")
        write_feature_vector_csv(out / f"velocity_fv_tbs{c.tbs_index}.csv", f.velocity_fv, "m")
    if res.localization is not None:
        write_heatmap_csv(out / "position_profile.csv", res.localization.fused)
        for c, p in zip(cubes, res.localization.per_tbs):
            write_heatmap_csv(out / f"position_profile_tbs{c.tbs_index}.csv", p)
    if res.velocity is not None:
        write_heatmap_csv(out / "velocity_profile.csv", res.velocity.fused)
        if res.velocity.coarse is not None:
            write_heatmap_csv(out / "velocity_profile_coarse.csv", res.velocity.coarse)
    if args.dump_cubes:
        for c in cubes:
            dump_cube(out / f"nlos_tbs{c.tbs_index}.cube", c.nlos_rx, scene)
            dump_cube(out / f"los_tbs{c.tbs_index}.cube", c.los_rx, scene)
    print(f"position ({res.position[0]:.2f}, {res.position[1]:.2f}) m, "
          f"speed {res.speed:.2f} m/s, heading {res.heading:.3f} rad")


def cmd_sweep(args, exp, raw, out: Path) -> None:
    base = exp.scene
    to0, cfo0 = _defaults(raw)
    nlcc = (True, False) if args.both_nlcc else ((False,) if args.no_nlcc else (True,))
    spec = ExperimentSpec(
        base=exp,
        snr_db=tuple(args.snr_db or [base.noise.snr_db]),
        to_ns=tuple(_finite(args.to_ns, "to-ns") if args.to_ns else [to0]),
        cfo_frac=tuple(_finite(args.cfo_frac, "cfo-frac") if args.cfo_frac else
                       [cfo0]),
        tbs_count=tuple(args.tbs_count or [base.n_tbs]),
        nlcc=nlcc, offsets_enabled=not args.no_offsets,
        trials=exp.trials, seed=exp.seed, out_dir=str(out))

    def progress(r):
        print(f"I={r.tbs_count} nlcc={int(r.nlcc)} snr={r.snr_db} to={r.to_ns} cfo={r.cfo_frac}: "
              f"loc {r.rmse_location:.4f} m, speed {r.rmse_speed:.4f} m/s, "
              f"heading {r.rmse_heading:.4f} rad", flush=True)

    run_sweep(spec, progress)


def cmd_angle_bench(args, exp, raw, out: Path) -> None:
    scene = exp.scene
    arr = replace(scene.array, **{k: v for k, v in (("n_rx_pbs", args.n_rx),
                                                      ("n_tx_per_tbs", args.n_tx)) if v})
    snr = _first(args.snr_db, scene.noise.snr_db)
    scene = replace(scene, array=arr, noise=replace(scene.noise, snr_db=snr))
    trials = args.trials if args.trials is not None else 10
    rows, reps = angle_benchmark(scene, args.step, trials, exp.seed, out_dir=str(out))
    same = sum(r.identical for r in rows)
    tp = sum(r.time_proposed for r in rows)
    tf = sum(r.time_full for r in rows)
    print(f"identical argmax {same}/{len(rows)}; op ratio {reps[0].ratio:.2f}; "
          f"wall-clock ratio {tf / tp:.2f} ({tp / len(rows):.3f} s vs {tf / len(rows):.3f} s)")


def cmd_report(args, exp, raw, out: Path) -> None:
    scene = exp.scene
    arr, ofdm = scene.array, scene.ofdm
    ratio = scene.element_spacing / scene.wavelength
    rep = analysis.complexity_report(arr.n_rx_pbs, arr.n_tx_per_tbs, ofdm, args.step,
                                     analysis.bin_interval(0, arr.n_rx_pbs, ratio),
                                     analysis.bin_interval(0, arr.n_tx_per_tbs, ratio))
    counts = args.tbs_count or [scene.n_tbs]
    gains = [analysis.snr_gain_report(ofdm, n) for n in counts]
    text = "# angle search complexity (broadside rough bin)\n" + analysis.format_report(rep)
    for g in gains:
        text += "\n# fusion SNR gain\n" + analysis.format_report(g)
    (out / "report.txt").write_text(text)
    analysis.write_report_csv(out / "complexity.csv", [rep])
    analysis.write_report_csv(out / "snr_gain.csv", gains)
    print(text, end="")


_LIST_FLAGS = ("--snr-db", "--to-ns", "--cfo-frac")
_NEG_LIST = re.compile(r"^-(\d|\.\d|inf)", re.IGNORECASE)


def _join_negative_lists(argv: List[str]) -> List[str]:
    # argparse reads "-20,-10" as an option; glue it to its flag instead
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _LIST_FLAGS and i + 1 < len(argv) and _NEG_LIST.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_negative_lists(argv))
    try:
        raw = _raw_config(args)
        exp = config.build_experiment(raw)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        config.dump_raw(raw, out / "config_used.yaml")
        {"simulate": cmd_simulate, "sweep": cmd_sweep, "angle-bench": cmd_angle_bench,
         "report": cmd_report}[args.command](args, exp, raw, out)
    except Exception as exc:  # any module error -> diagnostic + nonzero exit
        print(f"coopsense {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
