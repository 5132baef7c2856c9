import math

import numpy as np
import pytest

from coopsense.analysis import (bin_interval, complexity_report, format_report,
                                measure_fusion_gain, snr_gain_report, write_report_csv)
from coopsense.scene import OfdmConfig, TABLE_PBS_POSITION, TABLE_TBS_POSITIONS

from test_fusion import clean_range_fv, clean_velocity_fv, global_angles

FULL_OFDM = OfdmConfig()


def test_snr_gain_formula_examples():
    assert snr_gain_report(FULL_OFDM, 3).g_position == 1533
    assert snr_gain_report(FULL_OFDM, 1).g_velocity == 255
    with pytest.raises(ValueError):
        snr_gain_report(FULL_OFDM, 0)


def brute_counts(n_rx, n_tx, snapshots, aoa_iv, aod_iv, step):
    """Recount by enumerating grid points one at a time."""
    def count(lo, hi):
        return sum(1 for k in range(-1000, 1001) if lo - 1e-9 <= k * step <= hi + 1e-9)
    mn = n_rx * n_tx
    shared = snapshots * mn * mn + mn ** 3
    cell = mn * mn - 1
    rough = n_rx * n_tx * (n_rx ** 2 + n_tx ** 2)
    g = count(-math.pi / 2, math.pi / 2)
    prop = rough + shared + count(*aoa_iv) * count(*aod_iv) * cell
    base = shared + g * g * cell
    return prop, base, g


@pytest.mark.parametrize("n_rx,n_tx,mu_r,mu_t", [(64, 64, 0, 0), (16, 16, 3, -2), (64, 16, 10, 1)])
def test_complexity_matches_enumeration(n_rx, n_tx, mu_r, mu_t):
    iv_r, iv_t = bin_interval(mu_r, n_rx), bin_interval(mu_t, n_tx)
    rep = complexity_report(n_rx, n_tx, FULL_OFDM, 0.01, iv_r, iv_t)
    prop, base, g = brute_counts(n_rx, n_tx, 512 * 256, iv_r, iv_t, 0.01)
    assert (rep.proposed_total, rep.baseline_total, rep.gamma_aoa) == (prop, base, g)
    assert g == 315
    assert rep.proposed_total < rep.baseline_total
    assert rep.ratio == base / prop
    mn = n_rx * n_tx
    shared = rep.snapshots * mn * mn + mn ** 3
    assert (rep.baseline_total - shared) / (rep.fine_ops - shared) == pytest.approx(rep.search_ratio)
    assert rep.nominal_gamma_aoa == pytest.approx(314.159, abs=1e-3)


def test_complexity_degenerate_array():
    rep = complexity_report(1, 1, FULL_OFDM, 0.01, (-0.1, 0.1), (-0.1, 0.1))
    constants = rep.snapshots + 1
    assert rep.fine_ops == rep.baseline_total == constants
    assert rep.proposed_total == constants + 2
    with pytest.raises(ValueError):
        complexity_report(0, 4, FULL_OFDM, 0.01, (0, 0), (0, 0))
    with pytest.raises(ValueError):
        complexity_report(4, 4, FULL_OFDM, 0.0, (0, 0), (0, 0))


def test_bin_interval_edges():
    assert bin_interval(0, 64) == pytest.approx((-math.asin(1 / 32), math.asin(1 / 32)))
    assert bin_interval(-32, 64)[0] == pytest.approx(-math.pi / 2)


@pytest.mark.parametrize("n_tbs", [1, 3])
def test_measured_gain_small(n_tbs):
    ofdm = OfdmConfig(n_subcarriers=32, n_symbols=16)
    target = (40.0, 40.0)
    tbs = TABLE_TBS_POSITIONS[:n_tbs]
    angles = [global_angles(target, t) for t in tbs]
    gp, gv = measure_fusion_gain(
        [clean_range_fv(target, t, ofdm) for t in tbs],
        [clean_velocity_fv(27.0, 0.785, target, t, ofdm) for t in tbs],
        tbs, TABLE_PBS_POSITION, [a for a, _ in angles], [d for _, d in angles],
        target, (27.0, 0.785), ofdm, 400, np.random.default_rng(0))
    assert abs(10 * math.log10(gp / (31 * n_tbs))) < 1.0
    assert abs(10 * math.log10(gv / (15 * n_tbs))) < 1.0


def test_report_emitters(tmp_path):
    rep = complexity_report(4, 4, FULL_OFDM, 0.05, bin_interval(0, 4), bin_interval(1, 4))
    txt = format_report(rep)
    assert "proposed_total" in txt and "ratio" in txt
    write_report_csv(tmp_path / "c.csv", [rep])
    head, row = (tmp_path / "c.csv").read_text().splitlines()
    assert head.split(",")[0] == "n_rx" and row.split(",")[0] == "4"
    with pytest.raises(ValueError):
        write_report_csv(tmp_path / "e.csv", [])
