import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopsense.channel import synthesize_scene
from coopsense.preprocess import (DelayDopplerMatrix, accumulation_factor,
                                  compensate_accumulate_los, compensate_accumulate_nlos,
                                  compress_range, compress_velocity, feature_vectors, nlcc,
                                  write_feature_vector_csv)
from coopsense.scene import SyncOffsets, to_array_angle

from conftest import small_scene

LAM = 0.0125
D = LAM / 2


def true_array_angles(scene, i):
    p, g = scene.path(i), scene.geometry
    return (to_array_angle(p.aoa_nlos, g.pbs_broadside),
            to_array_angle(p.aod_nlos, g.tbs_broadside[i]))


def corrected(scene, cube, angles=None):
    i = cube.tbs_index
    aoa, aod = angles or true_array_angles(scene, i)
    ns = compensate_accumulate_nlos(cube.nlos_rx, cube.tx_symbols, aoa, aod,
                                    scene.element_spacing, scene.wavelength, i)
    s = compensate_accumulate_los(cube.los_rx, cube.tx_symbols, scene, i)
    return ns, s, nlcc(ns, s)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.4, 1.4), st.floats(-0.3, 0.3), st.integers(2, 40))
def test_accumulation_factor_geometric_series(true, delta, n):
    est = true + delta
    u = mpmath.mpf(0.5) * (mpmath.sin(true) - mpmath.sin(est))
    z = mpmath.exp(2j * mpmath.pi * u)
    oracle = sum(z ** k for k in range(1, n + 1)) / n
    got = accumulation_factor(true, est, n, D, LAM)
    assert abs(got - complex(oracle)) < 1e-12
    assert abs(accumulation_factor(true, true, n, D, LAM) - 1) < 1e-12


def test_zero_offset_phase_oracle():
    sc = small_scene(None)
    for cube in synthesize_scene(sc, 3):
        i = cube.tbs_index
        ns, s, c = corrected(sc, cube)
        b_ns, b_s = sc.attenuations(i)
        p = sc.path(i)
        n = np.arange(sc.ofdm.n_subcarriers)[:, None]
        m = np.arange(sc.ofdm.n_symbols)[None, :]
        t, df, fd = sc.ofdm.symbol_duration, sc.ofdm.subcarrier_spacing, sc.doppler(i)
        ramp = np.exp(2j * np.pi * m * t * fd) * np.exp(-2j * np.pi * n * df * p.tau_p_ns)
        np.testing.assert_allclose(ns.matrix, b_ns * ramp, atol=1e-12 * abs(b_ns))
        np.testing.assert_allclose(s.matrix, np.full(s.shape, b_s), atol=1e-12 * abs(b_s))
        np.testing.assert_allclose(c.matrix, b_ns * np.conj(b_s) * ramp, atol=1e-11 * abs(b_ns * b_s))


@pytest.mark.parametrize("mode", ["constant", "linear-drift"])
def test_nlcc_cancels_offsets(mode):
    df = 120e3
    off = SyncOffsets((60e-9, 25e-9, 41e-9), (0.06 * df, -0.02 * df, 0.11 * df),
                      (0.3e-9, -0.2e-9, 0.1e-9), (1e-3 * df, 2e-3 * df, -5e-4 * df), mode)
    with_off = small_scene(None, offsets=off)
    clean = small_scene(None)
    for a, b in zip(synthesize_scene(with_off, 5), synthesize_scene(clean, 5)):
        c1 = corrected(with_off, a)[2].matrix
        c0 = corrected(clean, b)[2].matrix
        assert np.max(np.abs(c1 - c0) / np.abs(c0)) <= 1e-10
        # the offsets really are present before cancellation
        assert np.max(np.abs(corrected(with_off, a)[0].matrix - corrected(clean, b)[0].matrix)) > 1e-3


def test_nlcc_rejects_mismatch():
    a = DelayDopplerMatrix(np.ones((4, 3)), "nlos", 0)
    with pytest.raises(ValueError):
        nlcc(a, DelayDopplerMatrix(np.ones((4, 2)), "los", 0))
    with pytest.raises(ValueError):
        nlcc(a, DelayDopplerMatrix(np.ones((4, 3)), "los", 1))


def test_compression_phases_and_moduli():
    n_c, m_s = 12, 9
    tau, fd, t, df = 3.1e-7, 2100.0, 8.33e-6 + 1.33e-6, 120e3
    amp = 0.7 * cmath.exp(0.4j)
    n = np.arange(n_c)[:, None]
    m = np.arange(m_s)[None, :]
    mat = amp * np.exp(2j * np.pi * m * t * fd) * np.exp(-2j * np.pi * n * df * tau)
    d = DelayDopplerMatrix(mat, "corrected")
    f, e = compress_range(d), compress_velocity(d)
    assert f.shape == (n_c - 1,) and e.shape == (m_s - 1,)
    for k in range(1, n_c):
        want = abs(amp) ** 2 * complex(mpmath.exp(-2j * mpmath.pi * k * df * tau))
        assert abs(f[k - 1] - want) < 1e-12
    for k in range(1, m_s):
        want = abs(amp) ** 2 * complex(mpmath.exp(2j * mpmath.pi * k * t * fd))
        assert abs(e[k - 1] - want) < 1e-12
    fv = feature_vectors(d)
    np.testing.assert_array_equal(fv.range_fv, f)


def test_compression_brute_force(rng):
    mat = rng.standard_normal((5, 4)) + 1j * rng.standard_normal((5, 4))
    d = DelayDopplerMatrix(mat, "corrected")
    f = [sum(mat[k, j] * mat[0, j].conjugate() for j in range(4)) / 4 for k in range(1, 5)]
    e = [sum(mat[j, k] * mat[j, 0].conjugate() for j in range(5)) / 5 for k in range(1, 4)]
    np.testing.assert_allclose(compress_range(d), f, atol=1e-14)
    np.testing.assert_allclose(compress_velocity(d), e, atol=1e-14)


def test_accumulation_snr_gain():
    # beamforming with exact angles keeps the echo and divides noise power by N_R N_T
    sc = small_scene(0.0, n_rx=8, n_tx=4, n_sub=64, n_sym=32)
    cube = synthesize_scene(sc, 9)[0]
    aoa, aod = true_array_angles(sc, 0)
    sig = compensate_accumulate_nlos(cube.nlos, cube.tx_symbols, aoa, aod, D, LAM).matrix
    noisy = compensate_accumulate_nlos(cube.nlos_rx, cube.tx_symbols, aoa, aod, D, LAM).matrix
    snr_in = np.mean(np.abs(cube.nlos) ** 2) / np.mean(np.abs(cube.noise_nlos) ** 2)
    snr_out = np.mean(np.abs(sig) ** 2) / np.mean(np.abs(noisy - sig) ** 2)
    gain_db = 10 * math.log10(snr_out / snr_in)
    assert abs(gain_db - 10 * math.log10(32)) < 1.0


def test_feature_csv(tmp_path):
    write_feature_vector_csv(tmp_path / "f.csv", np.array([1 + 2j, -0.5j]), "n")
    assert (tmp_path / "f.csv").read_text().splitlines() == ["n,re,im", "1,1.0,2.0", "2,-0.0,-0.5"]
