import numpy as np
import pytest

from coopsense.scene import (ArrayConfig, NoiseConfig, OfdmConfig, Scene, SyncOffsets,
                             table_geometry)


def small_scene(snr_db=None, n_tbs=3, offsets=None, n_sub=32, n_sym=16, n_rx=8, n_tx=8,
                target=(40.0, 40.0), **geo_kw):
    return Scene(
        ofdm=OfdmConfig(n_subcarriers=n_sub, n_symbols=n_sym),
        array=ArrayConfig(n_tx_per_tbs=n_tx, n_rx_pbs=n_rx),
        geometry=table_geometry(n_tbs, target=target, **geo_kw),
        offsets=offsets if offsets is not None else SyncOffsets.zero(),
        noise=NoiseConfig(snr_db=snr_db),
    )


@pytest.fixture
def scene_factory():
    return small_scene


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


TINY_YAML = """
ofdm: {n_subcarriers: 32, n_symbols: 16}
array: {n_tx_per_tbs: 8, n_rx_pbs: 8}
processing:
  search: {coarse_position_step: 2.0, position_step: 0.05, speed_step: 0.5,
           heading_step: 0.01, coarse_speed_step: 2.0, coarse_heading_step: 0.05}
experiment: {trials: 2, seed: 11}
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY_YAML)
    return path


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
