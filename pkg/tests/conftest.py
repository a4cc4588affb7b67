from pathlib import Path

import numpy as np
import pytest

from downconv import constants as K
from downconv.fluxonium import FluxoniumParams, solve_fluxonium
from downconv.foster import LineSpec, synthesize
from downconv.quantize import GaugeConfig, build_matrices, bogoliubov_diagonalize

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
EJ, EC, EL = 8.12, 5.69, 1.42


def table_line(n=250):
    return LineSpec("open", 9695.0, n, length=6e-3, light_speed=2.18e6)


def short_line():
    return LineSpec("josephson", 9695.0, 6, length=3e-4, light_speed=2.18e6, plasma_freq=25e9)


def quantized(spec, i0, x):
    gauge = GaugeConfig(i0, x, K.el_to_inductance(EL), K.ec_to_cj(EC))
    return bogoliubov_diagonalize(build_matrices(synthesize(spec), gauge))


def fluxonium_for(qc, phi):
    return solve_fluxonium(FluxoniumParams(EJ, EC, qc.matrices.el_tilde, phi))


@pytest.fixture(scope="session")
def table_qc():
    return quantized(table_line(), 15, 0.5)


@pytest.fixture(scope="session")
def short_qc():
    return quantized(short_line(), 1, 0.2)


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    path = tmp_path / "cache"
    monkeypatch.setenv("DOWNCONV_CACHE_DIR", str(path))
    return path


def pytest_report_header(config):
    return f"numpy {np.__version__}"


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
