import numpy as np
import pytest
from conftest import H

from dispersive_meshless.diagnostics import (
    ChargeField,
    charge_density,
    concentration_ratio,
    relative_error,
    spectrum,
    spurious_mode_scan,
)
from dispersive_meshless.errors import ShapeMismatch, TooShort
from dispersive_meshless.solver import FieldState

DT = 1e-13
T = 2e-9


def _tone(*freqs, amps=None):
    t = np.arange(int(T / DT)) * DT
    amps = amps or [1.0] * len(freqs)
    return sum(a * np.sin(2 * np.pi * f * t + 0.3) for a, f in zip(amps, freqs))


def test_single_tone():
    s = spectrum(_tone(150e9), DT)
    assert s.bin_width == pytest.approx(1 / (4 * T), rel=1e-9)
    assert abs(s.dominant().frequency - 150e9) <= s.bin_width / 2
    assert spurious_mode_scan(s, 10e9, 60e9, -30) == []


def test_two_tones():
    s = spectrum(_tone(150e9, 166.7e9), DT, floor_db=-20)
    found = sorted(p.frequency for p in s.peaks)
    assert len(found) == 2
    assert found == pytest.approx([150e9, 166.7e9], abs=s.bin_width / 2)


@pytest.mark.parametrize("frac", [0.13, 0.37, 0.5])
def test_refinement_off_bin(frac):
    s0 = spectrum(_tone(150e9), DT)
    f = 150e9 + frac * s0.bin_width
    s = spectrum(_tone(f), DT)
    assert abs(s.dominant().frequency - f) < s.bin_width / 10


def test_amplitude_invariance():
    a = spectrum(_tone(120e9), DT)
    b = spectrum(5.0 * _tone(120e9), DT)
    assert np.allclose(b.magnitude, 5.0 * a.magnitude, rtol=1e-12)
    assert b.dominant().frequency == a.dominant().frequency


def test_too_short():
    with pytest.raises(TooShort):
        spectrum(np.ones(10), DT)


def test_relative_error():
    assert relative_error(150e9, 149.95e9) == pytest.approx(3.334e-4, rel=1e-3)
    assert relative_error(166.7e9, 169.89e9) == pytest.approx(1.878e-2, rel=1e-3)
    assert relative_error(3.0, 3.0) == 0.0
    with pytest.raises(ValueError):
        relative_error(1.0, 0.0)


def test_vector_charge_vanishes_for_any_d(cloud, kernel):
    rng = np.random.default_rng(0)
    s = FieldState.zeros(cloud.n_vector, cloud.n_scalar)
    D = rng.normal(size=(cloud.n_vector, 2))
    s = FieldState(**{**s.__dict__, "D_now": D})
    f = charge_density(s, cloud, kernel, 2.6 * H, "vector")
    assert np.abs(f.rho).max() <= 1e-8 * np.linalg.norm(D) / H
    g = charge_density(s, cloud, kernel, 2.6 * H, "scalar")
    assert np.abs(g.rho).max() > 1e-3 * np.linalg.norm(D) / H


def test_charge_grid_and_shape_check(cloud, kernel):
    s = FieldState.zeros(cloud.n_vector, cloud.n_scalar)
    grid = np.array([[1e-3, 1e-3], [2e-3, 3e-3], [4.2e-3, 0.7e-3]])
    assert len(charge_density(s, cloud, kernel, 2.6 * H, grid=grid)) == 3
    bad = FieldState.zeros(5, cloud.n_scalar)
    with pytest.raises(ShapeMismatch):
        charge_density(bad, cloud, kernel, 2.6 * H)


def test_concentration_ratio():
    pos = np.array([(x, y) for x in range(4) for y in range(4)], float)
    spike = np.zeros(16)
    spike[5] = 3.0
    assert concentration_ratio(ChargeField(pos, spike, 0.0, "vector"), pos[5], 0.5) == 1.0
    flat = ChargeField(pos, np.ones(16), 0.0, "vector")
    assert concentration_ratio(flat, (0, 0), 1.0) == pytest.approx(3 / 16)
    assert concentration_ratio(flat, (1.5, 1.5), 0.75) == pytest.approx(0.25)
    assert concentration_ratio(ChargeField(pos, np.zeros(16), 0.0, "vector"), (0, 0), 1.0) is None
    rng = np.random.default_rng(1)
    rnd = ChargeField(pos, rng.normal(size=16), 0.0, "scalar")
    r = [concentration_ratio(rnd, (1, 2), rad) for rad in np.linspace(0.1, 5, 30)]
    assert all(0 <= x <= 1 for x in r) and np.all(np.diff(r) >= 0)


def test_exports(tmp_path):
    s = spectrum(_tone(150e9), DT)
    s.to_csv(tmp_path / "s.csv")
    s.peaks_to_csv(tmp_path / "p.csv", reference=[149.9e9])
    assert (tmp_path / "s.csv").read_text().startswith("frequency,magnitude\n")
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "frequency,level_db,bin_frequency,reference,relative_error"
    assert rows[1].split(",")[3] == repr(149.9e9)
