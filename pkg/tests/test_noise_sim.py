import numpy as np
import pytest
from scipy import stats

from rydberg_crlb.noise_sim import (NoiseSpec, SamplingPlan, ScanData, isd_waveform, normal_block, sample_idd,
                                    sample_isd, sample_scan, scan_noise, scan_noise_block, trial_rng)
from rydberg_crlb.response import PeakLineshape

X0 = 4.0


def test_idd_noiseless(fi):
    z = sample_idd(fi, X0, 20, NoiseSpec(0.0, seed=3))
    assert np.all(z == fi(X0))


def test_idd_law_of_large_numbers(fi):
    n, s = 10 ** 6, 0.01
    z = sample_idd(fi, X0, n, NoiseSpec(s, seed=11))
    assert abs(z.mean() - fi(X0)) < 5 * s / np.sqrt(n)
    assert z.var(ddof=1) == pytest.approx(s ** 2, rel=0.02)


def test_idd_seeded_determinism(fi):
    a = sample_idd(fi, X0, 50, NoiseSpec(0.01, seed=5))
    b = sample_idd(fi, X0, 50, NoiseSpec(0.01, seed=5))
    c = sample_idd(fi, X0, 50, NoiseSpec(0.01, seed=6))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_noise_is_normal_ks():
    draws = trial_rng(2024, 1, 0).standard_normal(10 ** 5) * 0.02
    assert stats.kstest(draws, "norm", args=(0.0, 0.02)).pvalue > 1e-3


def test_counter_streams_are_schedule_independent():
    whole = normal_block(9, 3, range(10), 4)
    parts = np.vstack([normal_block(9, 3, range(5, 10), 4), normal_block(9, 3, range(5), 4)])
    assert np.array_equal(whole, np.vstack([parts[5:], parts[:5]]))
    assert np.array_equal(whole[7], trial_rng(9, 3, 7).standard_normal(4))


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(-0.1)
    with pytest.raises(ValueError):
        NoiseSpec(np.inf)


# ---------------------------------------------------------------- ISD

def test_isd_zero_signal_is_constant(fi):
    z = sample_isd(fi, 0.9, 0.0, 0.3, 2, 10, NoiseSpec(0.0))
    assert np.all(z == fi(0.9))


def test_isd_dft_bin_amplitude(fi):
    x_lo, x, n1, n2 = 0.9, 0.05, 4, 10
    z = sample_isd(fi, x_lo, x, 0.7, n1, n2, NoiseSpec(0.0))
    n = n1 * n2
    amp = abs(np.fft.fft(z)[n1])
    assert amp == pytest.approx(n * abs(fi.derivative(x_lo)) * x / 2, rel=1e-10)


def test_isd_phase_shift_negates_ac():
    a = isd_waveform(0.7, -0.03, 0.2, 0.4, 3, 8)
    b = isd_waveform(0.7, -0.03, 0.2, 0.4 + np.pi, 3, 8)
    np.testing.assert_allclose(a - 0.7, -(b - 0.7), rtol=0, atol=1e-15)


def test_isd_layout_and_precondition():
    z = isd_waveform(1.0, 1.0, 1.0, 0.0, 2, 5)
    assert z.size == 10
    np.testing.assert_allclose(z[:5], z[5:], atol=1e-15)
    with pytest.raises(ValueError):
        isd_waveform(1.0, 1.0, 1.0, 0.0, 2, 3)


# ---------------------------------------------------------------- scans

def _gauss_right():
    return PeakLineshape.gaussian([0.8, 0.05, 0.2])


def test_scan_noiseless_matches_lineshape():
    ls = _gauss_right()
    f = np.linspace(3, 12, 10)
    scan = sample_scan(ls, f, 3, NoiseSpec(0.0), side="right", shift=7.5)
    assert np.array_equal(scan.voltages, ls(f - 7.5))
    assert scan.n_avg == 3


def test_scan_large_average_clt():
    ls = _gauss_right()
    scan = sample_scan(ls, np.array([7.0]), 10 ** 6, NoiseSpec(0.01, seed=2), shift=7.5)
    assert abs(scan.voltages[0] - ls(-0.5)) < 5 * 0.01 / 1000


def test_scan_variance_of_averages():
    z = scan_noise_block(10, 1, 0.01, 4, 3, range(10 ** 4))[:, 0]
    assert z.var(ddof=1) == pytest.approx(0.01 ** 2 / 10, rel=0.05)


def test_scan_variance_scaling_exponent():
    navg = np.array([1, 4, 16, 64])
    var = [scan_noise_block(int(k), 1, 1.0, 8, 3, range(20000))[:, 0].var(ddof=1) for k in navg]
    slope = np.polyfit(np.log(navg), np.log(var), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.05)


def test_scan_plan_and_side_rules():
    plan = SamplingPlan("explicit", [-9.0, -8.0, -7.0], side="left")
    scan = sample_scan(PeakLineshape.gaussian([1.0, 0.1, 0.0], side="left"), plan, 2, NoiseSpec(0.01, seed=1),
                       shift=-8.0)
    assert scan.side == "left"
    with pytest.raises(ValueError):
        SamplingPlan("explicit", [1.0, -1.0], side="right")
    with pytest.raises(ValueError):
        ScanData([-1.0, 2.0], [0.1, 0.2], side="right")
    with pytest.raises(ValueError):
        ScanData([1.0], [0.1], n_avg=0)


def test_scan_left_right_streams_differ():
    a = scan_noise(2, 5, 1.0, 1, 3, 0)
    b = scan_noise(2, 5, 1.0, 1, 4, 0)
    assert not np.array_equal(a, b)


def test_scan_csv_round_trip(tmp_path):
    scan = sample_scan(_gauss_right(), np.linspace(3, 12, 10), 2, NoiseSpec(0.01, seed=77), shift=7.5)
    scan.to_csv(tmp_path / "scan.csv")
    text = (tmp_path / "scan.csv").read_text()
    assert text.startswith("# side=right\n# n_avg=2\n# seed=77\nf,z\n")
    back = ScanData.from_csv(tmp_path / "scan.csv")
    assert np.array_equal(back.voltages, scan.voltages)
    assert np.array_equal(back.frequencies, scan.frequencies)
    assert (back.side, back.n_avg, back.seed) == ("right", 2, 77)
