import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import gamma_snr_bep_tau2_one, rayleigh_bpsk_bep, rayleigh_spectral_efficiency
from semsense import channel as ch
from semsense.channel import MODULATIONS, FadingSpec, LinkBudget, ModulationScheme

MODELS = ("rayleigh", "nakagami-2", "nakagami-5", "nakagami-10")


def test_table_presets():
    assert {k: (m.tau1, m.tau2) for k, m in MODULATIONS.items()} == {
        "BFSK": (0.5, 0.5), "BPSK": (1.0, 0.5), "ON-BFSK": (0.5, 1.0), "DPSK": (1.0, 1.0)}


def test_spec_validation():
    with pytest.raises(ch.InvalidSpecError):
        FadingSpec("nakagami", m=0.4, mean_snr_db=0.0)
    with pytest.raises(ch.InvalidSpecError):
        FadingSpec("rayleigh")
    with pytest.raises(ch.InvalidSpecError):
        FadingSpec("rayleigh", mean_snr_db=0.0, link_budget=LinkBudget(10.0))
    with pytest.raises(ch.InvalidSpecError):
        ModulationScheme(0.0, 1.0)


def test_link_budget_snr():
    b = LinkBudget(20.0, distance_m=10.0, path_loss_exp=3.0, noise_power_dbw=-20.0)
    assert FadingSpec("rayleigh", link_budget=b).snr_db == pytest.approx(10.0)


def test_pdf_examples():
    s = FadingSpec("rayleigh", mean_snr_db=0.0)
    g = np.linspace(0, 5, 11)
    assert np.allclose(ch.snr_pdf(s, g), np.exp(-g))
    assert ch.snr_pdf(s, 0.0) == pytest.approx(1.0)
    for nr in (1, 3):
        for db in (-5.0, 12.0):
            a = ch.snr_pdf(FadingSpec("rayleigh", n_branches=nr, mean_snr_db=db), g + 0.1)
            b = ch.snr_pdf(FadingSpec("nakagami", m=1.0, n_branches=nr, mean_snr_db=db), g + 0.1)
            assert np.allclose(a, b, rtol=0, atol=1e-12)


@pytest.mark.parametrize("model", MODELS + ("nakagami-0.5",))
@pytest.mark.parametrize("nr", [1, 2, 4])
def test_pdf_normalized(model, nr):
    s = FadingSpec.parse(model, n_branches=nr, mean_snr_db=7.0)
    k, theta = s.shape_scale()
    total, _ = integrate.quad(lambda x: ch.snr_pdf(s, x), 0, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_capacity_limits_and_closed_form():
    assert ch.spectral_efficiency(FadingSpec("rayleigh", mean_snr_db=-60.0)) < 1e-4
    for db in range(-10, 35, 5):
        s = FadingSpec("rayleigh", mean_snr_db=float(db))
        assert ch.ergodic_capacity(s, 1e6) == pytest.approx(1e6 * rayleigh_spectral_efficiency(s.mean_snr), rel=1e-6)


@pytest.mark.slow
def test_capacity_monte_carlo():
    rng = np.random.default_rng(0)
    for model in MODELS:
        s = FadingSpec.parse(model, n_branches=2, mean_snr_db=10.0)
        k, theta = s.shape_scale()
        draws = np.log2(1 + rng.gamma(k, theta, 10 ** 7))
        se = draws.std() / np.sqrt(draws.size)
        assert abs(ch.spectral_efficiency(s) - draws.mean()) < 3 * se


def test_capacity_linear_in_bandwidth_and_monotone():
    s = FadingSpec("nakagami", m=2.0, mean_snr_db=5.0)
    assert ch.ergodic_capacity(s, 2e6) == pytest.approx(2 * ch.ergodic_capacity(s, 1e6), rel=1e-12)
    caps = [ch.spectral_efficiency(FadingSpec("rayleigh", mean_snr_db=d)) for d in np.linspace(-10, 40, 20)]
    assert np.all(np.diff(caps) > 0)


def test_bep_limits_and_oracles():
    assert ch.average_bep(FadingSpec("rayleigh", mean_snr_db=-80.0), MODULATIONS["BPSK"]) == pytest.approx(0.5, abs=1e-4)
    for db in range(-10, 35, 5):
        s = FadingSpec("rayleigh", mean_snr_db=float(db))
        assert abs(ch.average_bep(s, MODULATIONS["BPSK"]) - rayleigh_bpsk_bep(s.mean_snr)) <= 1e-8


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("nr", [1, 3])
@pytest.mark.parametrize("mod", ["DPSK", "ON-BFSK"])
def test_bep_tau2_one_mgf(model, nr, mod):
    for db in (-5.0, 5.0, 15.0):
        s = FadingSpec.parse(model, n_branches=nr, mean_snr_db=db)
        k, theta = s.shape_scale()
        exact = gamma_snr_bep_tau2_one(MODULATIONS[mod].tau1, k, theta)
        assert ch.average_bep(s, MODULATIONS[mod]) == pytest.approx(exact, rel=1e-7, abs=1e-10)


def test_bep_ordering_at_10db():
    s = FadingSpec("rayleigh", mean_snr_db=10.0)
    b = {m: ch.average_bep(s, MODULATIONS[m]) for m in ("BPSK", "DPSK", "ON-BFSK")}
    assert b["BPSK"] < b["DPSK"] < b["ON-BFSK"]


def test_bep_monotone_in_snr_and_m():
    grid = np.linspace(-10, 40, 20)
    for mod in MODULATIONS.values():
        by_model = {m: [ch.average_bep(FadingSpec.parse(m, mean_snr_db=d), mod) for d in grid] for m in MODELS}
        for m in MODELS:
            assert np.all(np.diff(by_model[m]) <= 0)
        arr = np.array([by_model[m] for m in ("nakagami-10", "nakagami-5", "nakagami-2", "rayleigh")])
        assert np.all(np.diff(arr, axis=0) >= 0)


def test_corrupt_payload():
    bits = np.random.default_rng(0).integers(0, 2, 1000).astype(np.uint8)
    assert np.array_equal(ch.corrupt_payload(bits, 0.0, 1), bits)
    big = np.zeros(10 ** 6, dtype=np.uint8)
    frac = ch.corrupt_payload(big, 0.5, 3).mean()
    assert abs(frac - 0.5) <= 0.002
    assert np.array_equal(ch.corrupt_payload(bits, 0.1, 9), ch.corrupt_payload(bits, 0.1, 9))
    with pytest.raises(ValueError):
        ch.corrupt_payload(bits, 0.6, 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5), st.integers(0, 2 ** 63 - 1))
def test_corruption_nested(b1, b2, seed):
    lo, hi = sorted((b1, b2))
    bits = np.zeros(512, dtype=np.uint8)
    f_lo = ch.corrupt_payload(bits, lo, seed).astype(bool)
    f_hi = ch.corrupt_payload(bits, hi, seed).astype(bool)
    assert np.all(f_hi[f_lo])


def test_transmission_time():
    assert ch.transmission_time(7200, 7e6) == pytest.approx(1.0286e-3, abs=1e-7)
    assert ch.transmission_time(96000, 5e6) == pytest.approx(19.2e-3)
    assert ch.transmission_time(0, 5e6) == 0
    with pytest.raises(ValueError):
        ch.transmission_time(10, 0)


def test_link_report_and_sweep_csv(tmp_path):
    r = ch.link_report(FadingSpec("rayleigh", mean_snr_db=10.0), MODULATIONS["BPSK"], 1e6)
    assert 0 <= r.avg_bep <= 0.5 and r.capacity_bps > 0
    rows = ch.bep_sweep([0.0, 10.0], ["rayleigh", "nakagami-2"], ["BPSK", "DPSK"])
    ch.write_sweep_csv(tmp_path / "s.csv", rows)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "snr_db,model,modulation,bep,capacity_bps" and len(lines) == 9
