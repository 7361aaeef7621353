import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leoroute.channel import (ChannelError, IslChannelParams, LgChannelParams, ShadowedRicianParams,
                              ShadowingTable, isl_capacity_packets, isl_snr, isl_snr_from_distance,
                              lg_capacity_packets, lg_mean_snr, sample_fading, shadowed_rician_pdf)
from oracles import integrated_cdf, ks_statistic, link_budget_snr_db, shadowed_rician_pdf_series

ORIGIN = np.zeros(3)


def at(d_km):
    return np.array([d_km, 0.0, 0.0])


def test_lg_snr_unit_case():
    p = LgChannelParams(tx_power=1.0, path_loss_exp=2.0, noise_var=1.0)
    assert lg_mean_snr(ORIGIN, at(1.0), p) == pytest.approx(1.0, rel=1e-15)
    assert lg_mean_snr(ORIGIN, at(2.0), p) == pytest.approx(0.25, rel=1e-15)


def test_lg_snr_high_precision():
    p = LgChannelParams(tx_power=10.0, path_loss_exp=2.5, noise_var=1e-3)
    mpmath.mp.dps = 50
    want = mpmath.mpf(10) * mpmath.power(1000, mpmath.mpf("-2.5")) / mpmath.mpf("1e-3")
    assert lg_mean_snr(ORIGIN, at(1000.0), p) == pytest.approx(float(want), rel=1e-13)


def test_coincident_points_rejected():
    with pytest.raises(ChannelError):
        lg_mean_snr(ORIGIN, ORIGIN, LgChannelParams())
    with pytest.raises(ChannelError):
        isl_snr(ORIGIN, ORIGIN, IslChannelParams())


def test_lg_capacity_examples():
    p = LgChannelParams(bandwidth_hz=100.0, packet_bits=60.0)  # B dt / L = 100 at dt = 60
    assert lg_capacity_packets(1.0, 1.0, p, 60.0) == pytest.approx(100.0)
    assert lg_capacity_packets(5.0, 0.0, p, 60.0) == 0.0
    p50 = LgChannelParams(bandwidth_hz=50.0, packet_bits=60.0)
    assert lg_capacity_packets(3.0, 1.0, p50, 60.0) == pytest.approx(100.0)
    with pytest.raises(ChannelError):
        lg_capacity_packets(1.0, -0.1, p, 60.0)


def test_isl_snr_scaling_and_unit_case():
    p = IslChannelParams()
    assert isl_snr_from_distance(2000.0, p) == pytest.approx(isl_snr_from_distance(1000.0, p) / 4)
    # unit gains, lambda/(4 pi D) = 1 and k T B = P
    d_km = 1.0
    unit = IslChannelParams(tx_power=2.0, tx_gain=1.0, rx_gain=1.0,
                            carrier_wavelength_m=4 * math.pi * d_km * 1000.0,
                            boltzmann=1.0, sys_noise_temp=2.0, isl_bandwidth_hz=1.0)
    assert isl_snr(ORIGIN, at(d_km), unit) == pytest.approx(1.0, rel=1e-14)


def test_isl_link_budget_db():
    p = IslChannelParams(tx_power=5.0, tx_gain=1000.0, rx_gain=1000.0, carrier_wavelength_m=0.0107,
                         sys_noise_temp=300.0, isl_bandwidth_hz=250e6)
    got = 10 * math.log10(isl_snr_from_distance(2000.0, p))
    want = link_budget_snr_db(5.0, 30.0, 30.0, 0.0107, 2.0e6, 300.0, 250e6)
    assert abs(got - want) < 0.01


def test_isl_capacity_examples():
    p10 = IslChannelParams(isl_bandwidth_hz=10.0, packet_bits=60.0)
    assert isl_capacity_packets(0.0, p10, 60.0) == 0.0
    assert isl_capacity_packets(1.0, p10, 60.0) == pytest.approx(10.0)
    p25 = IslChannelParams(isl_bandwidth_hz=25.0, packet_bits=60.0)
    assert isl_capacity_packets(15.0, p25, 60.0) == pytest.approx(100.0)


@given(d1=st.floats(100, 5000), d2=st.floats(100, 5000))
def test_capacity_monotone_in_distance(d1, d2):
    p = IslChannelParams()
    lo, hi = sorted((d1, d2))
    c_lo = isl_capacity_packets(isl_snr_from_distance(lo, p), p, 60.0)
    c_hi = isl_capacity_packets(isl_snr_from_distance(hi, p), p, 60.0)
    assert c_lo >= c_hi >= 0


@given(s1=st.floats(0, 1e6), s2=st.floats(0, 1e6))
def test_capacity_strictly_increasing_in_snr(s1, s2):
    p = LgChannelParams()
    lo, hi = sorted((s1, s2))
    if hi - lo <= 1e-9 * (1.0 + lo):
        return  # below floating-point resolution of log2(1 + x)
    assert lg_capacity_packets(hi, 1.0, p, 60.0) > lg_capacity_packets(lo, 1.0, p, 60.0)


def test_fading_mean_default_triple():
    p = ShadowedRicianParams()
    s = sample_fading(p, np.random.default_rng(0), 10 ** 6)
    assert np.all(s >= 0)
    assert abs(s.mean() / p.mean - 1.0) < 0.01


def test_fading_no_los_is_exponential():
    p = ShadowedRicianParams(b0=0.2, m=3.0, omega=0.0)
    s = sample_fading(p, np.random.default_rng(1), 10 ** 6)
    assert abs(s.mean() / 0.4 - 1.0) < 0.01
    assert abs(s.var() / 0.16 - 1.0) < 0.02


def test_fading_large_m_rician_limit():
    p = ShadowedRicianParams(b0=0.126, m=1e4, omega=0.835)
    s = sample_fading(p, np.random.default_rng(2), 10 ** 6)
    assert abs(s.mean() / p.mean - 1.0) < 0.01


def test_fading_ks_against_integrated_pdf():
    p = ShadowedRicianParams(0.126, 10.1, 0.835)
    s = sample_fading(p, np.random.default_rng(3), 10 ** 6)
    x, cdf = integrated_cdf(p.b0, p.m, p.omega)
    assert cdf[-1] == pytest.approx(1.0, abs=1e-6)
    assert ks_statistic(s, x, cdf) < 0.005


def test_pdf_matches_series():
    p = ShadowedRicianParams()
    x = np.linspace(0, 8, 81)
    assert np.allclose(shadowed_rician_pdf(x, p), shadowed_rician_pdf_series(x, p.b0, p.m, p.omega),
                       rtol=1e-10, atol=1e-300)


def test_fading_reproducible():
    p = ShadowedRicianParams()
    a = sample_fading(p, np.random.default_rng(9), 100)
    b = sample_fading(p, np.random.default_rng(9), 100)
    assert np.array_equal(a, b)
    assert isinstance(sample_fading(p, np.random.default_rng(9)), float)


def test_shadowing_table_lookup():
    heavy = ShadowedRicianParams(0.063, 0.739, 8.97e-4)
    table = ShadowingTable((0.0, 40.0), (heavy, ShadowedRicianParams()))
    assert table.lookup(math.radians(10)) is heavy
    assert table.lookup(math.radians(40)) == ShadowedRicianParams()
    with pytest.raises(ValueError):
        ShadowingTable((10.0, 0.0), (heavy, heavy))


def test_param_validation():
    with pytest.raises(ValueError):
        ShadowedRicianParams(b0=0.0)
    with pytest.raises(ValueError):
        LgChannelParams(noise_var=0.0)
    with pytest.raises(ValueError):
        IslChannelParams(carrier_wavelength_m=-1.0)
