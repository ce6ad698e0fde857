"""Tests for recovery-condition diagnostics: spark census, coherence, bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farcs import (
    BandwidthMode,
    ConfigurationError,
    DomainError,
    FrequencyCodes,
    RadarParams,
    ResourceError,
    ShapeError,
    build_D,
    build_iwr_psi,
    build_phi,
    chi,
    chi_statistics,
    coherence,
    l0_limit,
    max_recoverable_K,
    min_singular_normalized,
    rayleigh_tail_bound,
    sample_codes,
    spark_enumeration,
    union_bound,
)

TWO_PI = 2.0 * np.pi


def _dft(n):
    k = np.arange(n)
    return np.exp(1j * TWO_PI * np.outer(k, k) / n)


# --- min_singular_normalized ---------------------------------------------------


def test_min_singular_of_dft_is_one():
    # DFT columns are orthogonal with norm sqrt(N): every sigma equals sqrt(N)
    assert min_singular_normalized(_dft(6)) == pytest.approx(1.0, abs=1e-12)


def test_min_singular_of_identity():
    # unit singular values, so the sqrt(N) normalization leaves 1/sqrt(N)
    assert min_singular_normalized(np.eye(5, dtype=complex)) == pytest.approx(
        1.0 / math.sqrt(5.0), rel=1e-14)


def test_min_singular_duplicate_column_is_zero():
    a = _dft(4)
    a[:, 3] = a[:, 0]
    assert min_singular_normalized(a) < 1e-14


def test_min_singular_rejects_non_square():
    with pytest.raises(ShapeError):
        min_singular_normalized(np.ones((3, 4)))


# --- spark_enumeration ----------------------------------------------------------


def _abstract_phi(codes_tuple, n_hrr_bins, n_codes=None):
    codes = FrequencyCodes(np.array(codes_tuple), n_codes=n_codes)
    params = RadarParams.abstract(len(codes_tuple), n_hrr_bins, n_codes=n_codes)
    return build_phi(params, codes)


def test_spark_census_shape_and_order():
    phi = _abstract_phi((0, 1 / 3, 2 / 3, 0, 1 / 3, 2 / 3), 3, n_codes=3)
    report = spark_enumeration(phi)
    assert report.n_submatrices == math.comb(18, 6)
    assert report.sigma_values.shape == (18564,)
    # lexicographically first subset = columns 0..5 = the IDFT block (m = 0),
    # last subset = columns 12..17 = a row-phased IDFT block (m = 2)
    assert report.sigma_values[0] == pytest.approx(1.0, abs=1e-12)
    assert report.sigma_values[-1] == pytest.approx(1.0, abs=1e-12)
    assert report.sigma_omega == pytest.approx(report.sigma_values.min())
    assert report.n_below_eps == int(np.sum(report.sigma_values < report.eps_svd))


def test_spark_constant_codes_heavily_deficient():
    # identical codes make the m blocks scalar multiples of each other:
    # every cross-block column pair with equal l is parallel
    phi = _abstract_phi((0.0,) * 6, 3, n_codes=3)
    report = spark_enumeration(phi)
    assert not report.full_spark
    assert report.sigma_omega < 1e-15
    assert report.n_below_eps > 0


def test_spark_continuous_codes_full_rank():
    codes = sample_codes(0, 6)
    params = RadarParams.abstract(6, 3)
    report = spark_enumeration(build_phi(params, codes))
    assert report.full_spark
    assert report.sigma_omega > 1e-12


def test_spark_discrete_codes_always_have_a_deficient_subset():
    # with a 3-letter alphabet over 6 pulses some pulse pair shares a code at
    # an even or length-3 gap, which forces a singular 6-column subset
    for seed in range(4):
        codes = sample_codes(seed, 6, 3)
        params = RadarParams.abstract(6, 3, n_codes=3)
        report = spark_enumeration(build_phi(params, codes))
        assert report.sigma_omega < 1e-15


def test_spark_single_bin_has_one_submatrix():
    # M=1: the only N-column subset is the whole (stretched-row) Doppler block
    params = RadarParams.abstract(4, 1, relative_bandwidth=0.3)
    codes = sample_codes(0, 4, None)
    report = spark_enumeration(build_phi(params, codes))
    assert report.n_submatrices == 1
    expected = min_singular_normalized(build_D(params, codes))
    assert report.sigma_omega == pytest.approx(expected, rel=1e-12)


def test_spark_budget_guard():
    phi = _abstract_phi((0.0,) * 6, 3, n_codes=3)
    with pytest.raises(ResourceError):
        spark_enumeration(phi, max_submatrices=100)


def test_spark_rejects_bad_eps():
    phi = _abstract_phi((0.0,) * 6, 3, n_codes=3)
    with pytest.raises(DomainError):
        spark_enumeration(phi, eps_svd=0.0)


def test_spark_batching_invariant():
    phi = _abstract_phi((0, 1 / 3, 1 / 3, 2 / 3, 0, 2 / 3), 3, n_codes=3)
    a = spark_enumeration(phi, batch_size=8192)
    b = spark_enumeration(phi, batch_size=101)
    np.testing.assert_array_equal(a.sigma_values, b.sigma_values)


# --- chi -----------------------------------------------------------------------


def test_chi_hand_value_two_pulse():
    params = RadarParams.abstract(2, 2, n_codes=2)
    codes = FrequencyCodes(np.array([0.0, 0.5]), n_codes=2)
    # p = pi: terms exp(1j*pi*2*d_n) = [1, -1] -> chi = 0
    assert chi(params, codes, np.pi, 0.0) == pytest.approx(0.0, abs=1e-15)
    # p = 0, q = pi: terms exp(1j*pi*n) = [1, -1] -> chi = 0
    assert chi(params, codes, 0.0, np.pi) == pytest.approx(0.0, abs=1e-15)
    assert chi(params, codes, 0.0, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_chi_zero_hop_offsets_are_dft_sums():
    params = RadarParams.abstract(8, 4, n_codes=4)
    codes = sample_codes(3, 8, 4)
    for ell in range(1, 8):
        val = chi(params, codes, 0.0, TWO_PI * ell / 8)
        assert val == pytest.approx(0.0, abs=1e-12)


def test_chi_matches_gram_entries():
    params = RadarParams.abstract(8, 4, n_codes=4)
    codes = sample_codes(5, 8, 4)
    phi = build_phi(params, codes)
    dense = phi.to_dense()
    for m, ell in [(1, 0), (1, 3), (2, 5), (3, 7)]:
        val = chi(params, codes, TWO_PI * m / 4, TWO_PI * ell / 8)
        inner = np.vdot(dense[:, 0], dense[:, ell + m * 8]) / 8
        assert val == pytest.approx(complex(inner), abs=1e-12)


def test_chi_matches_gram_entries_at_full_scale():
    params = RadarParams.abstract(64, 8, n_codes=8)
    codes = sample_codes(5, 64, 8)
    dense = build_phi(params, codes).to_dense()
    for m, ell in [(5, 3), (7, 0), (0, 63), (2, 17)]:
        val = chi(params, codes, TWO_PI * m / 8, TWO_PI * ell / 64)
        inner = np.vdot(dense[:, 0], dense[:, ell + m * 64]) / 64
        assert val == pytest.approx(complex(inner), abs=1e-12)


def test_chi_rejects_off_grid_and_out_of_range():
    params = RadarParams.abstract(8, 4, n_codes=4)
    codes = sample_codes(0, 8, 4)
    with pytest.raises(DomainError):
        chi(params, codes, 0.1, 0.0)
    with pytest.raises(DomainError):
        chi(params, codes, 0.0, -0.5)
    with pytest.raises(DomainError):
        chi(params, codes, TWO_PI, 0.0)
    with pytest.raises(ShapeError):
        chi(params, sample_codes(0, 6, 4), 0.0, 0.0)


# --- coherence -------------------------------------------------------------------


def test_coherence_shortcut_matches_gram():
    for seed in range(6):
        codes = sample_codes(seed, 16, 4)
        params = RadarParams.abstract(16, 4, n_codes=4)
        phi = build_phi(params, codes)
        fast = coherence(phi, method="shortcut")
        slow = coherence(phi, method="gram")
        assert fast.mu == pytest.approx(slow.mu, abs=1e-12)
        assert fast.method == "shortcut" and slow.method == "gram"


def test_coherence_shortcut_matches_gram_continuous_codes():
    codes = sample_codes(11, 12)
    params = RadarParams.abstract(12, 3)
    phi = build_phi(params, codes)
    assert coherence(phi, method="shortcut").mu == pytest.approx(
        coherence(phi, method="gram").mu, abs=1e-12
    )


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_coherence_routes_agree_property(seed):
    codes = sample_codes(seed, 8, 2)
    params = RadarParams.abstract(8, 2, n_codes=2)
    phi = build_phi(params, codes)
    assert coherence(phi, method="shortcut").mu == pytest.approx(
        coherence(phi, method="gram").mu, abs=1e-12
    )


def test_coherence_chi_abs_index_layout():
    params = RadarParams.abstract(8, 4, n_codes=4)
    codes = sample_codes(7, 8, 4)
    sample = coherence(build_phi(params, codes), method="shortcut")
    assert sample.chi_abs.shape == (24,)
    for m, ell in [(1, 0), (2, 3), (3, 7)]:
        expected = abs(chi(params, codes, TWO_PI * m / 4, TWO_PI * ell / 8))
        assert sample.chi_abs[ell + m * 8 - 8] == pytest.approx(expected, abs=1e-12)


def test_coherence_exact_mode_requires_gram():
    params = RadarParams.abstract(8, 4, n_codes=4, relative_bandwidth=0.3,
                                  mode=BandwidthMode.EXACT)
    phi = build_phi(params, sample_codes(1, 8, 4))
    with pytest.raises(DomainError):
        coherence(phi, method="shortcut")
    auto = coherence(phi, method="auto")
    assert auto.method == "gram"
    assert 0.0 <= auto.mu <= 1.0


def test_coherence_single_bin_is_zero():
    params = RadarParams.abstract(8, 1, n_codes=1)
    codes = FrequencyCodes(np.zeros(8), n_codes=1)
    sample = coherence(build_phi(params, codes), method="auto")
    assert sample.mu == 0.0


def test_coherence_constant_codes_is_one():
    # equal codes leave parallel columns across hop blocks
    params = RadarParams.abstract(8, 4, n_codes=4)
    codes = FrequencyCodes(np.zeros(8), n_codes=4)
    assert coherence(build_phi(params, codes)).mu == pytest.approx(1.0, abs=1e-12)


def test_coherence_unknown_method():
    params = RadarParams.abstract(8, 2, n_codes=2)
    phi = build_phi(params, sample_codes(0, 8, 2))
    with pytest.raises(ConfigurationError):
        coherence(phi, method="newton")


def test_coherence_of_orthogonal_basis_is_zero():
    # the inverse-weighting basis has exactly orthogonal columns
    psi = build_iwr_psi(RadarParams.abstract(8, 2))
    sample = coherence(psi)
    assert sample.method == "gram"
    assert sample.mu <= 1e-9


def test_coherence_plain_matrix_normalizes_columns():
    # gram route on a raw matrix divides by the actual column norms
    a = np.array([[3.0, 0.0], [0.0, 0.5]], dtype=complex)
    assert coherence(a).mu == 0.0
    b = np.array([[1.0, 2.0], [1.0, 2.0]], dtype=complex)
    assert coherence(b).mu == pytest.approx(1.0, abs=1e-12)


def test_coherence_plain_matrix_rejections():
    a = np.eye(3, dtype=complex)
    with pytest.raises(DomainError):
        coherence(a, method="shortcut")  # shortcut needs the structured operator
    a[:, 1] = 0.0
    with pytest.raises(DomainError):
        coherence(a)
    with pytest.raises(ShapeError):
        coherence(np.zeros(5, dtype=complex))


# --- tail bounds -----------------------------------------------------------------


def test_rayleigh_tail_bound_value_and_validity_edge():
    b = rayleigh_tail_bound(0.1, 64)
    assert b.value == pytest.approx(math.exp(-0.5 * 64 * 0.01), rel=1e-15)
    assert b.asymptotic_valid  # 64 * 0.01 = 0.64 > 2/pi
    assert not rayleigh_tail_bound(0.099, 64).asymptotic_valid  # 0.627 < 2/pi


def test_rayleigh_tail_bound_named_points():
    assert rayleigh_tail_bound(0.25, 64).value == pytest.approx(math.exp(-2.0), rel=1e-15)
    assert rayleigh_tail_bound(0.25, 64).value == pytest.approx(0.13534, abs=5e-6)
    # huge deviation: the exponential underflows cleanly to zero
    assert rayleigh_tail_bound(1e6, 64).value == 0.0
    # below the asymptotic threshold the value is still returned, just flagged
    low = rayleigh_tail_bound(0.05, 64)
    assert low.value == pytest.approx(math.exp(-0.08), rel=1e-15)
    assert not low.asymptotic_valid


def test_rayleigh_tail_bound_rejects():
    with pytest.raises(DomainError):
        rayleigh_tail_bound(0.0, 64)
    with pytest.raises(ConfigurationError):
        rayleigh_tail_bound(0.1, 0)


def test_union_bound_raw_value():
    val = union_bound(0.3, 64, 8)
    assert val == pytest.approx((64 * 8 - 64) * math.exp(-0.5 * 64 * 0.09), rel=1e-15)
    # small eps: the raw bound exceeds 1 and is reported unclipped
    assert union_bound(0.01, 64, 8) > 1.0


def test_union_bound_named_value_and_single_bin():
    val = union_bound(0.5, 64, 16)
    assert val == pytest.approx(960 * math.exp(-8.0), rel=1e-15)
    assert val == pytest.approx(0.3221, abs=1e-3)
    # M=1 leaves no cross-bin column pairs, so the probability is zero
    assert union_bound(0.7, 64, 1) == 0.0


def test_union_bound_decreases_in_n_past_stationary_point():
    # (MN-N) e^{-N eps^2/2} peaks at N = 2/eps^2 = 8 for eps = 0.5, M = 16
    vals = [union_bound(0.5, n, 16) for n in range(9, 129)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_union_bound_rejects():
    with pytest.raises(DomainError):
        union_bound(-0.1, 64, 8)
    with pytest.raises(ConfigurationError):
        union_bound(0.1, 64, 0)


def test_max_recoverable_K_frozen_value():
    # sqrt(64 / (ln 448 - ln 0.1)) / (2 sqrt 2) + 1/2, frozen from a
    # 40-digit evaluation of the same expression
    assert max_recoverable_K(64, 8, 0.1) == pytest.approx(1.4754717534110120, abs=1e-12)


def test_max_recoverable_K_frozen_value_large():
    # sqrt(512 / (ln 15872 - ln 0.1)) / (2 sqrt 2) + 1/2, frozen from a
    # 40-digit evaluation of the same expression
    assert max_recoverable_K(512, 32, 0.1) == pytest.approx(2.8118204179846845, abs=1e-12)


def test_max_recoverable_K_monotonicity():
    assert max_recoverable_K(512, 8, 0.1) > max_recoverable_K(64, 8, 0.1)
    assert max_recoverable_K(64, 8, 0.01) < max_recoverable_K(64, 8, 0.1)


def test_max_recoverable_K_domain():
    with pytest.raises(DomainError):
        max_recoverable_K(64, 8, 0.0)
    with pytest.raises(DomainError):
        max_recoverable_K(64, 8, 1.0)
    with pytest.raises(DomainError):
        max_recoverable_K(1, 2, 0.1)  # only one off-bin offset


def test_l0_limit():
    assert l0_limit(6) == 3.0
    assert l0_limit(64) == 32.0
    assert l0_limit(512) == 256.0
    assert l0_limit(7) == 3.5
    with pytest.raises(ConfigurationError):
        l0_limit(0)


# --- chi statistics ----------------------------------------------------------------


def test_chi_statistics_generic_offset():
    params = RadarParams.abstract(64, 8, n_codes=8)
    stats = chi_statistics(params, TWO_PI * 3 / 8, TWO_PI * 5 / 64,
                           n_trials=40000, seed=1)
    assert abs(stats.mean) < 3e-3
    assert stats.var_real == pytest.approx(1 / 128, rel=0.05)
    assert stats.var_imag == pytest.approx(1 / 128, rel=0.05)
    assert abs(stats.cov) < 5e-4
    assert stats.abs_sq_mean == pytest.approx(1 / 64, rel=0.05)
    assert stats.n_trials == 40000


def test_chi_statistics_all_real_offset():
    # p = q = pi puts every term on the real axis: the variance collapses
    # onto the real part
    params = RadarParams.abstract(64, 8, n_codes=8)
    stats = chi_statistics(params, np.pi, np.pi, n_trials=40000, seed=2)
    assert stats.var_imag < 1e-20
    assert stats.var_real == pytest.approx(1 / 64, rel=0.05)
    assert stats.abs_sq_mean == pytest.approx(1 / 64, rel=0.05)


def test_chi_statistics_deterministic():
    params = RadarParams.abstract(64, 8, n_codes=8)
    a = chi_statistics(params, TWO_PI / 8, 0.0, n_trials=500, seed=9)
    b = chi_statistics(params, TWO_PI / 8, 0.0, n_trials=500, seed=9)
    assert a == b


def test_chi_statistics_rejects():
    params = RadarParams.abstract(64, 8, n_codes=8)
    with pytest.raises(DomainError):
        chi_statistics(params, 0.0, np.pi, n_trials=100)
    with pytest.raises(ConfigurationError):
        chi_statistics(params, np.pi, np.pi, n_trials=1)
    wide = RadarParams.abstract(64, 8, n_codes=16)
    with pytest.raises(ConfigurationError):
        chi_statistics(wide, np.pi, np.pi, n_trials=100)
