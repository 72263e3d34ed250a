import math

import numpy as np
import pytest

from copolymer.disorder import (DisorderLaw, disorder_from_arrays,
                                freeze_zero_disorder, sample_disorder)
from copolymer.errors import ConfigError, GuardError
from copolymer.kernel import build_srw_kernel
from copolymer.logspace import logsumexp
from copolymer.oracle import brute_force_partition, log_srw_mass
from copolymer.partition import (ModelParams, excursion_log_weight,
                                 forward_tables, log_partition_curve, log_zeta,
                                 normalized_to_tilde, segment_tables,
                                 shifted_log_partition_curve,
                                 single_excursion_log_lower_bound)

ZERO = ModelParams(0.0, 0.0, 0.0, 0.0)


def test_model_params_validation():
    with pytest.raises(ConfigError):
        ModelParams(-0.1, 0.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        ModelParams(0.0, -1.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        ModelParams(0.0, 0.0, -0.5, 0.0)
    # h_tilde may be negative
    ModelParams(0.0, 0.0, 0.5, -3.0)


def test_log_zeta_values():
    assert log_zeta(3.7, ModelParams(1, 1, 0.0, 9.0)) == 0.0
    assert log_zeta(-0.5, ModelParams(0, 0, 1.0, 0.5)) == pytest.approx(0.0)
    assert log_zeta(1.0, ModelParams(0, 0, 2.0, 1.0)) == pytest.approx(4.0)


def test_excursion_weight_special_cases(srw16):
    d = sample_disorder(DisorderLaw.GAUSSIAN, DisorderLaw.GAUSSIAN, 10, 0.4, 3, 0)
    # lam = 0: the sign average is exactly 1, weight reduces to K(gap)
    p0 = ModelParams(0.0, 0.4, 0.7, 0.1)
    assert excursion_log_weight(2, 5, d, p0, srw16) == pytest.approx(
        srw16.log_k[3], abs=1e-15)
    # zero increment: same reduction at any lam
    dz = freeze_zero_disorder(10, 0.0)
    p1 = ModelParams(1.3, 0.0, 0.0, 0.0)
    assert excursion_log_weight(1, 4, dz, p1, srw16) == pytest.approx(
        srw16.log_k[3], abs=1e-15)


def test_excursion_weight_direct_value(srw16):
    # single-gap weight with unit charge sum: log K(1) + log((1 + e^-2)/2)
    d = disorder_from_arrays(np.array([1.0]), np.array([0.0]), 0.0)
    p = ModelParams(1.0, 0.0, 0.0, 0.0)
    expected = math.log(0.5) + math.log(0.5 * (1.0 + math.exp(-2.0)))
    got = excursion_log_weight(0, 1, d, p, srw16)
    assert got == pytest.approx(expected, abs=1e-14)
    assert got == pytest.approx(-1.2593663, abs=1e-7)


def test_excursion_weight_guards(srw16):
    d = freeze_zero_disorder(10, 0.0)
    with pytest.raises(GuardError):
        excursion_log_weight(5, 5, d, ZERO, srw16)
    with pytest.raises(GuardError):
        excursion_log_weight(3, 11, d, ZERO, srw16)
    small = build_srw_kernel(2)
    with pytest.raises(GuardError):
        excursion_log_weight(0, 5, d, ZERO, small)


def test_free_case_binomial_identity(srw16):
    # zero couplings: Z_N is the SRW renewal mass C(2N,N) 4^-N
    for n in range(1, 13):
        d = freeze_zero_disorder(n, 0.0)
        t = forward_tables(d, ZERO, srw16)
        assert t.log_z == pytest.approx(log_srw_mass(n), abs=1e-12)
    d2 = freeze_zero_disorder(2, 0.0)
    assert math.exp(forward_tables(d2, ZERO, srw16).log_z) == pytest.approx(
        0.375, abs=1e-13)


def test_homogeneous_recursion_identity(srw64):
    # lam_tilde > 0, zero disorder: Z_t = e^{lt*ht} sum_j K(j) Z_{t-j}
    p = ModelParams(0.0, 0.0, 1.3, 0.7)
    n = 40
    d = freeze_zero_disorder(n, 0.0)
    zf = log_partition_curve(d, p, srw64)
    z = np.exp(zf)
    reward = math.exp(p.lam_tilde * p.h_tilde)
    k_lin = np.exp(srw64.log_k)
    for t in range(1, n + 1):
        rec = reward * float(np.dot(k_lin[1:t + 1], z[t - 1::-1]))
        assert math.log(rec) == pytest.approx(zf[t], abs=1e-12)


def test_dp_matches_brute_force(srw16, make_instance):
    for i in range(8):
        n = 3 + (i * 2) % 12
        p, d = make_instance(i, n)
        t = forward_tables(d, p, srw16)
        assert t.log_z == pytest.approx(brute_force_partition(d, p, srw16),
                                        abs=1e-10)


def test_forward_backward_agree(srw512, make_instance):
    for i in range(3):
        p, d = make_instance(i + 50, 300)
        t = forward_tables(d, p, srw512)
        assert abs(t.log_zf[300] - t.log_zb[0]) <= 1e-10 * max(1, abs(t.log_z))


def test_normalized_to_tilde():
    d = freeze_zero_disorder(4, 0.5)
    p0 = ModelParams(0.0, 0.5, 0.0, 0.0)
    assert normalized_to_tilde(-1.25, d, p0) == pytest.approx(-1.25)
    p1 = ModelParams(1.0, 0.5, 0.0, 0.0)
    # W_4 = 2.0 at h = 0.5 with zero charges
    assert normalized_to_tilde(-1.25, d, p1) == pytest.approx(-1.25 + 2.0)


def test_normalized_to_tilde_lln():
    # (1/N)(log Ztilde - log Z) = lam W_N / N -> lam h
    n = 10**5
    lam, h = 0.8, 0.3
    p = ModelParams(lam, h, 0.0, 0.0)
    d = sample_disorder(DisorderLaw.UNIFORM_SYM, DisorderLaw.UNIFORM_SYM,
                        n, h, 31, 0)
    gap = (normalized_to_tilde(0.0, d, p) - 0.0) / n
    assert abs(gap - lam * h) <= 5.0 * lam / math.sqrt(n)


def test_single_excursion_lower_bound(srw16, make_instance):
    for i in range(6):
        p, d = make_instance(i + 20, 11)
        t = forward_tables(d, p, srw16)
        bound = single_excursion_log_lower_bound(d, p, srw16)
        assert t.log_z >= bound - 1e-12


def test_superadditivity_every_split(srw64, make_instance):
    # log Z_N >= log Z_M + log Z_{N-M} on shifted disorder, exactly
    p, d = make_instance(3, 32)
    t = forward_tables(d, p, srw64)
    for m in range(1, 32):
        seg = segment_tables(m, d, p, srw64, t)
        lhs = t.log_zf[m] + seg[32]
        assert lhs <= t.log_zf[32] + 1e-12 * max(1, abs(t.log_z))


def test_pinned_decomposition_identity(srw64, make_instance):
    # Z_N rebuilt from a pin at k plus all excursions straddling k
    n = 64
    p, d = make_instance(9, n)
    t = forward_tables(d, p, srw64)
    lz = t.log_zeta_sites
    for k in range(1, n):
        terms = [t.log_zf[k] + t.log_zb[k]]
        for j in range(k):
            ell = np.arange(k + 1, n + 1)
            w = excursion_log_weight(np.full(ell.shape, j), ell, d, p, srw64)
            terms.append(logsumexp(t.log_zf[j] + w + lz[ell] + t.log_zb[ell]))
        rebuilt = logsumexp(np.array(terms))
        assert rebuilt == pytest.approx(t.log_z, abs=1e-9)


def test_segment_tables_basics(srw16, make_instance):
    p, d = make_instance(4, 12)
    t = forward_tables(d, p, srw16)
    seg0 = segment_tables(0, d, p, srw16, t)
    assert np.allclose(seg0, t.log_zf, atol=1e-12)
    # zero couplings: Z_seg(1, 2) = K(1)
    dz = freeze_zero_disorder(2, 0.0)
    seg1 = segment_tables(1, dz, ZERO, srw16)
    assert seg1[2] == pytest.approx(math.log(0.5), abs=1e-14)
    with pytest.raises(GuardError):
        segment_tables(12, d, p, srw16)
    # cached on the tables object
    assert segment_tables(3, d, p, srw16, t) is segment_tables(3, d, p, srw16, t)


def test_shifted_curve_stop(srw64, make_instance):
    p, d = make_instance(6, 40)
    full = shifted_log_partition_curve(10, d, p, srw64)
    part = shifted_log_partition_curve(10, d, p, srw64, stop=20)
    assert np.allclose(part[10:21], full[10:21], atol=0)
    assert np.all(np.isnan(part[21:]))
    with pytest.raises(GuardError):
        shifted_log_partition_curve(10, d, p, srw64, stop=10)


def test_horizon_guard():
    d = freeze_zero_disorder(10, 0.0)
    small = build_srw_kernel(5)
    with pytest.raises(GuardError):
        forward_tables(d, ZERO, small)


def test_prefix_of_curve_is_smaller_system(srw64, make_instance):
    # forward values only depend on the prefix of the disorder
    p, d = make_instance(12, 50)
    zf = log_partition_curve(d, p, srw64)
    d_short = disorder_from_arrays(d.omega[1:21], d.omega_tilde[1:21], p.h)
    zf_short = log_partition_curve(d_short, p, srw64)
    assert np.allclose(zf[:21], zf_short, atol=1e-12)


@pytest.mark.parametrize("point", [ModelParams(0.0, 0.0, 1.0, 0.5),
                                   ModelParams(0.7, 0.2, 0.9, 0.3)])
def test_optional_cutoff_matches_exact(point):
    # the 60-log-unit inner-sum truncation is indistinguishable from the
    # full recursion at localized parameters
    kern = build_srw_kernel(3000)
    d = sample_disorder(DisorderLaw.GAUSSIAN, DisorderLaw.GAUSSIAN, 3000,
                        point.h, 51, 0)
    exact = log_partition_curve(d, point, kern)
    trunc = log_partition_curve(d, point, kern, cutoff=60.0)
    assert np.allclose(trunc, exact, rtol=0, atol=1e-9)
    loose = log_partition_curve(d, point, kern, cutoff=20.0)
    assert np.allclose(loose, exact, rtol=0, atol=1e-6)
