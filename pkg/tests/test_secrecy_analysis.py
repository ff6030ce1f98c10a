"""
Closed forms: wiretap CDFs against direct quadrature of the PPP functional,
delay and interception laws against their combinatorial definitions.
"""

import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from core.errors import ContractError, DomainError, InfeasibleConfigurationError
from core.secrecy_analysis import (
    cdf_T_E, ce_ccdf, ce_laplace, ce_laplace_exponent, confidential_frames, delay_violation,
    eve_capture_probability, eve_cdf, file_intercept_probability, intercept_probability, lambda_slot_failure,
    min_secure_Ls, n_bar_bg, nce_cdf, omega_outage, p_bg_k, pmf_T_D, public_rate_pmf, qvp,
    slots_for_packets, tilde_N,
)
from core.system_model import (
    ImageSpec, SystemConfig, TxParams, divisors, rate_threshold, slot_type_probabilities,
)

# Alternating sums of the colluding-Eve CCDF carry quadrature noise of this order
TOL = 1e-6
# Negative binomial tail left out of "sum to infinity" checks
NBINOM_TAIL = 1e-12


def gains(cfg, tx):
    a1 = tx.zeta * tx.P_s / cfg.sigma_n
    a2 = (1 - tx.zeta) * tx.P_s / cfg.sigma_n / (cfg.n_T - 1)
    return a1, a2


def nce_cdf_by_quadrature(cfg, tx, omega):
    """exp(-2 pi lambda int r P(SINR(r) > omega) dr) with the AN averaged out."""
    a1, a2 = gains(cfg, tx)
    radial, _ = integrate.quad(lambda r: r * math.exp(-omega * r ** cfg.eta / a1), 0, np.inf)
    an_factor = (1 + omega * a2 / a1) ** (-(cfg.n_T - 1))
    return math.exp(-2 * math.pi * cfg.lambda_E * an_factor * radial)


def ce_exponent_by_quadrature(cfg, tx, s):
    """2 pi lambda int r E[1 - exp(-s SINR(r))] dr, integrating r first in closed form."""
    a1, a2 = gains(cfg, tx)
    p = 2.0 / cfg.eta - 1.0
    radial = special.beta(2 / cfg.eta, 1 - 2 / cfg.eta) / cfg.eta
    moment, _ = integrate.quad(
        lambda v: stats.gamma.pdf(v, cfg.n_T - 1) * (a2 * v + a1 * s) ** p, 0, np.inf)
    return 2 * math.pi * cfg.lambda_E * s * a1 * radial * moment


class TestWiretapCdf:
    @pytest.mark.parametrize("omega", [0.1, 2.03, 10.0, 80.0])
    def test_nce_matches_quadrature(self, cfg, tx, omega):
        assert nce_cdf(cfg, tx, omega) == pytest.approx(nce_cdf_by_quadrature(cfg, tx, omega), rel=1e-7)

    def test_nce_monotone(self, cfg, tx):
        values = [nce_cdf(cfg, tx, w) for w in (0.5, 1.0, 4.0, 16.0)]
        assert values == sorted(values)

    def test_no_eves(self, tx, nce, ce):
        cfg = SystemConfig(lambda_E=0.0)
        assert nce_cdf(cfg, tx, 1.0) == 1.0
        assert ce_laplace(cfg, tx, 3.0) == 1.0
        assert ce_ccdf(cfg, tx, ce, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert eve_cdf(cfg, tx, nce, 1.0) == 1.0

    @pytest.mark.parametrize("s", [0.01, 0.3, 2.0])
    def test_ce_laplace_matches_quadrature(self, cfg, tx, s):
        assert ce_laplace_exponent(cfg, tx, s) == pytest.approx(ce_exponent_by_quadrature(cfg, tx, s), rel=1e-6)

    def test_ce_laplace_at_zero(self, cfg, tx):
        assert ce_laplace(cfg, tx, 0.0) == 1.0

    def test_ce_laplace_without_an(self, cfg):
        tx = TxParams(zeta=1.0, P_p=1000.0, P_s=1000.0, nu=1.0, L_s=10)
        s = 0.2
        radial = special.beta(0.5, 0.5) / cfg.eta
        expected = 2 * math.pi * cfg.lambda_E * radial * (1000.0 * s) ** 0.5
        assert ce_laplace_exponent(cfg, tx, s) == pytest.approx(expected, rel=1e-10)

    def test_ce_ccdf_is_probability_and_decreasing(self, cfg, tx, ce):
        values = [ce_ccdf(cfg, tx, ce, w) for w in (2.0, 8.0, 32.0, 128.0)]
        assert all(0.0 <= v <= 1.0 for v in values)
        assert all(later <= earlier + TOL for earlier, later in zip(values, values[1:]))

    def test_ce_ccdf_grows_with_density(self, tx, ce):
        values = [ce_ccdf(SystemConfig(lambda_E=lam), tx, ce, 2.03) for lam in (0.05, 0.2, 1.0)]
        assert all(later >= earlier - TOL for earlier, later in zip(values, values[1:]))

    def test_invalid_omega(self, cfg, tx, ce):
        with pytest.raises(DomainError):
            nce_cdf(cfg, tx, 0.0)
        with pytest.raises(DomainError):
            ce_ccdf(cfg, tx, ce, -1.0)


class TestPublicStream:
    def test_pmf_sums_to_one(self, cfg, tx):
        assert public_rate_pmf(cfg, tx).sum() == pytest.approx(1.0, abs=1e-9)

    def test_p_bg_k_out_of_support(self, cfg, tx):
        assert p_bg_k(cfg, tx, 10_000) == 0.0
        with pytest.raises(DomainError):
            p_bg_k(cfg, tx, -1)

    def test_n_bar_bg(self, cfg, tx):
        pmf = public_rate_pmf(cfg, tx)
        mean_rate = float(np.dot(np.arange(len(pmf)), pmf))
        assert n_bar_bg(cfg, tx, 40) == math.ceil(40 / mean_rate)
        assert n_bar_bg(cfg, tx, 0) == 0

    def test_slots_for_exact_multiple(self):
        assert slots_for_packets(40, 8.0) == 5
        assert slots_for_packets(41, 8.0) == 6

    def test_no_public_capacity(self):
        with pytest.raises(InfeasibleConfigurationError):
            slots_for_packets(10, 0.0)


class TestConfidentialStream:
    def test_frames(self, tx, img):
        assert confidential_frames(tx, img) == 6
        with pytest.raises(ContractError):
            confidential_frames(tx, ImageSpec(N_roi=25, N_bg=0, D_lim=5))

    def test_omega_outage(self, cfg):
        tx = TxParams(zeta=0.5, P_p=1000.0, P_s=1000.0, nu=6.0, L_s=30)
        rho2 = cfg.rho ** 2
        kappa_s = rho2 * tx.zeta * tx.P_s / ((1 - rho2) * tx.P_s + cfg.r_D ** cfg.eta)
        theta = rate_threshold(30, cfg.ratio_BT_b)
        expected = ((special.gammainc(8, theta / kappa_s) - special.gammainc(8, 6.0))
                    / special.gammaincc(8, 6.0))
        assert omega_outage(cfg, tx) == pytest.approx(expected, rel=1e-10)

    def test_omega_zero_when_threshold_below_nu(self, cfg, tx):
        assert omega_outage(cfg, TxParams(zeta=0.5, P_p=1000.0, P_s=1000.0, nu=20.0, L_s=1)) == 0.0

    def test_pmf_T_D_negative_binomial(self, cfg):
        tx = TxParams(zeta=0.5, P_p=1000.0, P_s=1000.0, nu=0.0, L_s=30)
        img = ImageSpec(N_roi=60, N_bg=0, D_lim=10)
        omega = omega_outage(cfg, tx)
        m = 2
        for k in range(m, 12):
            expected = math.comb(k - 1, m - 1) * (1 - omega) ** m * omega ** (k - m)
            assert pmf_T_D(cfg, tx, img, k) == pytest.approx(expected, rel=1e-9, abs=1e-15)
        assert pmf_T_D(cfg, tx, img, 1) == 0.0

    def test_pmf_sums_to_one(self, cfg, tx, img):
        m = confidential_frames(tx, img)
        n_tilde = tilde_N(cfg, tx, img)
        last = n_tilde + int(stats.nbinom.isf(NBINOM_TAIL, m, 1 - omega_outage(cfg, tx)))
        total = sum(pmf_T_D(cfg, tx, img, k) for k in range(last + 1))
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_delay_violation_is_pmf_tail(self, cfg):
        tx = TxParams(zeta=0.5, P_p=1000.0, P_s=1000.0, nu=0.0, L_s=30)
        img = ImageSpec(N_roi=60, N_bg=0, D_lim=6)
        head = sum(pmf_T_D(cfg, tx, img, k) for k in range(img.D_lim + 1))
        assert delay_violation(cfg, tx, img) == pytest.approx(1.0 - head, rel=1e-9)

    def test_deadline_below_minimum(self, cfg, tx):
        img = ImageSpec(N_roi=60, N_bg=40, D_lim=3)
        assert img.D_lim < tilde_N(cfg, tx, img)
        assert delay_violation(cfg, tx, img) == 1.0


class TestEavesdropping:
    def test_lambda_is_complement_of_ip(self, cfg, tx, nce, ce):
        for scenario in (nce, ce):
            assert lambda_slot_failure(cfg, tx, scenario) == pytest.approx(
                1.0 - intercept_probability(cfg, tx, scenario), abs=1e-12)

    def test_no_eves(self, tx, nce):
        cfg = SystemConfig(lambda_E=0.0)
        assert lambda_slot_failure(cfg, tx, nce) == 1.0
        assert intercept_probability(cfg, tx, nce) == 0.0

    def test_ip_bounded_by_psi1(self, cfg, tx, nce):
        assert intercept_probability(cfg, tx, nce) <= special.gammaincc(cfg.n_T, tx.nu)

    def test_ip_decreases_with_frame_size(self, cfg, nce):
        ips = [intercept_probability(cfg, TxParams(0.5, 1000.0, 1000.0, 6.0, L), nce) for L in (1, 5, 10, 20)]
        assert ips == sorted(ips, reverse=True)

    def test_cdf_T_E_negative_binomial(self, cfg, exact_tx, exact_img, nce):
        lam = lambda_slot_failure(cfg, exact_tx, nce)
        m = 6
        for k in (5, 6, 9, 15):
            expected = 0.0 if k < m else sum(
                math.comb(j - 1, m - 1) * (1 - lam) ** m * lam ** (j - m) for j in range(m, k + 1))
            assert cdf_T_E(cfg, exact_tx, exact_img, nce, k) == pytest.approx(expected, rel=1e-9, abs=1e-15)

    def test_cdf_T_E_without_roi(self, cfg, tx, nce):
        assert cdf_T_E(cfg, tx, ImageSpec(N_roi=0, N_bg=10, D_lim=10), nce, 50) == 0.0


class TestQvp:
    def test_decomposition(self, cfg, tx, img, nce):
        b = qvp(cfg, tx, img, nce)
        assert b.qvp == pytest.approx(b.delay_violation + b.intercept_term)
        assert 0.0 <= b.intercept_term <= 1.0 - b.delay_violation + 1e-12
        assert b.N_tilde == b.N_bar_bg + 6
        assert b.delay_violation == pytest.approx(delay_violation(cfg, tx, img))

    def test_exact_regime_sum(self, cfg, exact_tx, exact_img, nce):
        b = qvp(cfg, exact_tx, exact_img, nce)
        expected = sum(pmf_T_D(cfg, exact_tx, exact_img, k) * cdf_T_E(cfg, exact_tx, exact_img, nce, k)
                       for k in range(exact_img.D_lim + 1))
        assert b.intercept_term == pytest.approx(expected, rel=1e-9)
        assert b.N_bar_bg == 0

    def test_no_eves(self, tx, img, nce):
        b = qvp(SystemConfig(lambda_E=0.0), tx, img, nce)
        assert b.intercept_term == 0.0
        assert b.Lambda == 1.0

    def test_missed_deadline(self, cfg, tx, nce):
        b = qvp(cfg, tx, ImageSpec(N_roi=60, N_bg=40, D_lim=3), nce)
        assert b.qvp == 1.0
        assert b.intercept_term == 0.0

    def test_fip_grows_with_deadline(self, cfg, exact_tx, nce):
        values = [file_intercept_probability(cfg, exact_tx, ImageSpec(60, 0, D), nce) for D in (6, 8, 12, 40)]
        assert values == sorted(values)

    def test_ce_qvp_grows_with_density(self, tx, img, ce):
        values = [qvp(SystemConfig(lambda_E=lam), tx, img, ce).qvp for lam in (0.05, 0.2, 1.0)]
        assert all(later >= earlier - TOL for earlier, later in zip(values, values[1:]))

    def test_public_packets_without_public_slots(self, cfg, exact_tx, nce):
        with pytest.raises(InfeasibleConfigurationError):
            qvp(cfg, exact_tx, ImageSpec(N_roi=60, N_bg=10, D_lim=40), nce)


class TestSharedSlotInterception:
    def test_matches_race_without_public_slots(self, cfg, exact_tx, exact_img, nce, ce):
        for scenario in (nce, ce):
            b = qvp(cfg, exact_tx, exact_img, scenario)
            assert b.intercept_shared == pytest.approx(b.intercept_term, rel=1e-9, abs=1e-12)
            assert b.qvp_shared == pytest.approx(b.qvp, rel=1e-9, abs=1e-12)

    def test_all_sent_frames_captured_without_outage(self, cfg, tx, img, nce):
        b = qvp(cfg, tx, img, nce)
        assert b.Omega == 0.0
        m = confidential_frames(tx, img)
        expected = eve_capture_probability(cfg, tx, nce) ** m * (1.0 - b.delay_violation)
        assert b.intercept_shared == pytest.approx(expected, rel=1e-9)

    def test_below_race_with_public_slots(self, cfg, tx, img, nce):
        b = qvp(cfg, tx, img, nce)
        assert b.N_bar_bg > 0
        assert b.intercept_shared < b.intercept_term

    def test_bounds(self, cfg, tx, nce, ce):
        for D_lim in (3, 20, 30, 60):
            for scenario in (nce, ce):
                b = qvp(cfg, tx, ImageSpec(N_roi=60, N_bg=40, D_lim=D_lim), scenario)
                assert b.delay_violation <= b.qvp_shared <= 1.0 + 1e-12
                assert b.qvp_shared == pytest.approx(b.delay_violation + b.intercept_shared)

    def test_capture_is_ip_over_psi1(self, cfg, tx, nce):
        _, pr_psi1 = slot_type_probabilities(cfg, tx)
        assert eve_capture_probability(cfg, tx, nce) * pr_psi1 == pytest.approx(
            intercept_probability(cfg, tx, nce), rel=1e-12)

    def test_no_eves(self, tx, img, nce):
        assert eve_capture_probability(SystemConfig(lambda_E=0.0), tx, nce) == 0.0
        assert qvp(SystemConfig(lambda_E=0.0), tx, img, nce).intercept_shared == 0.0

    def test_fip_selector(self, cfg, tx, img, nce):
        b = qvp(cfg, tx, img, nce)
        assert file_intercept_probability(cfg, tx, img, nce, shared_slots=True) == b.intercept_shared
        assert file_intercept_probability(cfg, tx, img, nce) == b.intercept_term


class TestMinSecureLs:
    def test_smallest_feasible_divisor(self, cfg, tx, nce):
        eps = 0.05
        L_s = min_secure_Ls(cfg, tx, nce, eps, 60)
        assert 60 % L_s == 0
        assert intercept_probability(cfg, TxParams(0.5, 1000.0, 1000.0, 6.0, L_s), nce) <= eps
        for d in divisors(60):
            if d < L_s:
                assert intercept_probability(cfg, TxParams(0.5, 1000.0, 1000.0, 6.0, d), nce) > eps

    def test_no_eves_gives_one(self, tx, nce):
        assert min_secure_Ls(SystemConfig(lambda_E=0.0), tx, nce, 0.1, 60) == 1

    def test_infeasible(self, cfg, tx, nce):
        with pytest.raises(InfeasibleConfigurationError):
            min_secure_Ls(cfg, tx, nce, 1e-9, 7)

    def test_invalid_eps(self, cfg, tx, nce):
        with pytest.raises(DomainError):
            min_secure_Ls(cfg, tx, nce, 1.0, 60)
