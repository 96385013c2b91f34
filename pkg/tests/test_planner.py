"""Tests for the capacity-planning bounds, constants, and machine counts.

Strategy: closed-form quantities are checked against values computed from
independent expressions (often re-derived inline); the simplex optimizer is
checked against a brute-force grid search; the Monte Carlo bound is checked
against quadrature of its sampling density and against the analytic bounds
it must never exceed.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from heavyq.halfin_whitt import hw_solve_psi
from heavyq.models import HyperExpService, RngStream
from heavyq.planner import (
    BoundedWait,
    MinimalWait,
    NormalizedQueueDensity,
    ProbabilisticWait,
    ZeroWait,
    bwt_tau,
    kingman_wait_tail,
    machines_for,
    machines_for_rate,
    mwt_bounds,
    mwt_upper_levy,
    mwt_upper_optimized,
    mwt_upper_poisson,
    pwt_gamma,
    tightness_ratio,
)

HYPER = HyperExpService((1.0, 8.0, 20.0), (0.6, 0.25, 0.15))
EXP03 = HyperExpService.exponential(0.3)


def random_service(rng: RngStream, k: int) -> HyperExpService:
    """A k-branch mixture with well-separated rates and non-trivial weights."""
    gen = rng.generator
    rates = [math.exp(gen.uniform(math.log(0.2), math.log(3.0)))]
    for _ in range(k - 1):
        rates.append(rates[-1] * math.exp(gen.uniform(math.log(1.3), math.log(3.0))))
    raw = gen.gamma(1.0, 1.0, k) + 0.05
    weights = raw / raw.sum()
    return HyperExpService(tuple(rates), tuple(weights))


class TestMwtBounds:
    def test_known_three_branch_values(self):
        b = mwt_bounds(HYPER, 1.0, 0.005)
        assert b.lower == pytest.approx(2.5339436346953863, rel=1e-12)
        assert b.upper == pytest.approx(3.8489333968792496, rel=1e-12)
        assert b.psi_lower.psi == pytest.approx(2.61448877479286, rel=1e-12)
        assert b.psi_upper.psi == pytest.approx(2.963593137402544, rel=1e-12)
        assert b.argmax_branch == 0  # sqrt(p/r) is largest for the slow branch

    def test_upper_recomputable_from_parts(self):
        """U = sqrt(mu) * sum_i beta_U^(i) sqrt(p_i/r_i), same for L with max."""
        b = mwt_bounds(HYPER, 0.7, 0.01)
        sqrt_mu = math.sqrt(HYPER.mu)
        terms_u = [
            beta * math.sqrt(w / r)
            for beta, w, r in zip(b.beta_upper, HYPER.weights, HYPER.rates)
        ]
        terms_l = [
            beta * math.sqrt(w / r)
            for beta, w, r in zip(b.beta_lower, HYPER.weights, HYPER.rates)
        ]
        assert b.upper == pytest.approx(sqrt_mu * math.fsum(terms_u), rel=1e-14)
        assert b.lower == pytest.approx(sqrt_mu * max(terms_l), rel=1e-14)
        assert b.argmax_branch == terms_l.index(max(terms_l))

    def test_beta_scaling_with_arrival_cv(self):
        """beta^(i) = (1 + (c^2 - 1) p_i / 2) * psi branch by branch."""
        c = 0.5
        b = mwt_bounds(HYPER, c, 0.005)
        for beta, w in zip(b.beta_upper, HYPER.weights):
            assert beta == pytest.approx(
                (1.0 + (c * c - 1.0) * w / 2.0) * b.psi_upper.psi, rel=1e-14
            )
        assert b.upper == pytest.approx(3.1231498813982213, rel=1e-12)
        assert b.lower == pytest.approx(1.9638063168889244, rel=1e-12)

    def test_exponential_service_collapses(self):
        """One branch: the sandwich pinches, U == L == psi(alpha)."""
        for alpha in (0.005, 0.05, 0.5):
            b = mwt_bounds(HyperExpService.exponential(1.7), 1.0, alpha)
            assert b.lower == b.upper
            # sqrt(mu) * psi * sqrt(1/mu) can differ from psi by an ulp
            assert b.upper == pytest.approx(hw_solve_psi(alpha).psi, rel=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32),
        k=st.integers(min_value=1, max_value=6),
        alpha=st.floats(min_value=1e-4, max_value=0.9),
        c=st.floats(min_value=0.0, max_value=3.0),
    )
    def test_sandwich_property(self, seed, k, alpha, c):
        svc = random_service(RngStream(seed, 0), k)
        b = mwt_bounds(svc, c, alpha)
        assert b.lower <= b.upper
        assert b.lower > 0.0
        assert b.psi_upper.psi >= b.psi_lower.psi  # alpha/k is a harder target
        assert 0 <= b.argmax_branch < k

    @pytest.mark.parametrize("alpha", [0.0, 1.5, -0.1])
    def test_rejects_bad_alpha(self, alpha):
        with pytest.raises(ValueError):
            mwt_bounds(HYPER, 1.0, alpha)


class TestMwtUpperPoisson:
    def test_known_value(self):
        assert mwt_upper_poisson(HYPER, 0.005) == pytest.approx(3.8482762357739135, rel=1e-12)

    def test_never_exceeds_plain_upper(self):
        rng = RngStream(77, 0)
        for _ in range(100):
            k = int(rng.generator.integers(1, 7))
            svc = random_service(rng, k)
            alpha = float(np.exp(rng.generator.uniform(np.log(1e-3), np.log(0.5))))
            assert mwt_upper_poisson(svc, alpha) <= mwt_bounds(svc, 1.0, alpha).upper

    def test_exact_at_one_branch(self):
        svc = HyperExpService.exponential(2.0)
        assert mwt_upper_poisson(svc, 0.01) == mwt_bounds(svc, 1.0, 0.01).upper

    def test_tighter_per_queue_target(self):
        """1 - (1-alpha)^(1/k) > alpha/k makes each queue's job easier."""
        alpha, k = 0.05, 4
        per_queue = -math.expm1(math.log1p(-alpha) / k)
        assert per_queue > alpha / k
        assert mwt_upper_poisson(HYPER, alpha) < mwt_bounds(HYPER, 1.0, alpha).upper


class TestMwtUpperOptimized:
    def test_known_value_and_budget(self):
        value, alphas = mwt_upper_optimized(HYPER, 1.0, 0.005)
        assert value == pytest.approx(3.690178530040723, rel=1e-9)
        assert math.fsum(alphas) == pytest.approx(0.005, abs=1e-15)
        assert all(a > 0 for a in alphas)
        # harder branches get more budget: weights sqrt(p/r) decrease here
        assert alphas[0] > alphas[1] > alphas[2]

    def test_beats_brute_force_grid(self):
        """The coordinate-descent optimum must match a simplex grid search."""
        alpha = 0.005
        weights = [math.sqrt(w / r) for w, r in zip(HYPER.weights, HYPER.rates)]
        sqrt_mu = math.sqrt(HYPER.mu)
        cache = {}

        def psi(a: float) -> float:
            if a not in cache:
                cache[a] = hw_solve_psi(a).psi
            return cache[a]

        floor = alpha * 1e-4
        best = math.inf
        for a1 in np.linspace(floor, alpha - 2 * floor, 60):
            for a2 in np.linspace(floor, alpha - a1 - floor, 60):
                a3 = alpha - a1 - a2
                if a3 < floor:
                    continue
                v = weights[0] * psi(a1) + weights[1] * psi(a2) + weights[2] * psi(a3)
                best = min(best, v)
        best *= sqrt_mu
        value, _ = mwt_upper_optimized(HYPER, 1.0, alpha)
        assert value <= best + 1e-12  # at least as good as the coarse grid
        assert value >= best * (1.0 - 2e-3)  # and not implausibly below it

    def test_no_worse_than_uniform_split(self):
        rng = RngStream(5150, 0)
        for _ in range(40):
            k = int(rng.generator.integers(2, 7))
            svc = random_service(rng, k)
            alpha = float(np.exp(rng.generator.uniform(np.log(1e-3), np.log(0.5))))
            value, alphas = mwt_upper_optimized(svc, 1.0, alpha)
            upper = mwt_bounds(svc, 1.0, alpha).upper
            assert value <= upper + 1e-12 * upper
            assert math.fsum(alphas) == pytest.approx(alpha, rel=1e-12)

    def test_exact_at_one_branch(self):
        svc = HyperExpService.exponential(0.4)
        value, alphas = mwt_upper_optimized(svc, 1.0, 0.02)
        assert value == mwt_bounds(svc, 1.0, 0.02).upper
        assert alphas == (0.02,)


class TestNormalizedQueueDensity:
    def test_density_integrates_to_one(self):
        d = NormalizedQueueDensity(alpha=0.1, beta=1.7)
        below, _ = integrate.quad(d.pdf, -40.0, 0.0)
        above, _ = integrate.quad(d.pdf, 0.0, 60.0)
        assert below + above == pytest.approx(1.0, rel=1e-8)
        assert above == pytest.approx(0.1, rel=1e-8)  # mass above 0 is alpha

    def test_exponential_tail_above_zero(self):
        d = NormalizedQueueDensity(alpha=0.2, beta=0.9)
        # P(X > x | X > 0) = exp(-beta x)
        xs = np.linspace(0.1, 5.0, 8)
        for x in xs:
            tail, _ = integrate.quad(d.pdf, x, 80.0)
            assert tail == pytest.approx(0.2 * math.exp(-0.9 * x), rel=1e-7)

    def test_sampling_matches_density(self):
        d = NormalizedQueueDensity(alpha=0.15, beta=1.2)
        xs = d.sample(RngStream(31, 0), 200_000)
        frac_pos = (xs > 0).mean()
        sigma = math.sqrt(0.15 * 0.85 / 200_000)
        assert abs(frac_pos - 0.15) < 4 * sigma
        # conditional-positive part is Exp(beta)
        pos = xs[xs > 0]
        assert pos.mean() == pytest.approx(1 / 1.2, rel=0.02)
        # negative part matches the truncated-normal quadrature mean
        neg = xs[xs <= 0]
        mean_neg, _ = integrate.quad(lambda t: t * d.pdf(t), -40.0, 0.0)
        assert neg.mean() == pytest.approx(mean_neg / 0.85, rel=0.02)

    @pytest.mark.parametrize("alpha,beta", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (0.5, -2.0)])
    def test_rejects_invalid(self, alpha, beta):
        with pytest.raises(ValueError):
            NormalizedQueueDensity(alpha=alpha, beta=beta)


class TestMwtUpperLevy:
    def test_known_value_is_certified(self):
        lv = mwt_upper_levy(HYPER, 0.005, rng=RngStream(2024, 0))
        assert lv.value == pytest.approx(2.9798765077883247, rel=1e-9)
        assert lv.certified
        assert len(lv.alphas) == HYPER.k

    def test_reproducible(self):
        a = mwt_upper_levy(HYPER, 0.005, rng=RngStream(13, 4))
        b = mwt_upper_levy(HYPER, 0.005, rng=RngStream(13, 4))
        assert a == b

    def test_bracketed_by_analytic_bounds(self):
        rng = RngStream(4242, 0)
        for trial in range(8):
            k = int(rng.generator.integers(2, 7))
            svc = random_service(rng, k)
            alpha = float(np.exp(rng.generator.uniform(np.log(2e-3), np.log(0.2))))
            lv = mwt_upper_levy(svc, alpha, mc_samples=100_000, rng=RngStream(900 + trial, 0))
            bounds = mwt_bounds(svc, 1.0, alpha)
            assert lv.value <= mwt_upper_poisson(svc, alpha)  # never worse than analytic
            assert lv.value >= bounds.lower * (1.0 - 1e-9)

    def test_exact_at_one_branch(self):
        svc = HyperExpService.exponential(1.0)
        lv = mwt_upper_levy(svc, 0.05)
        assert lv.value == mwt_bounds(svc, 1.0, 0.05).upper
        assert lv.alphas == (0.05,)
        assert lv.certified

    def test_rejects_small_sample_budget(self):
        with pytest.raises(ValueError):
            mwt_upper_levy(HYPER, 0.005, mc_samples=50_000)


class TestClassConstants:
    def test_bwt_tau_values(self):
        assert bwt_tau(EXP03, 1.0, 0.5) == pytest.approx(20 / 3, rel=1e-15)
        assert bwt_tau(HYPER, 1.0, 0.5) == pytest.approx(1.8920743639921724, rel=1e-12)

    def test_exponential_tau_is_exact_floor(self):
        """mu^2 sigma^2 = 1 exactly for one branch, so tau = (1+c^2)/(2 mu t1)."""
        for mu, c, t1 in [(0.3, 1.0, 0.5), (2.7, 0.4, 1.3), (11.0, 0.0, 0.05)]:
            svc = HyperExpService.exponential(mu)
            assert bwt_tau(svc, c, t1) == (c * c + 1.0) / (2.0 * svc.mu * t1)

    @settings(max_examples=150, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32),
        k=st.integers(min_value=2, max_value=6),
        c=st.floats(min_value=0.0, max_value=3.0),
        t1=st.floats(min_value=0.05, max_value=10.0),
    )
    def test_mixing_only_raises_tau(self, seed, k, c, t1):
        """Jensen: a true mixture has scv > 1, pushing tau above the
        exponential floor by a real margin."""
        svc = random_service(RngStream(seed, 1), k)
        floor = (c * c + 1.0) / (2.0 * svc.mu * t1)
        assert bwt_tau(svc, c, t1) - floor > 1e-12

    def test_pwt_gamma_value(self):
        assert pwt_gamma(EXP03, 1.0, 1.0, 0.1) == pytest.approx(7.6752836433134854, rel=1e-12)
        # doubling the threshold halves gamma
        assert pwt_gamma(EXP03, 1.0, 2.0, 0.1) == pytest.approx(
            pwt_gamma(EXP03, 1.0, 1.0, 0.1) / 2.0, rel=1e-12
        )

    def test_kingman_tail(self):
        assert kingman_wait_tail(EXP03, 1.0, 0.9, 271, 0.5) == pytest.approx(
            0.017162989273602686, rel=1e-12
        )
        assert kingman_wait_tail(EXP03, 1.0, 0.9, 271, 0.0) == 1.0
        # decreasing in t and in n
        t_grid = [kingman_wait_tail(HYPER, 1.0, 0.9, 100, t) for t in (0.1, 0.5, 2.0)]
        assert t_grid[0] > t_grid[1] > t_grid[2]
        n_grid = [kingman_wait_tail(HYPER, 1.0, 0.9, n, 0.5) for n in (50, 100, 400)]
        assert n_grid[0] > n_grid[1] > n_grid[2]

    @pytest.mark.parametrize(
        "call",
        [
            lambda: bwt_tau(HYPER, 1.0, 0.0),
            lambda: bwt_tau(HYPER, -1.0, 1.0),
            lambda: pwt_gamma(HYPER, 1.0, 1.0, 0.0),
            lambda: pwt_gamma(HYPER, 1.0, 1.0, 1.0),
            lambda: kingman_wait_tail(HYPER, 1.0, 1.0, 10, 0.5),
            lambda: kingman_wait_tail(HYPER, 1.0, 0.5, 0, 0.5),
        ],
    )
    def test_rejects_invalid(self, call):
        with pytest.raises(ValueError):
            call()


class TestMachinesFor:
    def test_reference_counts_at_rho_09(self):
        assert machines_for(ZeroWait(0.25), EXP03, 1.0, 0.9).n == 10000
        assert machines_for(BoundedWait(0.5, 0.25), EXP03, 1.0, 0.9).n == 271
        assert machines_for(ProbabilisticWait(1.0, 0.1), EXP03, 1.0, 0.9).n == 77

    def test_zero_wait_float_noise_does_not_inflate(self):
        """(1/(1-0.9))**4 lands a hair above 10000 in floats; the count must
        still be 10000, not 10001."""
        assert (1.0 / (1.0 - 0.9)) ** 4.0 > 10000.0
        assert machines_for(ZeroWait(0.25), EXP03, 1.0, 0.9).n == 10000

    def test_minimal_wait_pair(self):
        res = machines_for(MinimalWait(0.005), HYPER, 1.0, 0.9)
        assert (res.n_lo, res.n_hi, res.n) == (643, 1482, 1482)
        res85 = machines_for(MinimalWait(0.005), HYPER, 1.0, 0.85)
        assert (res85.n_lo, res85.n_hi) == (286, 659)

    def test_bounded_wait_counts(self):
        assert machines_for(BoundedWait(0.5, 0.25), HYPER, 1.0, 0.85).n == 30
        assert machines_for(BoundedWait(0.5, 0.25), HYPER, 1.0, 0.9).n == 51
        assert machines_for(BoundedWait(0.5, 0.25), EXP03, 1.0, 0.85).n == 158

    @pytest.mark.parametrize("rho", [0.8, 0.9, 0.95, 0.99])
    def test_counts_are_minimal(self, rho):
        """n satisfies each class inequality and n-1 does not."""
        slack = 1.0 - rho
        tol = 1e-9

        n = machines_for(ZeroWait(0.3), HYPER, 1.0, rho).n
        need = slack ** (-1.0 / 0.3)
        assert n >= need - tol * need
        assert n - 1 < need

        n = machines_for(BoundedWait(0.7, 0.3), HYPER, 1.0, rho).n
        need = (bwt_tau(HYPER, 1.0, 0.7) / slack) ** (1.0 / 0.7)
        assert n >= need - tol * need
        assert n - 1 < need

        n = machines_for(ProbabilisticWait(1.0, 0.05), HYPER, 1.0, rho).n
        need = pwt_gamma(HYPER, 1.0, 1.0, 0.05) / slack
        assert n >= need - tol * need
        assert n - 1 < need

        res = machines_for(MinimalWait(0.01), HYPER, 1.0, rho)
        b = mwt_bounds(HYPER, 1.0, 0.01)
        for n, bound in ((res.n_lo, b.lower), (res.n_hi, b.upper)):
            need = (bound / slack) ** 2
            assert n >= need - tol * need
            assert n - 1 < need

    def test_constants_allow_recomputation(self):
        res = machines_for(BoundedWait(0.5, 0.25), HYPER, 1.0, 0.9)
        tau = res.constants["tau"]
        assert res.n == math.ceil((tau / 0.1) ** (1 / 0.75) - 1e-9 * (tau / 0.1) ** (1 / 0.75))

    @pytest.mark.parametrize("rho", [0.0, 1.0, -0.5, 1.5, math.nan])
    def test_rejects_bad_rho(self, rho):
        with pytest.raises(ValueError):
            machines_for(ZeroWait(0.25), HYPER, 1.0, rho)

    def test_rejects_unknown_class(self):
        with pytest.raises(ValueError):
            machines_for("zwt", HYPER, 1.0, 0.9)  # type: ignore[arg-type]


class TestMachinesForRate:
    @pytest.mark.parametrize(
        "qos",
        [
            ZeroWait(0.25),
            MinimalWait(0.005),
            BoundedWait(0.5, 0.25),
            ProbabilisticWait(1.0, 0.1),
        ],
    )
    @pytest.mark.parametrize("lam", [3.0, 40.0, 800.0])
    def test_count_meets_class_rule_minimally(self, qos, lam):
        res = machines_for_rate(qos, HYPER, 1.0, lam)
        offered = lam / HYPER.mu
        assert 0.0 < res.rho < 1.0
        assert res.rho == pytest.approx(lam / (res.n * HYPER.mu), rel=1e-12)

        def slack_needed(n: int) -> float:
            """Required decay of 1 - rho_n at count n, by class."""
            if isinstance(qos, ZeroWait):
                return n ** (-qos.k1)
            if isinstance(qos, MinimalWait):
                return mwt_bounds(HYPER, 1.0, qos.alpha).upper / math.sqrt(n)
            if isinstance(qos, BoundedWait):
                return bwt_tau(HYPER, 1.0, qos.t1) * n ** (qos.p - 1.0)
            return pwt_gamma(HYPER, 1.0, qos.t2, qos.delta) / n

        n = res.n
        assert 1.0 - lam / (n * HYPER.mu) >= slack_needed(n) * (1.0 - 1e-9)
        if n > 1 and offered / (n - 1) < 1.0:
            assert 1.0 - lam / ((n - 1) * HYPER.mu) < slack_needed(n - 1)

    def test_minimal_wait_reports_both_counts(self):
        res = machines_for_rate(MinimalWait(0.005), HYPER, 1.0, 200.0)
        assert res.n_lo == 160 and res.n_hi == 180 and res.n == 180
        assert res.constants["lambda"] == 200.0

    def test_consistent_with_rho_form(self):
        """Re-sizing at the achieved utilization never needs more machines.

        In rate mode the slack 1 - lambda/(n mu) grows with n, so the count
        that fixes the slack at its achieved value can only be smaller.
        """
        for qos in (ZeroWait(0.25), BoundedWait(0.5, 0.25), ProbabilisticWait(1.0, 0.1)):
            res = machines_for_rate(qos, HYPER, 1.0, 123.0)
            again = machines_for(qos, HYPER, 1.0, res.rho)
            assert again.n <= res.n

    @pytest.mark.parametrize("lam", [0.0, -2.0, math.inf])
    def test_rejects_bad_rate(self, lam):
        with pytest.raises(ValueError):
            machines_for_rate(ZeroWait(0.25), HYPER, 1.0, lam)


class TestQosValidation:
    @pytest.mark.parametrize(
        "build",
        [
            lambda: ZeroWait(0.0),
            lambda: ZeroWait(-1.0),
            lambda: MinimalWait(0.0),
            lambda: MinimalWait(1.5),
            lambda: BoundedWait(0.0, 0.25),
            lambda: BoundedWait(1.0, 0.5),  # p must stay below 1/2
            lambda: BoundedWait(1.0, 0.0),
            lambda: ProbabilisticWait(0.0, 0.1),
            lambda: ProbabilisticWait(1.0, 0.0),
            lambda: ProbabilisticWait(1.0, 1.0),
        ],
    )
    def test_rejects_out_of_range_parameters(self, build):
        with pytest.raises(ValueError):
            build()


class TestTightnessRatio:
    def test_known_value(self):
        r, r1, r2 = tightness_ratio(HYPER, 1.0, 0.005)
        assert r1 == pytest.approx(1.133526816399257, rel=1e-12)
        assert r2 == pytest.approx(1.3400211311688088, rel=1e-12)
        assert r == pytest.approx(1.518949886721511, rel=1e-12)

    def test_ratio_decomposition(self):
        b = mwt_bounds(HYPER, 1.0, 0.005)
        r, r1, r2 = tightness_ratio(HYPER, 1.0, 0.005)
        assert r == pytest.approx(b.upper / b.lower, rel=1e-12)
        assert r == r1 * r2

    def test_one_branch_is_tight(self):
        r, r1, r2 = tightness_ratio(HyperExpService.exponential(0.5), 1.0, 0.37)
        assert (r, r1, r2) == (1.0, 1.0, 1.0)

    @settings(max_examples=80, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32),
        k=st.integers(min_value=1, max_value=6),
        alpha=st.floats(min_value=1e-4, max_value=0.9),
    )
    def test_component_ranges(self, seed, k, alpha):
        svc = random_service(RngStream(seed, 2), k)
        r, r1, r2 = tightness_ratio(svc, 1.0, alpha)
        assert r1 >= 1.0
        assert 1.0 <= r2 <= k + 1e-12
        assert r >= 1.0
