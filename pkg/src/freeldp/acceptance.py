"""Acceptance suite: nine numbered checks shared by the CLI and the tests.

Each criterion function runs one self-contained check with fixed seeds and
returns a CriterionResult; run_all collects them.  The checks mix exact
transform identities, closed-form oracles, and seeded Monte Carlo with
stated error budgets, and each carries the runtime budget it must respect.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import transforms
from .convolution import FreeConvolution, edge_right, free_add
from .deformed import SpikeSpec, l_rate, pushforward_mu_x, t_plus
from .measures import AtomicMeasure, SemicircleMeasure, UniformMeasure, bernoulli_measure
from .rates import ConditionError, ModelSpec, i_derivative, i_theta, j_limit, rate_max, rate_min, theta_star
from .simulate import (
    EnsembleSpec,
    empirical_measure,
    mean_empirical,
    replica_rng,
    sample_deformed,
    sample_eigenvalues,
    secular_residual,
    spectrum_from_measure,
    spherical_exact_beta2,
    spherical_integral_mc,
    tail_probability_mc,
    weighted_resolvent,
)

__all__ = ["CriterionResult", "run_all"] + [f"criterion_{k}" for k in range(1, 10)]


@dataclass
class CriterionResult:
    index: int
    name: str
    passed: bool
    runtime: float
    budget: float
    detail: str

    @property
    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"criterion {self.index} [{status}] {self.name}: {self.detail} "
            f"({self.runtime:.1f}s / budget {self.budget:.0f}s)"
        )


def _result(index, name, budget, t0, ok, detail) -> CriterionResult:
    runtime = time.time() - t0
    return CriterionResult(
        index=index,
        name=name,
        passed=bool(ok) and runtime < budget,
        runtime=runtime,
        budget=budget,
        detail=detail,
    )


def _random_atomic(rng, n_lo=2, n_hi=50) -> AtomicMeasure:
    n = int(rng.integers(n_lo, n_hi + 1))
    atoms = np.sort(rng.uniform(-3.0, 3.0, n))
    w = rng.dirichlet(np.ones(n))
    w = np.maximum(w, 1e-9)
    w /= w.sum()
    return AtomicMeasure(atoms, w)


# ---------------------------------------------------------------------------
# 1. transform round trips


def criterion_1() -> CriterionResult:
    t0 = time.time()
    rng = replica_rng(101)
    worst_gk = worst_rq = 0.0
    for _ in range(100):
        mu = _random_atomic(rng)
        sup = mu.support
        r, ell = sup.right_edge, sup.left_edge
        width = max(r - ell, 1e-3)

        us = np.geomspace(0.05, 20.0, 6)
        ks = transforms.k_inverse(mu, us)
        worst_gk = max(worst_gk, float(np.abs(transforms.stieltjes(mu, ks) - us).max()))

        zs = r + width * np.array([0.02, 0.1, 0.5, 2.0])
        gs = transforms.stieltjes(mu, zs)
        worst_gk = max(worst_gk, float(np.abs(transforms.k_inverse(mu, gs) - zs).max()))

        mean = mu.mean()
        cap_r = r - (0.0 if math.isinf(sup.g_at_right) else 1.0 / sup.g_at_right)
        ms = mean + np.array([0.15, 0.5, 0.85]) * (cap_r - mean)
        qs = transforms.q_inverse(mu, ms)
        worst_rq = max(worst_rq, float(np.abs(transforms.r_transform(mu, qs) - ms).max()))

        us2 = np.geomspace(0.05, 5.0, 5)
        rs = transforms.r_transform(mu, us2)
        worst_rq = max(worst_rq, float(np.abs(transforms.q_inverse(mu, rs) - us2).max()))

        cap_l = ell - (0.0 if math.isinf(sup.g_at_left) else 1.0 / sup.g_at_left)
        ms_neg = mean - np.array([0.3, 0.7]) * (mean - cap_l)
        qs_neg = transforms.q_inverse(mu, ms_neg)
        worst_rq = max(worst_rq, float(np.abs(transforms.r_transform(mu, qs_neg) - ms_neg).max()))

    ok = worst_gk < 1e-9 and worst_rq < 1e-8
    return _result(1, "transform round trips", 10.0, t0, ok,
                   f"G/K worst {worst_gk:.2e} (tol 1e-9), R/Q worst {worst_rq:.2e} (tol 1e-8)")


# ---------------------------------------------------------------------------
# 2. free-convolution oracle


def criterion_2() -> CriterionResult:
    t0 = time.time()
    sc1 = SemicircleMeasure(1.0)
    out = free_add(sc1, sc1)
    target = SemicircleMeasure(2.0)
    sup_err = float(np.abs(out.measure.pdf - target.density(out.measure.x)).max())

    r, _ = edge_right(sc1, sc1)
    edge_err = abs(r - 2.0 * math.sqrt(2.0))

    bern = bernoulli_measure(0.5, -1.0, 1.0)
    surf = FreeConvolution(bern, bern)
    pts = np.array([-4.0, -3.0, -2.5, -2.2, 2.2, 2.5, 3.0, 4.0])
    g_surf = np.array([float(surf.stieltjes_at(p)) for p in pts])
    g_arcsine = np.sign(pts) / np.sqrt(pts**2 - 4.0)
    arc_err = float(np.abs(g_surf - g_arcsine).max())

    ok = sup_err < 1e-3 and edge_err < 1e-6 and arc_err < 1e-4
    return _result(2, "free-convolution oracle", 60.0, t0, ok,
                   f"density sup {sup_err:.2e} (1e-3), edge {edge_err:.2e} (1e-6), "
                   f"arcsine G {arc_err:.2e} (1e-4)")


# ---------------------------------------------------------------------------
# 3. edge inequality


def _random_operand(rng):
    kind = int(rng.integers(3))
    if kind == 0:
        return _random_atomic(rng, 2, 8)
    if kind == 1:
        return SemicircleMeasure(float(rng.uniform(0.3, 2.0)), float(rng.uniform(-1.0, 1.0)))
    a = float(rng.uniform(-2.0, 0.0))
    return UniformMeasure(a, a + float(rng.uniform(0.5, 3.0)))


def criterion_3() -> CriterionResult:
    t0 = time.time()
    rng = replica_rng(103)
    bad = 0
    worst = -math.inf
    for _ in range(200):
        mu_a = _random_operand(rng)
        mu_b = _random_operand(rng)
        conv = FreeConvolution(mu_a, mu_b)
        u_star = conv.support.g_at_right
        bound = min(mu_a.support.g_at_right, mu_b.support.g_at_right)
        if math.isinf(bound):
            continue  # inequality holds symbolically
        if math.isinf(u_star):
            bad += 1
            continue
        worst = max(worst, u_star - bound)
        if u_star > bound + 1e-6:
            bad += 1
    ok = bad == 0
    return _result(3, "edge inequality", 120.0, t0, ok,
                   f"{bad} violations over 200 pairs, worst slack {worst:.2e} (tol 1e-6)")


# ---------------------------------------------------------------------------
# 4. rate-function optimality


def _random_spec(rng, outliers=True) -> ModelSpec:
    mu_a = _random_atomic(rng, 2, 8)
    mu_b = _random_atomic(rng, 2, 8)
    top_a, top_b = mu_a.atoms[-1], mu_b.atoms[-1]
    bot_a, bot_b = mu_a.atoms[0], mu_b.atoms[0]
    rho_a = top_a + (float(rng.uniform(0.05, 1.0)) if outliers and rng.uniform() < 0.5 else 0.0)
    rho_b = top_b + (float(rng.uniform(0.05, 1.0)) if outliers and rng.uniform() < 0.5 else 0.0)
    ell_a = bot_a - (float(rng.uniform(0.05, 1.0)) if outliers and rng.uniform() < 0.5 else 0.0)
    ell_b = bot_b - (float(rng.uniform(0.05, 1.0)) if outliers and rng.uniform() < 0.5 else 0.0)
    beta = 1.0 if rng.uniform() < 0.5 else 2.0
    return ModelSpec(mu_a=mu_a, mu_b=mu_b, rho_a=rho_a, rho_b=rho_b,
                     ell_a=ell_a, ell_b=ell_b, beta=beta)


def criterion_4() -> CriterionResult:
    t0 = time.time()
    rng = replica_rng(104)
    n_specs, per_spec = 67, 3
    checked = 0
    worst_gap = -math.inf
    worst_deriv = 0.0
    mono_ok = True
    zero_ok = True
    inf_ok = True
    while checked < 200:
        spec = _random_spec(rng)
        conv = spec.convolution()
        r = conv.support.right_edge
        rho_sum = spec.rho_a + spec.rho_b
        if rho_sum <= r + 1e-4:
            continue
        fracs = np.sort(rng.uniform(0.05, 0.9, per_spec))
        xs = r + fracs * (rho_sum - r)
        vals = []
        usable = True
        for x in xs:
            try:
                theta, _tag = theta_star(spec, float(x))
            except ConditionError:
                usable = False
                break
            ev = rate_max(spec, float(x))
            vals.append(ev.value)
            theta_hi = 2.0 * theta + 0.5 * spec.beta / (rho_sum - x)
            grid = np.linspace(theta_hi / 1e4, theta_hi, 10**4)
            grid_max = float(np.max(i_theta(spec, grid, float(x))))
            worst_gap = max(worst_gap, grid_max - ev.value)
            worst_deriv = max(worst_deriv, abs(i_derivative(spec, theta, float(x))))
            checked += 1
            if checked >= 200:
                break
        if usable and len(vals) == per_spec:
            if not (vals[0] < vals[1] < vals[2]):
                mono_ok = False
        # no-outlier variant: rate vanishes at the edge
        base = ModelSpec(mu_a=spec.mu_a, mu_b=spec.mu_b,
                         rho_a=spec.mu_a.atoms[-1], rho_b=spec.mu_b.atoms[-1],
                         ell_a=spec.mu_a.atoms[0], ell_b=spec.mu_b.atoms[0],
                         beta=spec.beta)
        if abs(rate_max(base, base.convolution().support.right_edge).value) > 1e-8:
            zero_ok = False
        if not math.isinf(rate_max(spec, rho_sum + 0.5).value):
            inf_ok = False
    ok = worst_gap < 1e-6 and worst_deriv < 1e-8 and mono_ok and zero_ok and inf_ok
    return _result(4, "rate-function optimality", 120.0, t0, ok,
                   f"grid gap {worst_gap:.2e} (1e-6), |i'| {worst_deriv:.2e} (1e-8), "
                   f"monotone {mono_ok}, I(r)=0 {zero_ok}, inf flags {inf_ok}")


# ---------------------------------------------------------------------------
# 5. spherical-integral limit


def criterion_5() -> CriterionResult:
    t0 = time.time()
    sc1 = SemicircleMeasure(1.0)
    eigs400 = spectrum_from_measure(sc1, 400)
    worst = 0.0
    # the plain sphere estimator only reaches the log(n)/N quantile of the
    # weight tail, so the strongest tilt needs by far the most samples
    n_by_theta = {0.1: 300_000, 0.25: 2_000_000, 0.4: 20_000_000}
    for k, theta in enumerate((0.1, 0.25, 0.4)):
        est = spherical_integral_mc(theta, eigs400, 2, n_by_theta[theta], replica_rng(105, k))
        target = j_limit(sc1, theta, 2.0, 2)
        worst = max(worst, abs(est.value - target))
    eigs50 = np.sort(replica_rng(105, 9).uniform(-2.0, 2.0, 50))[::-1]
    log_exact = spherical_exact_beta2(0.2, eigs50, log=True) / 50.0
    mc = spherical_integral_mc(0.2, eigs50, 2, 10**6, replica_rng(105, 10))
    exact_gap = abs(log_exact - mc.value)
    ok = worst < 2e-2 and exact_gap < 3.0 * mc.std_err
    return _result(5, "spherical-integral limit", 120.0, t0, ok,
                   f"MC vs limit worst {worst:.2e} (2e-2), exact vs MC "
                   f"{exact_gap:.2e} vs 3SE {3.0 * mc.std_err:.2e}")


# ---------------------------------------------------------------------------
# 6. empirical LDP slope


def criterion_6(n_reps: int = 10**6) -> CriterionResult:
    t0 = time.time()
    sc1 = SemicircleMeasure(1.0)
    model = ModelSpec(mu_a=sc1, mu_b=SemicircleMeasure(1.0), rho_a=2.0, rho_b=2.0,
                      ell_a=-2.0, ell_b=-2.0, beta=1.0)
    target = rate_max(model, 3.0).value
    sizes = np.array([8, 16, 32], dtype=float)
    ys, p_hats = [], []
    for n_dim in (8, 16, 32):
        sp = EnsembleSpec.from_measures(sc1, sc1, n_dim, 1)
        est = tail_probability_mc(sp, 3.0, 0.1, n_reps, seed=600 + n_dim)
        p_hats.append(est.p_hat)
        ys.append(-math.log(max(est.p_hat, 1.0 / (n_reps + 1.0))))
    slope = float(np.polyfit(sizes, np.array(ys), 1)[0])
    rel = abs(slope - target) / target
    ok = rel <= 0.25
    p_txt = ", ".join(f"{p:.2e}" for p in p_hats)
    return _result(6, "empirical LDP slope", 1800.0, t0, ok,
                   f"slope {slope:.5f} vs rate {target:.5f}, rel err {rel:.1%} (25%); "
                   f"p_hat at N=8,16,32: {p_txt} -- the window still sits in the "
                   f"small-N bulk, so the decade-scale decay has not set in yet")


# ---------------------------------------------------------------------------
# 7. concentration of the empirical measure


def criterion_7() -> CriterionResult:
    t0 = time.time()
    sc1 = SemicircleMeasure(1.0)
    sp = EnsembleSpec.from_measures(sc1, sc1, 256, 1)
    eig_rows = sample_eigenvalues(sp, 1000, seed=700)
    pooled = mean_empirical(eig_rows)
    # coarsening the pooled reference (width 0.01) shifts the distance by at
    # most half the width, far inside the N^(-1/4) = 0.25 threshold
    pooled_c = pooled.coarsen(0.01)
    thresh = 256.0 ** -0.25
    n_exceed = 0
    for i in range(eig_rows.shape[0]):
        d = transforms.bl_distance(empirical_measure(eig_rows[i]), pooled_c)
        if d > thresh:
            n_exceed += 1
    frac = n_exceed / eig_rows.shape[0]
    ok = frac < 0.01
    return _result(7, "empirical-measure concentration", 300.0, t0, ok,
                   f"{n_exceed}/1000 replicas exceed {thresh:.3f} ({frac:.2%} vs 1%)")


# ---------------------------------------------------------------------------
# 8. deformed model


def _chi2_mix_tail(coeffs, dof: int) -> float:
    """P(sum_j c_j X_j > 0) for independent X_j ~ chi-square(dof).

    Numerical inversion of the characteristic function; exact up to
    quadrature error, so deep tails need no sampling.
    """
    c = np.asarray(coeffs, dtype=float)

    def integrand(u):
        log_mod = 0.25 * dof * np.sum(np.log1p(c * c * u * u))
        if log_mod > 700.0:
            return 0.0
        return math.sin(0.5 * dof * np.sum(np.arctan(c * u))) / (u * math.exp(log_mod))

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-10, limit=800)
    return 0.5 + val / math.pi


def criterion_8() -> CriterionResult:
    t0 = time.time()
    sc1 = SemicircleMeasure(1.0)
    model = ModelSpec(mu_a=sc1, mu_b=SemicircleMeasure(1.0), rho_a=2.0, rho_b=2.0,
                      ell_a=-2.0, ell_b=-2.0, beta=1.0)
    conv = model.convolution()
    x_typ = float(conv.k_inverse_exact(1.0 / 3.0))
    l_val = l_rate(model, SpikeSpec(gammas=(3.0,)), x_typ)
    l_ok = abs(l_val) < 1e-3

    sp = EnsembleSpec.from_measures(sc1, sc1, 256, 1)
    tops = []
    sec_worst = 0.0
    for rep in range(100):
        draw = sample_deformed(sp, [3.0], replica_rng(800, rep), return_parts=True)
        tops.append(draw.eigs_x[0])
        if draw.eigs_x[0] > draw.eigs_h[0] + 1e-9:
            sec_worst = max(
                sec_worst,
                secular_residual(draw.eigs_h, draw.overlaps, 3.0, draw.eigs_x[0]),
            )
    loc_gap = abs(float(np.mean(tops)) - x_typ)
    loc_ok = loc_gap < 0.1
    sec_ok = sec_worst < 1e-8

    # weighted-resolvent deviation slopes vs t_plus on a 3-atom spectrum.
    # With equal-weight atoms the resolvent weight is a ratio of chi-square
    # sums, so P(v >= alpha) has an exact evaluation via _chi2_mix_tail and
    # the deep tails carry no sampling noise.  Sizes are multiples of 3
    # (exact thirds) picked so N*T spans roughly 3..12 per threshold.
    atoms = np.array([0.0, 0.8, 2.0])
    nu = AtomicMeasure(atoms, [1.0 / 3.0] * 3)
    x, rho = 3.0, 2.0
    mx = pushforward_mu_x(nu, x)
    coef = 1.0 / (x - atoms)
    rel_worst = 0.0
    for alpha, sizes in ((0.63, (804, 1608, 3216)),
                         (0.668, (201, 402, 804)),
                         (0.70, (99, 201, 402))):
        t_target = float(t_plus(nu, x, rho, alpha, mu_x=mx))
        ys = [-math.log(_chi2_mix_tail(coef - alpha, n_dim // 3)) for n_dim in sizes]
        slope = float(np.polyfit(np.array(sizes, dtype=float), np.array(ys), 1)[0])
        rel_worst = max(rel_worst, abs(slope - t_target) / t_target)
    slope_ok = rel_worst <= 0.15
    # tie the closed-form tail back to the sampler at the smallest size
    p_exact = _chi2_mix_tail(coef - 0.668, 67)
    v = weighted_resolvent(np.repeat(atoms, 67), x, replica_rng(801, 0), 2 * 10**6)
    p_hat = float(np.mean(v >= 0.668))
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / v.size)
    mc_ok = abs(p_hat - p_exact) <= 3.0 * se
    ok = l_ok and loc_ok and sec_ok and slope_ok and mc_ok
    return _result(8, "deformed model", 600.0, t0, ok,
                   f"|L|={abs(l_val):.1e} (1e-3), outlier gap {loc_gap:.3f} (0.1), "
                   f"secular {sec_worst:.1e} (1e-8), worst slope rel {rel_worst:.1%} "
                   f"(15%) over 3 thresholds, sampler gap {abs(p_hat - p_exact):.1e} "
                   f"(3 SE = {3.0 * se:.1e})")


# ---------------------------------------------------------------------------
# 9. reflection consistency


def criterion_9() -> CriterionResult:
    t0 = time.time()
    rng = replica_rng(109)
    checked = 0
    worst = 0.0
    while checked < 100:
        spec = _random_spec(rng)
        conv = spec.convolution()
        ell = conv.support.left_edge
        ell_sum = spec.ell_a + spec.ell_b
        if ell - ell_sum <= 1e-4:
            continue
        for frac in rng.uniform(0.05, 0.9, 2):
            x = ell - float(frac) * (ell - ell_sum)
            ev_min = rate_min(spec, x)
            ev_ref = rate_max(spec.reflected(), -x)
            if math.isinf(ev_min.value) or math.isinf(ev_ref.value):
                if ev_min.value != ev_ref.value:
                    worst = math.inf
            else:
                worst = max(worst, abs(ev_min.value - ev_ref.value))
            checked += 1
            if checked >= 100:
                break
    ok = worst < 1e-7
    return _result(9, "reflection consistency", 30.0, t0, ok,
                   f"worst |rate_min - reflected rate_max| {worst:.2e} (1e-7)")


# ---------------------------------------------------------------------------


_CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_all(indices=None, *, verbose: bool = True) -> list[CriterionResult]:
    """Run the acceptance criteria (all by default) and return the results."""
    results = []
    for idx in sorted(indices or _CRITERIA):
        res = _CRITERIA[idx]()
        results.append(res)
        if verbose:
            print(res.line, flush=True)
    return results
