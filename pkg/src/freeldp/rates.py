"""Large-deviation rate functions for the extreme eigenvalue of a free sum.

``j_limit`` is the limiting normalized log spherical integral of a single
spectrum against a rank-one tilt; ``i_theta`` combines three of them into the
tilted rate; ``rate_max`` maximizes over the tilt strength, with the argmax
``theta_star`` resolved in closed form whenever the outlier-transform
condition holds; ``rate_min`` is the smallest-eigenvalue mirror, computed by
two independent routes that are cross-checked.

Tilt strengths are written θ; the natural variable of the transform
machinery is t = 2θ/β.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .convolution import FreeConvolution, free_add
from .errors import DomainError, NumericalError
from .measures import Measure
from .policy import NumericPolicy, resolve
from . import transforms


class ConditionError(DomainError):
    """The outlier-transform condition G_sum(x) <= min(G_a, G_b) fails."""


@dataclasses.dataclass
class ModelSpec:
    """Two spectra with their extreme-eigenvalue limits and the ensemble beta.

    ``rho_a``/``rho_b`` are the limits of the largest eigenvalues (at least
    the respective right edges: outliers only above); ``ell_a``/``ell_b``
    mirror them below.
    """

    mu_a: Measure
    mu_b: Measure
    rho_a: float
    rho_b: float
    ell_a: float
    ell_b: float
    beta: int = 1

    _conv: FreeConvolution | None = dataclasses.field(
        default=None, init=False, repr=False, compare=False)
    _reflected: "ModelSpec | None" = dataclasses.field(
        default=None, init=False, repr=False, compare=False)
    _grid_output: object | None = dataclasses.field(
        default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.beta not in (1, 2):
            raise DomainError(f"beta must be 1 or 2, got {self.beta!r}")
        for name in ("rho_a", "rho_b", "ell_a", "ell_b"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        tol = 1e-9
        sup_a, sup_b = self.mu_a.support, self.mu_b.support
        if self.rho_a < sup_a.right_edge - tol * (1 + abs(sup_a.right_edge)):
            raise DomainError(
                f"rho_a = {self.rho_a!r} is below the right edge "
                f"{sup_a.right_edge!r} of mu_a")
        if self.rho_b < sup_b.right_edge - tol * (1 + abs(sup_b.right_edge)):
            raise DomainError(
                f"rho_b = {self.rho_b!r} is below the right edge "
                f"{sup_b.right_edge!r} of mu_b")
        if self.ell_a > sup_a.left_edge + tol * (1 + abs(sup_a.left_edge)):
            raise DomainError(
                f"ell_a = {self.ell_a!r} is above the left edge "
                f"{sup_a.left_edge!r} of mu_a")
        if self.ell_b > sup_b.left_edge + tol * (1 + abs(sup_b.left_edge)):
            raise DomainError(
                f"ell_b = {self.ell_b!r} is above the left edge "
                f"{sup_b.left_edge!r} of mu_b")

    # -- cached handles -----------------------------------------------------

    def convolution(self, *, policy: NumericPolicy | None = None) -> FreeConvolution:
        """Exact transform surface of mu_a (+) mu_b, built once."""
        if self._conv is None:
            twin = self._reflected
            if twin is not None and twin._conv is not None:
                self._conv = twin._conv.reflect()
            else:
                self._conv = FreeConvolution(self.mu_a, self.mu_b, policy=policy)
        return self._conv

    def convolution_grid(self, grid=None, *, policy: NumericPolicy | None = None):
        """Gridded density of the convolution (built once for grid=None)."""
        if grid is not None:
            return free_add(self.mu_a, self.mu_b, grid, policy=policy)
        if self._grid_output is None:
            self._grid_output = free_add(self.mu_a, self.mu_b, policy=policy)
        return self._grid_output

    def reflected(self) -> "ModelSpec":
        """The spec of the negated model: largest and smallest swap roles."""
        if self._reflected is None:
            refl = ModelSpec(
                mu_a=self.mu_a.reflect(),
                mu_b=self.mu_b.reflect(),
                rho_a=-self.ell_a,
                rho_b=-self.ell_b,
                ell_a=-self.rho_a,
                ell_b=-self.rho_b,
                beta=self.beta,
            )
            refl._reflected = self
            self._reflected = refl
        return self._reflected

    def to_json(self) -> dict:
        return {
            "mu_a": self.mu_a.to_json(),
            "mu_b": self.mu_b.to_json(),
            "rho_a": self.rho_a,
            "rho_b": self.rho_b,
            "ell_a": self.ell_a,
            "ell_b": self.ell_b,
            "beta": self.beta,
        }


@dataclasses.dataclass(frozen=True)
class RateEvaluation:
    """One rate-function evaluation.

    ``branch`` records where the maximizing tilt sits: "zero" (the flat
    branch, rate 0 or an infinite value), "bulk" (both single-spectrum terms
    still in their integral branches), "a-saturated"/"b-saturated" (that
    spectrum's term in its log branch), "both-saturated".  ``case_tag`` is
    "case0" (argmax solves K_sum(t) = x), "case1" (argmax from the inverse
    R-transform of the less-saturated spectrum), "case2" (argmax at
    1/(rho_a+rho_b-x)), or "degenerate" (condition fails or the value is
    decided symbolically; the reported value is a numeric supremum or an
    exact infinite/zero classification).
    """

    x: float
    theta_star: float
    value: float
    branch: str
    case_tag: str

    def to_json(self) -> dict:
        return {
            "x": self.x,
            "theta_star": _num_json(self.theta_star),
            "rate": _num_json(self.value),
            "branch": self.branch,
            "case": self.case_tag,
        }


def _num_json(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return v


def _g_one_sided(mu: Measure, rho: float, pol: NumericPolicy) -> float:
    """G_mu(rho) for rho >= right edge, using the edge limit at the edge."""
    sup = mu.support
    slack = pol.ineq_tol * (1.0 + abs(sup.right_edge))
    if rho < sup.right_edge - slack:
        raise DomainError(
            f"evaluation point {rho!r} is below the right edge {sup.right_edge!r}")
    if rho <= sup.right_edge + slack:
        return sup.g_at_right
    return float(mu.stieltjes_at(rho))


def _g_one_sided_left(mu: Measure, ell: float, pol: NumericPolicy) -> float:
    sup = mu.support
    slack = pol.ineq_tol * (1.0 + abs(sup.left_edge))
    if ell > sup.left_edge + slack:
        raise DomainError(
            f"evaluation point {ell!r} is above the left edge {sup.left_edge!r}")
    if ell >= sup.left_edge - slack:
        return sup.g_at_left
    return float(mu.stieltjes_at(ell))


# ---------------------------------------------------------------------------
# single-spectrum limit
# ---------------------------------------------------------------------------


def j_limit(mu: Measure, theta: float, rho: float, beta: int, *,
            policy: NumericPolicy | None = None) -> float:
    """Limiting normalized log spherical integral of spectrum mu at tilt theta.

    For theta >= 0, rho must be at least the right edge of mu; the value is
    (beta/2) * integral of R_mu over [0, 2*theta/beta] while 2*theta/beta
    stays within G_mu(rho), and switches to
    theta*rho - (beta/2) log|theta| - (beta/2) logpot(rho)
    + (beta/2)(log(beta/2) - 1) beyond.  For theta <= 0 the mirror holds with
    rho at most the left edge.  The two branches agree at the switch point.
    """
    pol = resolve(policy)
    if beta not in (1, 2):
        raise DomainError(f"beta must be 1 or 2, got {beta!r}")
    theta_arr = np.asarray(theta, dtype=float)
    scalar = theta_arr.ndim == 0
    flat = theta_arr.ravel()
    if not np.all(np.isfinite(flat)):
        raise DomainError(f"tilt strength must be finite, got {theta!r}")
    half_beta = 0.5 * beta
    const = half_beta * (math.log(half_beta) - 1.0)
    out = np.zeros(flat.size)
    pos = flat > 0.0
    neg = flat < 0.0
    if np.any(pos):
        g_rho = _g_one_sided(mu, rho, pol)
        th = flat[pos]
        t = th / half_beta
        sub = t <= g_rho
        vals = np.empty(t.size)
        if np.any(sub):
            vals[sub] = half_beta * transforms.integral_r(mu, t[sub], policy=pol)
        if np.any(~sub):
            logpot = transforms.log_potential(mu, rho, side="right", policy=pol)
            vals[~sub] = (th[~sub] * rho - half_beta * np.log(th[~sub])
                          - half_beta * logpot + const)
        out[pos] = vals
    if np.any(neg):
        g_ell = _g_one_sided_left(mu, rho, pol)
        th = flat[neg]
        t = th / half_beta
        sub = t >= g_ell
        vals = np.empty(t.size)
        if np.any(sub):
            vals[sub] = half_beta * transforms.integral_r(mu, t[sub], policy=pol)
        if np.any(~sub):
            logpot = transforms.log_potential(mu, rho, side="left", policy=pol)
            vals[~sub] = (th[~sub] * rho - half_beta * np.log(-th[~sub])
                          - half_beta * logpot + const)
        out[neg] = vals
    out = out.reshape(theta_arr.shape)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# tilted rate and its derivative
# ---------------------------------------------------------------------------


def i_theta(spec: ModelSpec, theta: float, x: float, *,
            policy: NumericPolicy | None = None) -> float:
    """Tilted rate: the free-sum j_limit at x minus the two spectrum terms.

    theta >= 0 requires x at least the right edge of the convolution;
    theta <= 0 (the smallest-eigenvalue mirror) requires x at most the left
    edge, and the spectrum terms are evaluated at ell_a, ell_b.
    """
    pol = resolve(policy)
    theta_arr = np.asarray(theta, dtype=float)
    scalar = theta_arr.ndim == 0
    flat = theta_arr.ravel()
    conv = spec.convolution(policy=pol)
    out = np.zeros(flat.size)
    pos = flat > 0.0
    neg = flat < 0.0
    if np.any(pos):
        th = flat[pos]
        out[pos] = (j_limit(conv, th, x, spec.beta, policy=pol)
                    - j_limit(spec.mu_a, th, spec.rho_a, spec.beta, policy=pol)
                    - j_limit(spec.mu_b, th, spec.rho_b, spec.beta, policy=pol))
    if np.any(neg):
        th = flat[neg]
        out[neg] = (j_limit(conv, th, x, spec.beta, policy=pol)
                    - j_limit(spec.mu_a, th, spec.ell_a, spec.beta, policy=pol)
                    - j_limit(spec.mu_b, th, spec.ell_b, spec.beta, policy=pol))
    out = out.reshape(theta_arr.shape)
    return float(out) if scalar else out


def i_derivative(spec: ModelSpec, theta: float, x: float, *,
                 policy: NumericPolicy | None = None) -> float:
    """d/dtheta of i_theta at fixed x: the piecewise branch derivative.

    With t = 2*theta/beta and the spectra ordered so the smaller outlier
    transform comes first (g1 <= g2), the branches for theta > 0 are
    0, x - K_sum(t), x - rho_1 - R_2(t), x - rho_a - rho_b + 1/t on
    t <= G_sum(x), t <= g1, t <= g2, t > g2 respectively.  theta < 0 mirrors
    through reflection.
    """
    pol = resolve(policy)
    if theta == 0.0:
        return 0.0
    if theta < 0:
        return -i_derivative(spec.reflected(), -theta, -x, policy=pol)
    conv = spec.convolution(policy=pol)
    t = 2.0 * theta / spec.beta
    g_x = _g_one_sided(conv, x, pol)
    if t <= g_x:
        return 0.0
    g_a = _g_one_sided(spec.mu_a, spec.rho_a, pol)
    g_b = _g_one_sided(spec.mu_b, spec.rho_b, pol)
    if g_a <= g_b:
        g1, g2, rho1, mu2 = g_a, g_b, spec.rho_a, spec.mu_b
    else:
        g1, g2, rho1, mu2 = g_b, g_a, spec.rho_b, spec.mu_a
    if t <= g1:
        return x - float(conv.k_inverse_exact(t))
    if t <= g2:
        return x - rho1 - float(transforms.r_transform(mu2, t, policy=pol))
    return x - spec.rho_a - spec.rho_b + 1.0 / t


# ---------------------------------------------------------------------------
# argmax of the tilted rate
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class _ArgmaxInfo:
    t_star: float
    case_tag: str
    branch: str


def _theta_star_info(spec: ModelSpec, x: float, pol: NumericPolicy) -> _ArgmaxInfo:
    conv = spec.convolution(policy=pol)
    sup = conv.support
    r = sup.right_edge
    u_star = sup.g_at_right
    rho_sum = spec.rho_a + spec.rho_b
    tol_r = pol.ineq_tol * (1.0 + abs(r))
    if x < r - tol_r:
        raise DomainError(f"x = {x!r} is below the right edge {r!r} of the convolution")
    if x >= rho_sum - pol.ineq_tol * (1.0 + abs(rho_sum)):
        raise DomainError(
            f"x = {x!r} is not below rho_a + rho_b = {rho_sum!r}")
    g_a = _g_one_sided(spec.mu_a, spec.rho_a, pol)
    g_b = _g_one_sided(spec.mu_b, spec.rho_b, pol)
    g_x = u_star if x <= r + tol_r else float(conv.stieltjes_at(x))
    bound = min(g_a, g_b)
    if not (g_x <= bound * (1.0 + pol.ineq_tol) + pol.ineq_tol):
        raise ConditionError(
            f"outlier-transform condition fails: G_sum({x!r}) = {g_x!r} "
            f"> min(G_a(rho_a), G_b(rho_b)) = {bound!r}")

    if x <= r + tol_r:
        return _ArgmaxInfo(t_star=u_star, case_tag="case0", branch="zero")

    # order the two spectra by outlier transform value; record which of the
    # original labels saturates first
    if g_a <= g_b:
        g1, g2, rho1, mu2, sat = g_a, g_b, spec.rho_a, spec.mu_b, "a-saturated"
    else:
        g1, g2, rho1, mu2, sat = g_b, g_a, spec.rho_b, spec.mu_a, "b-saturated"
    alpha_x = 1.0 / (rho_sum - x)

    # case0: the derivative x - K_sum(t) vanishes before t reaches g1, i.e.
    # at the increasing-side root of K_a(t) + K_b(t) - 1/t = x
    if math.isfinite(g1):
        # strict: at exact boundary K_sum(g1) = x all three formulas coincide
        # and the tag falls through to the saturation dichotomy below
        phi_g1 = float(conv.k_inverse_exact(g1))
        if phi_g1 > x and math.isfinite(u_star) and u_star < g1:
            t2 = _phi_increasing_root(conv, x, u_star, g1, pol)
            return _ArgmaxInfo(t_star=t2, case_tag="case0", branch="bulk")
        if phi_g1 > x:
            # degenerate window [u_star, g1]: boundary coincidence
            return _ArgmaxInfo(t_star=g1, case_tag="case0", branch="bulk")
    else:
        # both outlier transforms diverge (atoms exactly at the bounds): the
        # saturated branches never arise, and K_a + K_b - 1/t climbs to
        # rho_a + rho_b, so the increasing-side root exists for any valid x
        hi = 2.0 * max(u_star, 1.0)
        for _ in range(400):
            if float(conv.k_inverse_exact(hi)) > x:
                break
            hi *= 2.0
        else:
            raise NumericalError("no increasing-side bracket below rho_a + rho_b")
        t2 = _phi_increasing_root(conv, x, u_star, hi, pol)
        return _ArgmaxInfo(t_star=t2, case_tag="case0", branch="bulk")

    if alpha_x < g2:
        t_star = float(transforms.q_inverse(mu2, x - rho1, policy=pol))
        return _ArgmaxInfo(t_star=t_star, case_tag="case1", branch=sat)
    return _ArgmaxInfo(t_star=alpha_x, case_tag="case2", branch="both-saturated")


def _phi_increasing_root(conv: FreeConvolution, x: float, lo: float, hi: float,
                         pol: NumericPolicy) -> float:
    """Root of K_a(t)+K_b(t)-1/t = x on [lo, hi] where the sum is increasing."""
    f_lo = float(conv.k_inverse_exact(lo)) - x
    f_hi = float(conv.k_inverse_exact(hi)) - x
    if f_lo > 0 or f_hi < 0:
        # tolerate boundary noise
        if abs(f_lo) <= pol.ineq_tol * (1 + abs(x)):
            return lo
        if abs(f_hi) <= pol.ineq_tol * (1 + abs(x)):
            return hi
        raise NumericalError(
            f"root bracketing failed on [{lo}, {hi}]: f = ({f_lo}, {f_hi})")
    a, b = lo, hi
    for _ in range(pol.bisect_iters):
        mid = 0.5 * (a + b)
        if float(conv.k_inverse_exact(mid)) - x > 0:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)


def theta_star(spec: ModelSpec, x: float, *,
               policy: NumericPolicy | None = None) -> tuple[float, str]:
    """The maximizing tilt for the largest-eigenvalue rate at x.

    Requires x in [right edge, rho_a + rho_b) and the outlier-transform
    condition G_sum(x) <= min(G_a(rho_a), G_b(rho_b)); raises a domain error
    naming the failed inequality otherwise.  Returns (theta, case_tag); the
    returned theta zeroes i_derivative.
    """
    pol = resolve(policy)
    info = _theta_star_info(spec, x, pol)
    return 0.5 * spec.beta * info.t_star, info.case_tag


# ---------------------------------------------------------------------------
# rate functions
# ---------------------------------------------------------------------------


def _numeric_sup(spec: ModelSpec, x: float, pol: NumericPolicy) -> tuple[float, float]:
    """Grid-plus-golden supremum of i_theta over theta > 0 at fixed x."""
    conv = spec.convolution(policy=pol)
    g_x = _g_one_sided(conv, x, pol)
    g_a = _g_one_sided(spec.mu_a, spec.rho_a, pol)
    g_b = _g_one_sided(spec.mu_b, spec.rho_b, pol)
    rho_sum = spec.rho_a + spec.rho_b
    cands = [v for v in (g_x, g_a, g_b, 1.0) if math.isfinite(v)]
    if x < rho_sum:
        cands.append(1.0 / (rho_sum - x))
    t_hi = min(4.0 * max(cands), 1e6)
    t_lo = 1e-8
    ts = np.geomspace(t_lo, t_hi, 512)
    half_beta = 0.5 * spec.beta
    vals = np.asarray(i_theta(spec, half_beta * ts, x, policy=pol))
    j = int(np.argmax(vals))
    lo = math.log(ts[max(j - 1, 0)])
    hi = math.log(ts[min(j + 1, ts.size - 1)])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc = i_theta(spec, half_beta * math.exp(c), x, policy=pol)
    fd = i_theta(spec, half_beta * math.exp(d), x, policy=pol)
    for _ in range(80):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = i_theta(spec, half_beta * math.exp(c), x, policy=pol)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = i_theta(spec, half_beta * math.exp(d), x, policy=pol)
        if hi - lo < 1e-13:
            break
    t_best = math.exp(0.5 * (lo + hi))
    v_best = i_theta(spec, half_beta * t_best, x, policy=pol)
    if v_best < vals[j]:
        t_best, v_best = ts[j], float(vals[j])
    return half_beta * t_best, max(v_best, 0.0)


def _point_mass_at(mu, rho: float, pol: NumericPolicy) -> bool:
    if not getattr(mu, "is_dirac", False):
        return False
    return abs(float(mu.atoms[0]) - rho) <= pol.ineq_tol * (1.0 + abs(rho))


def rate_max(spec: ModelSpec, x: float, *,
             policy: NumericPolicy | None = None) -> RateEvaluation:
    """Largest-eigenvalue large-deviation rate at x (supremum over tilts).

    Infinite below the convolution's right edge, above rho_a + rho_b, and at
    exactly rho_a + rho_b unless one spectrum is a point mass (decided
    symbolically).  Inside the window the argmax is closed-form when the
    outlier-transform condition holds; otherwise a numeric supremum tagged
    "degenerate" is returned.
    """
    pol = resolve(policy)
    conv = spec.convolution(policy=pol)
    sup = conv.support
    r = sup.right_edge
    u_star = sup.g_at_right
    rho_sum = spec.rho_a + spec.rho_b
    tol_r = pol.ineq_tol * (1.0 + abs(r))
    tol_s = pol.ineq_tol * (1.0 + abs(rho_sum))

    if x < r - tol_r:
        return RateEvaluation(x, math.inf, math.inf, "zero", "degenerate")
    if x > rho_sum + tol_s:
        return RateEvaluation(x, math.inf, math.inf, "both-saturated", "degenerate")
    at_sum = abs(x - rho_sum) <= tol_s
    if at_sum and x > r + tol_r:
        # finite only when a spectrum is a point mass sitting exactly at its
        # outlier bound; then the tilted rate is identically zero in theta
        if _point_mass_at(spec.mu_a, spec.rho_a, pol) or _point_mass_at(
                spec.mu_b, spec.rho_b, pol):
            g_a = _g_one_sided(spec.mu_a, spec.rho_a, pol)
            g_b = _g_one_sided(spec.mu_b, spec.rho_b, pol)
            theta = 0.5 * spec.beta * min(g_a, g_b)
            return RateEvaluation(x, theta, 0.0, "zero", "case1")
        return RateEvaluation(x, math.inf, math.inf, "both-saturated", "degenerate")

    if x <= r + tol_r:
        g_a = _g_one_sided(spec.mu_a, spec.rho_a, pol)
        g_b = _g_one_sided(spec.mu_b, spec.rho_b, pol)
        bound = min(g_a, g_b)
        ok = (u_star <= bound * (1.0 + pol.ineq_tol) + pol.ineq_tol) or (
            math.isinf(u_star) and math.isinf(bound))
        if ok:
            theta = 0.5 * spec.beta * u_star if math.isfinite(u_star) else math.inf
            return RateEvaluation(x, theta, 0.0, "zero", "case0")
        theta, value = _numeric_sup(spec, x, pol)
        return RateEvaluation(x, theta, value, "zero", "degenerate")

    try:
        info = _theta_star_info(spec, x, pol)
    except ConditionError:
        theta, value = _numeric_sup(spec, x, pol)
        return RateEvaluation(x, theta, value, "bulk", "degenerate")
    theta = 0.5 * spec.beta * info.t_star
    value = max(i_theta(spec, theta, x, policy=pol), 0.0)
    branch = "zero" if value == 0.0 and info.branch == "zero" else info.branch
    return RateEvaluation(x, theta, value, branch, info.case_tag)


def rate_min(spec: ModelSpec, x: float, *,
             policy: NumericPolicy | None = None) -> RateEvaluation:
    """Smallest-eigenvalue rate at x, via two cross-checked routes.

    Route one evaluates the reflected spec's rate_max at -x; route two
    re-evaluates the tilted rate directly through the theta <= 0 branches at
    the reflected argmax.  The two values must agree within the configured
    route-agreement tolerance.  The reported theta_star is nonpositive.
    """
    pol = resolve(policy)
    refl = rate_max(spec.reflected(), -x, policy=pol)
    theta = -refl.theta_star
    if math.isfinite(refl.value) and math.isfinite(theta) and theta != 0.0:
        direct = i_theta(spec, theta, x, policy=pol)
        if abs(direct - refl.value) > pol.route_agreement_tol * (1.0 + abs(refl.value)):
            raise NumericalError(
                f"rate_min route disagreement at x = {x!r}: reflected "
                f"{refl.value!r} vs direct {direct!r}")
        value = max(direct, 0.0)
    else:
        value = refl.value
    return RateEvaluation(x, theta, value, refl.branch, refl.case_tag)
