"""Rate machinery for the rank-one spiked model.

Everything here is built on the pushforward of the summed spectral measure
under lam -> 1/(x - lam): the tilt cost of moving a weighted resolvent
average to a target value, the reachable-boundary points alpha_plus /
alpha_minus, the two-sided cost functions t_plus / t_minus, and the
level-by-level spike recursion l_rate.  The recursion is proved only for
real (beta = 1) ensembles and l_rate enforces that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import transforms
from .convolution import ConvolutionOutput
from .errors import DomainError
from .measures import AtomicMeasure, GridMeasure, Measure
from .policy import NumericPolicy, resolve
from .rates import ModelSpec, rate_max, rate_min


@dataclass(frozen=True)
class SpikeSpec:
    """Rank-one perturbation strengths gamma_1..gamma_p (all >= 0)."""

    gammas: tuple

    def __post_init__(self):
        gam = tuple(float(g) for g in self.gammas)
        if len(gam) < 1:
            raise ValueError("need at least one spike strength")
        if any(g < 0 or not math.isfinite(g) for g in gam):
            raise ValueError("spike strengths must be finite and nonnegative")
        object.__setattr__(self, "gammas", gam)

    @property
    def p(self) -> int:
        return len(self.gammas)

    def to_json(self) -> dict:
        return {"gammas": list(self.gammas)}

    @staticmethod
    def from_json(obj: dict) -> "SpikeSpec":
        return SpikeSpec(tuple(obj["gammas"]))


@dataclass
class PushforwardMeasure:
    """Image of a summed spectral measure under lam -> 1/(x - lam).

    ``measure`` carries the pushforward itself (atomic when the source is
    atomic, a grid density otherwise).  ``g_target`` is the resolvent value
    of the source at x, which the pushforward mean must reproduce;
    ``mean_gap`` records how far the grid representation actually is.
    """

    x: float
    measure: Measure
    s_lo: float
    s_hi: float
    g_target: float
    mean_gap: float = field(default=0.0)

    def mean(self) -> float:
        return self.measure.mean()

    def to_json(self) -> dict:
        return {
            "x": self.x,
            "s_lo": self.s_lo,
            "s_hi": "inf" if math.isinf(self.s_hi) else self.s_hi,
            "g_target": self.g_target,
            "mean_gap": self.mean_gap,
            "measure": self.measure.to_json(),
        }


def _unpack_conv(conv):
    """(carrier measure, left edge, right edge, exact-transform surface)."""
    if isinstance(conv, ConvolutionOutput):
        surface = conv.surface if conv.surface is not None else conv.measure
        return conv.measure, conv.left_edge, conv.right_edge, surface
    if isinstance(conv, Measure):
        sup = conv.support
        return conv, sup.left_edge, sup.right_edge, conv
    raise TypeError("expected a ConvolutionOutput or a Measure")


def _cos_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Endpoint-clustered grid; quadratic spacing at both ends."""
    k = np.arange(n)
    return lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * k / (n - 1)))


def pushforward_mu_x(conv, x: float, *, n: int = 6144,
                     policy: NumericPolicy | None = None) -> PushforwardMeasure:
    """Pushforward of the summed spectral measure under lam -> 1/(x - lam).

    For x above the right edge the support maps onto the finite interval
    [1/(x - l), 1/(x - r)] and the density picks up the 1/s^2 Jacobian.  At
    x equal to the edge the image stretches to +infinity; it is kept when
    the edge resolvent limit is finite (soft edges), with a log-spaced tail
    grid, and rejected as divergent otherwise (atom or hard edge at r).
    """
    pol = resolve(policy)
    meas, l_edge, r_edge, surface = _unpack_conv(conv)
    tol = pol.ineq_tol * (1.0 + abs(r_edge))
    if x < r_edge - tol:
        raise DomainError(f"pushforward base point {x!r} lies below the right edge {r_edge!r}")
    at_edge = x <= r_edge + tol

    if meas.is_dirac:
        c = 0.5 * (l_edge + r_edge)
        if x <= c + tol:
            raise DomainError(
                "pushforward at the edge diverges: the source is a point mass")
        s0 = 1.0 / (x - c)
        return PushforwardMeasure(
            x=float(x), measure=AtomicMeasure([s0], [1.0]), s_lo=s0, s_hi=s0,
            g_target=s0, mean_gap=0.0)

    if isinstance(meas, AtomicMeasure):
        top = float(np.max(meas.atoms))
        if x <= top + tol:
            raise DomainError(
                "pushforward at the edge diverges: the source has an atom at its top")
        s_atoms = 1.0 / (x - np.asarray(meas.atoms, dtype=float))
        order = np.argsort(s_atoms)
        out = AtomicMeasure(s_atoms[order], np.asarray(meas.weights, dtype=float)[order])
        g_x = float(surface.stieltjes_at(x))
        return PushforwardMeasure(
            x=float(x), measure=out, s_lo=float(s_atoms.min()),
            s_hi=float(s_atoms.max()), g_target=g_x,
            mean_gap=abs(out.mean() - g_x))

    g_x = float(surface.stieltjes_at(x))
    if at_edge and not math.isfinite(g_x):
        raise DomainError(
            "pushforward at the edge diverges: the edge resolvent limit is infinite")
    eps = pol.eps_schedule[-1]

    def density(lam: np.ndarray) -> np.ndarray:
        g = surface.stieltjes_complex(lam + 1j * eps)
        return np.clip(-np.imag(g) / np.pi, 0.0, None)

    s_lo = 1.0 / (x - l_edge)
    if at_edge:
        # finite part on a cosine grid, power-law tail on a log grid
        s_mid = 64.0 * max(1.0, s_lo)
        width = r_edge - l_edge
        probe = min(0.25 / s_mid, 1e-4 * width)
        c_tail = float(density(np.array([r_edge - probe]))[0]) / math.sqrt(probe)
        c_tail = max(c_tail, 1e-12)
        s_max = (2.0 * c_tail / 1e-9) ** (2.0 / 3.0)
        s_max = max(s_max, 4.0 * s_mid)
        body = _cos_grid(s_lo, s_mid, n)
        tail = np.geomspace(s_mid, s_max, max(96, int(96 * math.log10(s_max / s_mid))))
        s = np.unique(np.concatenate([body, tail]))
        s_hi = math.inf
    else:
        s_hi = 1.0 / (x - r_edge)
        s = _cos_grid(s_lo, s_hi, n)
    lam = x - 1.0 / s[1:-1]
    q = np.zeros(s.size)
    q[1:-1] = density(lam) / (s[1:-1] ** 2)
    out = GridMeasure(s, q, normalize=True, policy=pol)
    return PushforwardMeasure(
        x=float(x), measure=out, s_lo=float(s_lo), s_hi=float(s_hi),
        g_target=g_x, mean_gap=abs(out.mean() - g_x))


def h_alpha_x(mu_x: PushforwardMeasure, alpha: float, kappa: float, *,
              policy: NumericPolicy | None = None) -> float:
    """Average of log((kappa - s)/(kappa - alpha)) over the pushforward.

    kappa must sit outside the pushforward support (either side) and on the
    same side of alpha, so the ratio stays positive; kappa = +/-inf gives 0.
    """
    pol = resolve(policy)
    if math.isinf(kappa):
        return 0.0
    meas = mu_x.measure
    sup = meas.support
    tol = pol.ineq_tol * (1.0 + abs(sup.right_edge))
    if sup.left_edge + tol < kappa < sup.right_edge - tol:
        raise DomainError(
            f"h evaluation point {kappa!r} lies inside the pushforward support "
            f"[{sup.left_edge!r}, {sup.right_edge!r}]")
    if (kappa >= sup.right_edge - tol and kappa <= alpha) or (
            kappa <= sup.left_edge + tol and kappa >= alpha):
        raise DomainError(
            f"h evaluation point {kappa!r} does not separate from alpha = {alpha!r}")
    logpot = float(transforms.log_potential(meas, kappa, policy=pol))
    return logpot - math.log(abs(kappa - alpha))


def alpha_plus(conv, x: float, rho: float, *,
               policy: NumericPolicy | None = None) -> float:
    """Reachable-boundary point G(rho)/(1 + (x - rho) G(rho)) above the edge."""
    pol = resolve(policy)
    _, _, r_edge, surface = _unpack_conv(conv)
    tol = pol.ineq_tol * (1.0 + abs(r_edge))
    if not (x >= rho - tol and rho >= r_edge - tol):
        raise DomainError("alpha_plus needs x >= rho >= right edge")
    rho_eff = max(rho, r_edge)
    g = float(surface.stieltjes_at(rho_eff))
    if math.isinf(g):
        return 1.0 / (x - rho_eff) if x > rho_eff else math.inf
    denom = 1.0 + (x - rho_eff) * g
    if denom == 0.0:
        return math.inf
    return g / denom


def alpha_minus(conv, x: float, ell: float, *,
                policy: NumericPolicy | None = None) -> float:
    """Reachable-boundary point below the support (same rational form)."""
    pol = resolve(policy)
    _, l_edge, r_edge, surface = _unpack_conv(conv)
    tol = pol.ineq_tol * (1.0 + abs(l_edge))
    if ell > l_edge + tol:
        raise DomainError("alpha_minus needs ell <= left edge")
    if x < r_edge - pol.ineq_tol * (1.0 + abs(r_edge)):
        raise DomainError("alpha_minus needs x at or above the right edge")
    ell_eff = min(ell, l_edge)
    g = float(surface.stieltjes_at(ell_eff))
    if math.isinf(g):
        return 1.0 / (x - ell_eff)
    denom = 1.0 + (x - ell_eff) * g
    if denom == 0.0:
        return math.inf
    return g / denom


def _kq_kappa(meas: Measure, alpha: float, pol: NumericPolicy) -> float:
    """kappa = K(Q(alpha)) on the pushforward, via the generic inverse."""
    u = float(transforms.q_inverse(meas, alpha, policy=pol))
    return alpha + 1.0 / u


def t_plus(conv, x: float, rho: float, alpha: float, *,
           mu_x: PushforwardMeasure | None = None,
           policy: NumericPolicy | None = None) -> float:
    """Cost of tilting the weighted resolvent at x up to alpha.

    The top of the source spectrum is pinned at rho >= right edge.  Three
    regimes: reachable by a plain tilt (K(Q(alpha)) evaluation point),
    reachable only by saturating the pinned point (evaluation at 1/(x-rho)),
    unreachable (+inf above 1/(x-rho)).  Real-ensemble normalization: the
    underlying chi-square tilt carries a factor 1/2.
    """
    pol = resolve(policy)
    _, _, r_edge, _ = _unpack_conv(conv)
    if rho < r_edge - pol.ineq_tol * (1.0 + abs(r_edge)):
        raise DomainError("t_plus needs rho at or above the right edge")
    if x < rho - pol.ineq_tol * (1.0 + abs(rho)):
        raise DomainError("t_plus needs x >= rho")
    mx = mu_x if mu_x is not None else pushforward_mu_x(conv, x, policy=pol)
    g_x = mx.measure.mean()
    # the zero band absorbs the grid-vs-surface mean gap, where the cost is
    # quadratically negligible anyway
    tol = max(pol.ineq_tol * (1.0 + abs(g_x)), 4.0 * mx.mean_gap)
    if alpha < g_x - tol:
        raise DomainError(
            f"t_plus domain needs alpha >= G(x); got {alpha!r} < {g_x!r}")
    if alpha <= g_x + tol:
        return 0.0
    cap = 1.0 / (x - rho) if x > rho else math.inf
    if alpha >= cap * (1.0 - pol.ineq_tol):
        return math.inf
    a_pl = alpha_plus(conv, x, rho, policy=pol)
    try:
        if alpha <= a_pl:
            kappa = _kq_kappa(mx.measure, alpha, pol)
        else:
            kappa = cap
        return 0.5 * h_alpha_x(mx, alpha, kappa, policy=pol)
    except DomainError:
        return math.inf


def t_minus(conv, x: float, ell: float, alpha: float, *,
            mu_x: PushforwardMeasure | None = None,
            policy: NumericPolicy | None = None) -> float:
    """Cost of tilting the weighted resolvent at x down to alpha.

    Mirror of t_plus with the bottom of the spectrum pinned at
    ell <= left edge; unreachable (+inf) below 1/(x - ell).
    """
    pol = resolve(policy)
    _, l_edge, r_edge, _ = _unpack_conv(conv)
    if ell > l_edge + pol.ineq_tol * (1.0 + abs(l_edge)):
        raise DomainError("t_minus needs ell at or below the left edge")
    mx = mu_x if mu_x is not None else pushforward_mu_x(conv, x, policy=pol)
    g_x = mx.measure.mean()
    tol = max(pol.ineq_tol * (1.0 + abs(g_x)), 4.0 * mx.mean_gap)
    if alpha > g_x + tol:
        raise DomainError(
            f"t_minus domain needs alpha <= G(x); got {alpha!r} > {g_x!r}")
    if alpha >= g_x - tol:
        return 0.0
    floor = 1.0 / (x - ell)
    if alpha <= floor * (1.0 + pol.ineq_tol) - pol.ineq_tol:
        return math.inf
    a_mi = alpha_minus(conv, x, ell, policy=pol)
    try:
        if alpha >= a_mi:
            kappa = _kq_kappa(mx.measure, alpha, pol)
        else:
            kappa = floor
        return 0.5 * h_alpha_x(mx, alpha, kappa, policy=pol)
    except DomainError:
        return math.inf


def _grid_min(fun, lo: float, hi: float, n: int, refine: bool) -> float:
    """Minimum of fun over [lo, hi]: n-point scan plus golden refinement."""
    if hi < lo:
        return math.inf
    if hi == lo:
        return fun(lo)
    ys = np.linspace(lo, hi, n)
    vals = np.array([fun(float(y)) for y in ys])
    j = int(np.argmin(vals))
    best = float(vals[j])
    if not refine or not math.isfinite(best):
        return best
    a = ys[max(j - 1, 0)]
    b = ys[min(j + 1, n - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(float(c)), fun(float(d))
    for _ in range(60):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(float(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(float(d))
        if b - a < 1e-12 * (1.0 + abs(b)):
            break
    return min(best, fc, fd)


def l_rate(spec: ModelSpec, spikes: SpikeSpec, x: float, *,
           n_grid: int = 512,
           policy: NumericPolicy | None = None) -> float:
    """Large-deviation rate of the spiked largest eigenvalue at x.

    Level i adds spike gamma_i: above the spike's typical pull (x at least
    the summed-K value at 1/gamma_i) the cost is the cheapest split between
    tilting the resolvent (t_plus) and deviating the previous level; below
    it the bottom of the spectrum must move, paying t_minus plus the
    smallest-eigenvalue rate.  Infima run over a coarse grid plus golden
    refinement at the top level; intermediate levels (p > 2) are memoized on
    the shared grid and interpolated linearly in the refinement stage.
    Real ensembles only.
    """
    pol = resolve(policy)
    if spec.beta != 1:
        raise DomainError("the spike recursion is defined for real ensembles (beta = 1)")
    conv_out = spec.convolution_grid()
    surface = conv_out.surface
    r_edge = conv_out.right_edge
    l_edge = conv_out.left_edge
    u_star = surface.support.g_at_right
    width = r_edge - l_edge
    tol = pol.ineq_tol * (1.0 + abs(r_edge))
    if x < r_edge - tol:
        return math.inf
    x = max(x, r_edge)

    push_cache: dict[float, PushforwardMeasure] = {}

    def push(base: float) -> PushforwardMeasure:
        hit = push_cache.get(base)
        if hit is None:
            hit = pushforward_mu_x(conv_out, base, policy=pol)
            push_cache[base] = hit
        return hit

    def k_at(alpha_i: float) -> float:
        # convention: the threshold sticks to the edge once the edge value
        # of the transform already lies below the coupling; an infinite edge
        # value always admits a genuine inverse instead
        if math.isfinite(u_star) and u_star <= alpha_i:
            return r_edge
        return float(surface.k_inverse_exact(alpha_i))

    base_min_cache: dict[float, float] = {}

    def i_min(y: float) -> float:
        hit = base_min_cache.get(y)
        if hit is None:
            hit = rate_min(spec, y, policy=pol).value
            base_min_cache[y] = hit
        return hit

    def level0(y: float) -> float:
        return rate_max(spec, y, policy=pol).value

    prev = level0
    for idx, gam in enumerate(spikes.gammas):
        top = idx == spikes.p - 1
        if gam == 0.0:
            # a zero-strength spike changes nothing
            continue
        alpha_i = 1.0 / gam
        k_i = k_at(alpha_i)

        def make_level(a_i, k_val, below, is_top):
            memo: dict[float, float] = {}

            def value(xq: float) -> float:
                if xq < r_edge - tol:
                    return math.inf
                xq = max(xq, r_edge)
                hit = memo.get(xq)
                if hit is not None:
                    return hit
                mx = push(xq)
                if xq <= k_val:
                    # bottom-deviation branch
                    hi_y = min(l_edge, xq - 1.0 / a_i)
                    lo_y = l_edge - 10.0 * width

                    def cost(y: float) -> float:
                        t = t_minus(conv_out, xq, y, a_i, mu_x=mx, policy=pol)
                        if not math.isfinite(t):
                            return math.inf
                        return t + i_min(y)

                    val = _grid_min(cost, lo_y, hi_y, n_grid, refine=is_top)
                else:
                    lo_y = max(r_edge, xq - 1.0 / a_i)

                    def cost(y: float) -> float:
                        t = t_plus(conv_out, xq, y, a_i, mu_x=mx, policy=pol)
                        if not math.isfinite(t):
                            return math.inf
                        base = below(y)
                        if not math.isfinite(base):
                            return math.inf
                        return t + base

                    val = _grid_min(cost, lo_y, xq, n_grid, refine=is_top)
                val = max(val, 0.0) if math.isfinite(val) else math.inf
                memo[xq] = val
                return val

            return value

        below_fn = prev
        if not top and prev is not level0:
            # freeze the previous level onto the shared grid and interpolate
            ys = np.linspace(r_edge, x, n_grid)
            vals = np.array([prev(float(y)) for y in ys])

            def below_fn(y, ys=ys, vals=vals):
                return float(np.interp(y, ys, vals))

        prev = make_level(alpha_i, k_i, below_fn, top)

    return prev(x)
