"""Analytic transforms of spectral measures.

Conventions used throughout (mu a probability measure on a compact set,
support [l, r], G its Stieltjes transform G(z) = integral 1/(z-y) dmu(y)):

* G is positive decreasing on (r, inf) and negative decreasing on (-inf, l).
* K = G^{-1} on (0, g_at_edge), the inverse on the right side; K(z) > r.
* R(z) = K(z) - 1/z, the additive free cumulant transform; R(0+) = mean.
* Q = R^{-1} on (mean, r - 1/g_at_edge).
* Negative-side arguments are served by reflecting the measure: for the
  reflected measure mu~(B) = mu(-B), G~(z) = -G(-z), K~(z) = -K(-z),
  R~(z) = -R(-z); one tested reflection layer covers all four transforms.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.optimize
import scipy.sparse

from .errors import DomainError, NumericalError
from .measures import AtomicMeasure, Measure
from .policy import NumericPolicy, resolve

__all__ = [
    "stieltjes",
    "g_at_edge",
    "g_at_left_edge",
    "k_inverse",
    "r_transform",
    "q_inverse",
    "integral_r",
    "log_potential",
    "bl_distance",
]


def _prepare(values):
    arr = np.asarray(values, dtype=float)
    return arr, arr.ndim == 0


# ---------------------------------------------------------------------------
# direct evaluations
# ---------------------------------------------------------------------------


def stieltjes(mu: Measure, lam, *, policy: NumericPolicy | None = None):
    """G_mu(lam) for real lam strictly outside the closed support."""
    lam_arr, scalar = _prepare(lam)
    sup = mu.support
    inside = (lam_arr >= sup.left_edge) & (lam_arr <= sup.right_edge)
    if np.any(inside):
        bad = lam_arr[inside].ravel()[0]
        raise DomainError(
            f"stieltjes: lam={bad!r} lies in the closed support "
            f"[{sup.left_edge}, {sup.right_edge}]; use g_at_edge for edge limits"
        )
    out = mu.stieltjes_at(lam_arr)
    return float(out) if scalar else out


def g_at_edge(mu: Measure) -> float:
    """One-sided limit of G at the right support edge (may be +inf)."""
    return mu.support.g_at_right


def g_at_left_edge(mu: Measure) -> float:
    """One-sided limit of G at the left support edge (may be -inf)."""
    return mu.support.g_at_left


# ---------------------------------------------------------------------------
# inverse transforms
# ---------------------------------------------------------------------------


def _k_inverse_positive(mu: Measure, z_flat: np.ndarray, pol: NumericPolicy) -> np.ndarray:
    """Solve G(lam) = z for lam > r, vectorized; z in (0, g_at_edge]."""
    sup = mu.support
    r = sup.right_edge
    g_edge = sup.g_at_right
    if np.any(z_flat <= 0.0):
        raise DomainError("k_inverse: z must be nonzero with |z| in (0, g_at_edge)")
    if np.isfinite(g_edge) and np.any(z_flat > g_edge * (1.0 + 1e-12)):
        raise DomainError(
            f"k_inverse: z exceeds the edge limit g_at_edge = {g_edge!r}"
        )

    exact = mu.k_inverse_exact(z_flat)
    if exact is not None:
        return np.asarray(exact, dtype=float)

    lo = np.full_like(z_flat, r)
    hi = r + (1.0 + abs(r)) / z_flat
    # G(lam) <= 1/(lam - r) makes this bracket valid already; expand defensively
    for _ in range(8):
        bad = mu.stieltjes_at(hi) > z_flat
        if not np.any(bad):
            break
        hi = np.where(bad, r + 2.0 * (hi - r), hi)

    for _ in range(pol.bisect_iters):
        mid = 0.5 * (lo + hi)
        high_side = mu.stieltjes_at(mid) > z_flat  # G decreasing: root above mid
        lo = np.where(high_side, mid, lo)
        hi = np.where(high_side, hi, mid)
    lam = 0.5 * (lo + hi)

    for _ in range(pol.newton_polish):
        g = mu.stieltjes_at(lam)
        gp = mu.stieltjes_deriv(lam)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (g - z_flat) / gp
        cand = lam - step
        ok = np.isfinite(cand) & (cand > lo) & (cand < hi)
        lam = np.where(ok, cand, lam)
    return lam


def k_inverse(mu: Measure, z, *, policy: NumericPolicy | None = None):
    """K_mu(z) = G_mu^{-1}(z); z > 0 right side, z < 0 left side (reflection)."""
    pol = resolve(policy)
    z_arr, scalar = _prepare(z)
    flat = z_arr.ravel()
    if np.any(flat == 0.0) or not np.all(np.isfinite(flat)):
        raise DomainError("k_inverse: z must be finite and nonzero")
    out = np.empty(flat.size)
    pos = flat > 0
    if np.any(pos):
        out[pos] = _k_inverse_positive(mu, flat[pos], pol)
    if np.any(~pos):
        out[~pos] = -_k_inverse_positive(mu.reflect(), -flat[~pos], pol)
    out = out.reshape(z_arr.shape)
    return float(out) if scalar else out


def r_transform(mu: Measure, z, *, policy: NumericPolicy | None = None):
    """R_mu(z) = K_mu(z) - 1/z."""
    z_arr, scalar = _prepare(z)
    out = k_inverse(mu, z_arr, policy=policy) - 1.0 / z_arr
    return float(out) if scalar else out


def _q_inverse_positive(mu: Measure, m_flat: np.ndarray, pol: NumericPolicy) -> np.ndarray:
    """Solve R(u) = m for u > 0; m in (mean, r - 1/g_at_edge).

    Substituting u = G(kappa) turns R(u) = m into the single-level equation
    kappa - 1/G(kappa) = m with kappa > r, whose left side decreases from
    r - 1/g_at_edge down to the mean; one Stieltjes evaluation per iteration
    instead of a nested K-inversion.
    """
    sup = mu.support
    r = sup.right_edge
    g_edge = sup.g_at_right
    mean = mu.mean()
    r_sup = r - (1.0 / g_edge if np.isfinite(g_edge) else 0.0)
    if np.any(m_flat <= mean) or np.any(m_flat >= r_sup):
        raise DomainError(
            f"q_inverse: m must lie in (mean, r - 1/g_at_edge) = ({mean!r}, {r_sup!r})"
        )

    def psi(kap):
        return kap - 1.0 / mu.stieltjes_at(kap)

    scale = 1.0 + abs(r)
    lo = np.full_like(m_flat, 1e-3 * scale)
    for _ in range(12):
        bad = psi(r + lo) <= m_flat
        if not np.any(bad):
            break
        lo = np.where(bad, lo * 1e-2, lo)
    hi = np.full_like(m_flat, scale)
    for _ in range(200):
        bad = psi(r + hi) > m_flat
        if not np.any(bad):
            break
        hi = np.where(bad, hi * 2.0, hi)
    else:
        raise DomainError("q_inverse: bracket expansion failed; m too close to the mean")
    log_lo = np.log(lo)
    log_hi = np.log(hi)
    for _ in range(pol.bisect_iters + 40):
        log_mid = 0.5 * (log_lo + log_hi)
        above = psi(r + np.exp(log_mid)) > m_flat  # psi decreasing: root above
        log_lo = np.where(above, log_mid, log_lo)
        log_hi = np.where(above, log_hi, log_mid)
    kappa = r + np.exp(0.5 * (log_lo + log_hi))
    return np.asarray(mu.stieltjes_at(kappa), dtype=float)


def q_inverse(mu: Measure, m, *, policy: NumericPolicy | None = None):
    """Q_mu = R_mu^{-1}; m above the mean uses the right side, below the left."""
    pol = resolve(policy)
    m_arr, scalar = _prepare(m)
    flat = m_arr.ravel()
    mean = mu.mean()
    out = np.empty(flat.size)
    pos = flat > mean
    if np.any(pos):
        out[pos] = _q_inverse_positive(mu, flat[pos], pol)
    if np.any(~pos):
        out[~pos] = -_q_inverse_positive(mu.reflect(), -flat[~pos], pol)
    out = out.reshape(m_arr.shape)
    return float(out) if scalar else out


def integral_r(mu: Measure, t, *, policy: NumericPolicy | None = None):
    """integral of R_mu over [0, t] (t of either sign; F(0) = 0).

    Uses the closed form t*K(t) - 1 - log t - integral log(K(t)-y) dmu(y),
    obtained by integrating R = K - 1/u in the K variable; the finite limit
    R(0+) = mean makes F continuous at 0.
    """
    pol = resolve(policy)
    t_arr, scalar = _prepare(t)
    flat = t_arr.ravel()
    out = np.empty(flat.size)
    zero = flat == 0.0
    out[zero] = 0.0
    pos = flat > 0.0
    if np.any(pos):
        out[pos] = _integral_r_positive(mu, flat[pos], pol)
    neg = ~pos & ~zero
    if np.any(neg):
        out[neg] = _integral_r_positive(mu.reflect(), -flat[neg], pol)
    out = out.reshape(t_arr.shape)
    return float(out) if scalar else out


def _integral_r_positive(mu: Measure, t_flat: np.ndarray, pol: NumericPolicy) -> np.ndarray:
    exact = mu.r_integral_exact(t_flat)
    if exact is not None:
        return np.asarray(exact, dtype=float)
    kk = _k_inverse_positive(mu, t_flat, pol)
    return t_flat * kk - 1.0 - np.log(t_flat) - mu.log_moment(kk)


def log_potential(mu: Measure, rho, side: str = "auto", *,
                  policy: NumericPolicy | None = None):
    """integral of log|rho - y| dmu(y) for rho off the support.

    The exact edge rho = r (or l) is allowed only when the corresponding
    one-sided Stieltjes limit is finite.
    """
    if side not in ("auto", "right", "left"):
        raise ValueError("side must be 'auto', 'right' or 'left'")
    rho_arr, scalar = _prepare(rho)
    sup = mu.support
    on_right = rho_arr >= sup.right_edge
    on_left = rho_arr <= sup.left_edge
    if side == "right":
        ok = on_right
    elif side == "left":
        ok = on_left
    else:
        ok = on_right | on_left
    if not np.all(ok):
        raise DomainError("log_potential: rho lies inside the support (or on the wrong side)")
    at_right_edge = rho_arr == sup.right_edge
    at_left_edge = rho_arr == sup.left_edge
    if np.any(at_right_edge) and not np.isfinite(sup.g_at_right):
        raise DomainError("log_potential at the right edge: Stieltjes limit diverges there")
    if np.any(at_left_edge) and not np.isfinite(sup.g_at_left):
        raise DomainError("log_potential at the left edge: Stieltjes limit diverges there")
    out = mu.log_moment(rho_arr)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# bounded-Lipschitz distance
# ---------------------------------------------------------------------------


def bl_distance(mu: AtomicMeasure, nu: AtomicMeasure, *,
                policy: NumericPolicy | None = None) -> float:
    """Bounded-Lipschitz distance between two atomic measures.

    d(mu, nu) = sup { integral f d(mu - nu) : |f| <= 1, Lip(f) <= 1 },
    solved exactly as a linear program over the values of f on the merged
    atom grid; the Lipschitz constraint only needs adjacent-pair differences
    because any grid function satisfying them extends piecewise linearly.
    """
    if not isinstance(mu, AtomicMeasure) or not isinstance(nu, AtomicMeasure):
        raise DomainError("bl_distance expects atomic measures")
    grid, c = _signed_weights(mu, nu)
    k = grid.size
    if k == 1 or np.all(c == 0.0):
        return 0.0
    dx = np.diff(grid)
    n_pairs = k - 1
    data = np.concatenate([np.ones(n_pairs), -np.ones(n_pairs)])
    rows = np.concatenate([np.arange(n_pairs), np.arange(n_pairs)])
    cols = np.concatenate([np.arange(1, k), np.arange(0, k - 1)])
    diff = scipy.sparse.csr_matrix((data, (rows, cols)), shape=(n_pairs, k))
    a_ub = scipy.sparse.vstack([diff, -diff], format="csr")
    b_ub = np.concatenate([dx, dx])
    res = scipy.optimize.linprog(
        -c, A_ub=a_ub, b_ub=b_ub, bounds=(-1.0, 1.0), method="highs"
    )
    if not res.success:
        raise NumericalError(f"bl_distance LP failed: {res.message}")
    return max(0.0, -float(res.fun))


def _signed_weights(mu: AtomicMeasure, nu: AtomicMeasure):
    grid = np.union1d(mu.atoms, nu.atoms)
    c = np.zeros(grid.size)
    c[np.searchsorted(grid, mu.atoms)] += mu.weights
    c[np.searchsorted(grid, nu.atoms)] -= nu.weights
    return grid, c
