"""Spectral measures: atomic, piecewise-linear grid, and analytic families.

Each measure exposes a small numeric surface (Stieltjes transform on and off
the real axis, log-potential integrand, moments, support metadata) that the
transform layer builds on.  Heavy validation lives in the constructors so the
invariants hold for the lifetime of the object.

JSON forms:
    {"type": "atomic", "atoms": [[x, w], ...]}
    {"type": "grid", "x": [...], "pdf": [...]}
    {"type": "named", "name": "semicircle", "params": [1.0]}
    "semicircle(1)"            (string shorthand, also for dirac/bernoulli/uniform)
"""

from __future__ import annotations

import dataclasses
import math
import re

import numpy as np

from .errors import DomainError
from .policy import NumericPolicy, resolve

_CHUNK = 4_000_000  # max elements per broadcasted block in vectorized sums


@dataclasses.dataclass(frozen=True)
class SupportInfo:
    """Support endpoints and one-sided edge limits of the Stieltjes transform.

    ``g_at_right``/``g_at_left`` are ``lim G(x)`` as x approaches the edge from
    outside; ``math.inf`` (resp. ``-math.inf``) marks a divergent limit.
    """

    left_edge: float
    right_edge: float
    g_at_right: float
    g_at_left: float


def _as_scalar_or_array(lam):
    arr = np.asarray(lam, dtype=float)
    return arr, arr.ndim == 0


class Measure:
    """Base class; subclasses implement the primitive numeric surface."""

    # -- primitives -------------------------------------------------------

    @property
    def support(self) -> SupportInfo:
        info = getattr(self, "_support_cache", None)
        if info is None:
            info = self._compute_support()
            object.__setattr__(self, "_support_cache", info)
        return info

    def _compute_support(self) -> SupportInfo:
        raise NotImplementedError

    def stieltjes_at(self, lam):
        """G(lam) for real lam strictly off the support (no validation)."""
        raise NotImplementedError

    def stieltjes_deriv(self, lam):
        """G'(lam) for real lam strictly off the support."""
        raise NotImplementedError

    def stieltjes_complex(self, z):
        """G(z) for complex z with Im z > 0."""
        raise NotImplementedError

    def stieltjes_complex_deriv(self, z):
        """G'(z) for complex z with Im z > 0."""
        raise NotImplementedError

    def mean(self) -> float:
        return float(self.moment(1))

    def moment(self, k: int) -> float:
        raise NotImplementedError

    def log_moment(self, rho):
        """integral of log|rho - y| dmu(y); rho real, off support on one side."""
        raise NotImplementedError

    def reflect(self) -> "Measure":
        raise NotImplementedError

    def shift(self, c: float) -> "Measure":
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    # -- optional exact hooks used by the transform layer -----------------

    def k_inverse_exact(self, z):
        """Closed-form K(z) if the family has one, else None."""
        return None

    def r_integral_exact(self, t):
        """Closed-form integral of R over [0, t] if available, else None."""
        return None

    @property
    def is_dirac(self) -> bool:
        return False


# ---------------------------------------------------------------------------
# atomic measures
# ---------------------------------------------------------------------------


class AtomicMeasure(Measure):
    """Finite convex combination of point masses.

    Atoms are sorted strictly increasing (exact duplicates are merged on
    construction); weights are positive and sum to 1 within 1e-12.
    """

    def __init__(self, atoms, weights):
        atoms = np.asarray(atoms, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if atoms.size == 0 or atoms.size != weights.size:
            raise ValueError("atoms and weights must be equal-length, nonempty")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(weights)):
            raise ValueError("atoms and weights must be finite")
        order = np.argsort(atoms, kind="stable")
        atoms, weights = atoms[order], weights[order]
        # merge exact duplicates so the sorted-strictly-increasing invariant holds
        keep = np.empty(atoms.size, dtype=bool)
        keep[0] = True
        np.not_equal(atoms[1:], atoms[:-1], out=keep[1:])
        idx = np.cumsum(keep) - 1
        merged_w = np.zeros(int(idx[-1]) + 1)
        np.add.at(merged_w, idx, weights)
        atoms = atoms[keep]
        weights = merged_w
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        total = float(weights.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, not 1 within 1e-12")
        self.atoms = atoms
        self.weights = weights

    def _compute_support(self) -> SupportInfo:
        return SupportInfo(
            left_edge=float(self.atoms[0]),
            right_edge=float(self.atoms[-1]),
            g_at_right=math.inf,
            g_at_left=-math.inf,
        )

    def _pair_sum(self, lam, func):
        lam_arr, scalar = _as_scalar_or_array(lam)
        flat = lam_arr.ravel()
        out = np.empty(flat.size)
        step = max(1, _CHUNK // max(1, self.atoms.size))
        with np.errstate(divide="ignore"):
            for i in range(0, flat.size, step):
                block = flat[i : i + step, None]
                out[i : i + step] = func(block) @ self.weights
        out = out.reshape(lam_arr.shape)
        return float(out) if scalar else out

    def stieltjes_at(self, lam):
        return self._pair_sum(lam, lambda b: 1.0 / (b - self.atoms))

    def stieltjes_deriv(self, lam):
        return self._pair_sum(lam, lambda b: -1.0 / (b - self.atoms) ** 2)

    def stieltjes_complex(self, z):
        z_arr = np.asarray(z, dtype=complex)
        scalar = z_arr.ndim == 0
        flat = z_arr.ravel()
        out = np.empty(flat.size, dtype=complex)
        step = max(1, _CHUNK // max(1, self.atoms.size))
        for i in range(0, flat.size, step):
            block = flat[i : i + step, None]
            out[i : i + step] = (1.0 / (block - self.atoms)) @ self.weights
        out = out.reshape(z_arr.shape)
        return complex(out) if scalar else out

    def stieltjes_complex_deriv(self, z):
        z_arr = np.asarray(z, dtype=complex)
        scalar = z_arr.ndim == 0
        flat = z_arr.ravel()
        out = np.empty(flat.size, dtype=complex)
        step = max(1, _CHUNK // max(1, self.atoms.size))
        for i in range(0, flat.size, step):
            block = flat[i : i + step, None]
            out[i : i + step] = (-1.0 / (block - self.atoms) ** 2) @ self.weights
        out = out.reshape(z_arr.shape)
        return complex(out) if scalar else out

    def moment(self, k: int) -> float:
        return float((self.atoms**k) @ self.weights)

    def log_moment(self, rho):
        def block_fn(b):
            diff = np.abs(b - self.atoms)
            if np.any(diff == 0.0):
                raise DomainError("log-potential evaluated at an atom")
            return np.log(diff)

        return self._pair_sum(rho, block_fn)

    def reflect(self) -> "AtomicMeasure":
        return AtomicMeasure(-self.atoms[::-1], self.weights[::-1])

    def shift(self, c: float) -> "AtomicMeasure":
        return AtomicMeasure(self.atoms + c, self.weights)

    def coarsen(self, width: float) -> "AtomicMeasure":
        """Snap atoms to bin centers of the given width (merging weights).

        Each atom moves at most width/2, so by the triangle inequality any
        bounded-Lipschitz distance computed against the coarsened measure is
        within width/2 of the exact one.
        """
        if width <= 0:
            raise ValueError("width must be positive")
        lo = self.atoms[0]
        centers = lo + (np.floor((self.atoms - lo) / width) + 0.5) * width
        return AtomicMeasure(centers, self.weights)

    @property
    def is_dirac(self) -> bool:
        return self.atoms.size == 1

    def k_inverse_exact(self, z):
        """Inverse Stieltjes transform, Newton-iterated on the convex branch.

        For z > 0 the root lies in [r + w_top/z, r + 1/z]; starting at the
        right endpoint (where G - z <= 0) one tangent step lands left of the
        root and the clamped iteration then climbs monotonically, so the
        bracket doubles as the safeguard.  z < 0 mirrors through reflection.
        """
        z_arr, scalar = _as_scalar_or_array(z)
        flat = np.asarray(z_arr, dtype=float).ravel()
        if np.any(flat == 0.0) or not np.all(np.isfinite(flat)):
            raise DomainError("k_inverse: z must be finite and nonzero")
        if self.is_dirac:
            out = self.atoms[0] + 1.0 / flat
        else:
            out = np.empty(flat.size)
            pos = flat > 0
            if np.any(pos):
                out[pos] = self._k_newton_right(flat[pos])
            if np.any(~pos):
                out[~pos] = -self.reflect()._k_newton_right(-flat[~pos])
        out = out.reshape(np.shape(z_arr))
        return float(out) if scalar else out

    def _k_newton_right(self, z_flat: np.ndarray) -> np.ndarray:
        # iterate in y = 1/(lam - r): G(r + 1/y) is concave increasing in y,
        # so Newton from y = z (where the residual is <= 0) climbs to the
        # root monotonically and needs no safeguard
        r = float(self.atoms[-1])
        c = (r - self.atoms)[None, :]
        w = self.weights[None, :]
        y = z_flat.copy()
        for _ in range(60):
            u = 1.0 / (1.0 + c * y[:, None])
            g = (w * u).sum(1) * y
            gp = (w * u * u).sum(1)
            new = y - (g - z_flat) / gp
            done = np.all(np.abs(new - y) <= 4e-16 * np.abs(new))
            y = new
            if done:
                break
        return r + 1.0 / y

    def r_integral_exact(self, t):
        if self.is_dirac:
            t_arr, scalar = _as_scalar_or_array(t)
            out = self.atoms[0] * t_arr
            return float(out) if scalar else out
        return None

    def to_json(self) -> dict:
        return {
            "type": "atomic",
            "atoms": [[float(a), float(w)] for a, w in zip(self.atoms, self.weights)],
        }

    def __repr__(self):
        return f"AtomicMeasure({self.atoms.size} atoms on [{self.atoms[0]:g}, {self.atoms[-1]:g}])"


def dirac_measure(c: float) -> AtomicMeasure:
    return AtomicMeasure([c], [1.0])


def bernoulli_measure(p: float, a: float, b: float) -> AtomicMeasure:
    """Two-point measure: weight p at a, weight 1-p at b."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if a == b:
        raise ValueError("bernoulli atoms must be distinct")
    return AtomicMeasure([a, b], [p, 1.0 - p])


# ---------------------------------------------------------------------------
# grid measures (piecewise-linear densities)
# ---------------------------------------------------------------------------


class GridMeasure(Measure):
    """Continuous measure given by a piecewise-linear density on a grid.

    The grid is strictly increasing, the density is nonnegative with zero
    values at both endpoints, and the trapezoid mass equals 1 within 1e-8
    (``normalize=True`` rescales instead of raising).
    """

    def __init__(self, x, pdf, *, normalize: bool = False,
                 policy: NumericPolicy | None = None):
        x = np.asarray(x, dtype=float).ravel()
        pdf = np.asarray(pdf, dtype=float).ravel()
        if x.size < 3 or x.size != pdf.size:
            raise ValueError("grid needs >= 3 points and matching pdf length")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(pdf)):
            raise ValueError("grid and pdf must be finite")
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(pdf < 0):
            raise ValueError("density must be nonnegative")
        mass = float(np.trapz(pdf, x))
        if normalize:
            if mass <= 0:
                raise ValueError("cannot normalize a zero-mass density")
            pdf = pdf / mass
            pdf = pdf.copy()
            pdf[0] = 0.0
            pdf[-1] = 0.0
            pdf /= np.trapz(pdf, x)
        else:
            if abs(mass - 1.0) > 1e-8:
                raise ValueError(f"trapezoid mass {mass!r} differs from 1 by > 1e-8")
            if pdf[0] != 0.0 or pdf[-1] != 0.0:
                raise ValueError("density must vanish at both grid endpoints")
        self.x = x
        self.pdf = pdf
        self._policy = resolve(policy)
        if not np.any(self.pdf > self._policy.support_density_floor):
            raise ValueError("density is numerically zero everywhere")

    # -- support ----------------------------------------------------------

    def _nonzero_index_range(self):
        floor = self._policy.support_density_floor
        idx = np.nonzero(self.pdf > floor)[0]
        return int(idx[0]), int(idx[-1])

    def _compute_support(self) -> SupportInfo:
        i_lo, i_hi = self._nonzero_index_range()
        g_right = self._edge_g_right()
        g_left = -self.reflect()._edge_g_right()
        return SupportInfo(
            left_edge=float(self.x[i_lo]),
            right_edge=float(self.x[i_hi]),
            g_at_right=g_right,
            g_at_left=g_left,
        )

    def _edge_g_right(self) -> float:
        """One-sided limit of G at the right support edge.

        The bulk contribution uses the exact piecewise-linear cell formula;
        the last few nonzero cells are replaced by a fitted power law
        c*(r0-y)^p whose tail integral is c*s^p/p (declared divergent when
        the fitted exponent is ~<= 0, e.g. arcsine-type growth).
        """
        floor = self._policy.support_density_floor
        cap = self._policy.edge_cap
        _, i_hi = self._nonzero_index_range()
        anchor_idx = min(i_hi + 1, self.x.size - 1)
        r0 = float(self.x[anchor_idx])

        win = 12
        fit_idx = np.arange(max(0, i_hi - win), i_hi + 1)
        fit_idx = fit_idx[self.pdf[fit_idx] > floor]
        if fit_idx.size < 3:
            # too little structure to extrapolate (spike-like edge): probe just
            # outside; divergent shapes blow past the cap and report +inf
            probe = r0 + 1e-9 * (self.x[-1] - self.x[0])
            val = float(self._cell_stieltjes(np.array([probe]))[0])
            return val if val < cap else math.inf
        s = r0 - self.x[fit_idx]
        logc, p = np.polynomial.polynomial.polyfit(np.log(s), np.log(self.pdf[fit_idx]), 1)
        p = float(p)
        if p <= 0.05:
            return math.inf
        p = min(p, 4.0)
        c = math.exp(float(logc))
        cut = int(fit_idx[0])
        s_win = r0 - float(self.x[cut])
        tail = c * s_win**p / p
        base = float(self._partial_cell_stieltjes(r0, last_cell=cut))
        val = base + tail
        return val if val < cap else math.inf

    # -- exact piecewise-linear cell integrals -----------------------------

    def _cells(self):
        y0 = self.x[:-1]
        y1 = self.x[1:]
        f0 = self.pdf[:-1]
        f1 = self.pdf[1:]
        h = y1 - y0
        b = (f1 - f0) / h
        return y0, y1, f0, f1, h, b

    def _cell_stieltjes(self, lam_flat, cells=None):
        """sum over cells of integral f(y)/(lam-y) dy; lam strictly off cells."""
        y0, y1, f0, f1, h, b = cells if cells is not None else self._cells()
        out = np.zeros(lam_flat.size)
        step = max(1, _CHUNK // max(1, y0.size))
        live = (f0 != 0.0) | (f1 != 0.0)
        for i in range(0, lam_flat.size, step):
            lam = lam_flat[i : i + step, None]
            d = lam - y1
            coef = f1 + b * d
            with np.errstate(divide="ignore", invalid="ignore"):
                lr = np.log1p(h / d)
                term = np.where(coef == 0.0, 0.0, coef * lr) - b * h
            out[i : i + step] = np.where(live, term, 0.0).sum(axis=1)
        return out

    def _partial_cell_stieltjes(self, lam: float, last_cell: int) -> float:
        """Same as _cell_stieltjes at one point, using cells [0, last_cell)."""
        y0, y1, f0, f1, h, b = self._cells()
        sl = slice(0, last_cell)
        cells = (y0[sl], y1[sl], f0[sl], f1[sl], h[sl], b[sl])
        return float(self._cell_stieltjes(np.array([lam]), cells)[0])

    def stieltjes_at(self, lam):
        lam_arr, scalar = _as_scalar_or_array(lam)
        out = self._cell_stieltjes(lam_arr.ravel()).reshape(lam_arr.shape)
        return float(out) if scalar else out

    def stieltjes_deriv(self, lam):
        y0, y1, f0, f1, h, b = self._cells()
        lam_arr, scalar = _as_scalar_or_array(lam)
        flat = lam_arr.ravel()
        out = np.empty(flat.size)
        live = (f0 != 0.0) | (f1 != 0.0)
        step = max(1, _CHUNK // max(1, y0.size))
        for i in range(0, flat.size, step):
            lam = flat[i : i + step, None]
            d = lam - y1
            c = lam - y0
            coef = f1 + b * d
            with np.errstate(divide="ignore", invalid="ignore"):
                term = coef * h / (c * d) - b * np.log1p(h / d)
            out[i : i + step] = np.nansum(np.where(live, term, 0.0), axis=1)
        out = out.reshape(lam_arr.shape)
        return float(out) if scalar else out

    def stieltjes_complex(self, z):
        y0, y1, f0, f1, h, b = self._cells()
        z_arr = np.asarray(z, dtype=complex)
        scalar = z_arr.ndim == 0
        flat = z_arr.ravel()
        out = np.empty(flat.size, dtype=complex)
        live = (f0 != 0.0) | (f1 != 0.0)
        step = max(1, _CHUNK // max(1, y0.size))
        for i in range(0, flat.size, step):
            zz = flat[i : i + step, None]
            d = zz - y1
            coef = f1 + b * d
            term = coef * np.log1p(h / d) - b * h
            out[i : i + step] = np.where(live, term, 0.0).sum(axis=1)
        out = out.reshape(z_arr.shape)
        return complex(out) if scalar else out

    def stieltjes_complex_deriv(self, z):
        y0, y1, f0, f1, h, b = self._cells()
        z_arr = np.asarray(z, dtype=complex)
        scalar = z_arr.ndim == 0
        flat = z_arr.ravel()
        out = np.empty(flat.size, dtype=complex)
        live = (f0 != 0.0) | (f1 != 0.0)
        step = max(1, _CHUNK // max(1, y0.size))
        for i in range(0, flat.size, step):
            zz = flat[i : i + step, None]
            d = zz - y1
            c = zz - y0
            coef = f1 + b * d
            term = coef * h / (c * d) - b * np.log1p(h / d)
            out[i : i + step] = np.where(live, term, 0.0).sum(axis=1)
        out = out.reshape(z_arr.shape)
        return complex(out) if scalar else out

    def moment(self, k: int) -> float:
        y0, y1, f0, f1, h, b = self._cells()
        d1 = y1 ** (k + 1) - y0 ** (k + 1)
        d2 = y1 ** (k + 2) - y0 ** (k + 2)
        contrib = f0 * d1 / (k + 1) + b * (d2 / (k + 2) - y0 * d1 / (k + 1))
        return float(contrib.sum())

    def log_moment(self, rho):
        rho_arr, scalar = _as_scalar_or_array(rho)
        flat = rho_arr.ravel()
        sup = self.support
        out = np.empty(flat.size)
        right = flat >= sup.right_edge
        left = flat <= sup.left_edge
        if not np.all(right | left):
            raise DomainError("log-potential argument is inside the support")
        if np.any(right):
            out[right] = self._log_moment_right(flat[right])
        if np.any(left):
            refl = self._reflected()
            out[left] = refl._log_moment_right(-flat[left])
        out = out.reshape(rho_arr.shape)
        return float(out) if scalar else out

    def _scaled_moments(self, n_max: int = 64):
        """Moments of (lam - c0)/hw up to n_max, exact for the linear cells.

        Cached; used by the far-field log-potential series, where the
        direct per-cell closed form loses ~rho^2 log(rho) * eps absolute.
        """
        cached = getattr(self, "_scaled_moment_cache", None)
        if cached is not None:
            return cached
        sup = self.support
        c0 = 0.5 * (sup.left_edge + sup.right_edge)
        hw = 0.5 * (sup.right_edge - sup.left_edge)
        y0, y1, f0, f1, h, b = self._cells()
        t0 = (y0 - c0) / hw
        t1 = (y1 - c0) / hw
        n = np.arange(1, n_max + 1)[:, None]
        p1 = (t1[None, :] ** (n + 1) - t0[None, :] ** (n + 1)) / (n + 1)
        p2 = (t1[None, :] ** (n + 2) - t0[None, :] ** (n + 2)) / (n + 2)
        contrib = hw * (f0[None, :] * p1 + b[None, :] * hw * (p2 - t0[None, :] * p1))
        moms = contrib.sum(axis=1)
        cached = (c0, hw, moms)
        self._scaled_moment_cache = cached
        return cached

    def _log_moment_far(self, rho_flat):
        """log-potential for rho far to the right of the support.

        Expands log(rho - lam) = log(rho - c0) - sum_n ((lam-c0)/(rho-c0))^n / n;
        the ratio is <= 1/4 here, so 64 terms are far below double precision.
        """
        c0, hw, moms = self._scaled_moments()
        rc = rho_flat - c0
        ratio = hw / rc
        n = np.arange(1, moms.size + 1)[:, None]
        series = (moms[:, None] / n * ratio[None, :] ** n).sum(axis=0)
        return np.log(rc) - series

    def _log_moment_right(self, rho_flat):
        sup = self.support
        c0 = 0.5 * (sup.left_edge + sup.right_edge)
        hw = 0.5 * (sup.right_edge - sup.left_edge)
        far = rho_flat - c0 >= 4.0 * hw
        if np.any(far):
            out_all = np.empty(rho_flat.size)
            out_all[far] = self._log_moment_far(rho_flat[far])
            if np.any(~far):
                out_all[~far] = self._log_moment_right(rho_flat[~far])
            return out_all
        y0, y1, f0, f1, h, b = self._cells()
        live = (f0 != 0.0) | (f1 != 0.0)
        out = np.zeros(rho_flat.size)
        step = max(1, _CHUNK // max(1, y0.size))

        def xlogx(t):
            with np.errstate(divide="ignore", invalid="ignore"):
                v = t * np.log(t)
            return np.where(t == 0.0, 0.0, v)

        def x2logx(t):
            with np.errstate(divide="ignore", invalid="ignore"):
                v = 0.5 * t * t * np.log(t)
            return np.where(t == 0.0, 0.0, v)

        for i in range(0, rho_flat.size, step):
            rho = rho_flat[i : i + step, None]
            c = rho - y0
            d = rho - y1
            i_log = (xlogx(c) - c) - (xlogx(d) - d)
            i_tlog = (x2logx(c) - c * c / 4.0) - (x2logx(d) - d * d / 4.0)
            term = (f0 + b * c) * i_log - b * i_tlog
            out[i : i + step] = np.where(live, term, 0.0).sum(axis=1)
        return out

    def _reflected(self) -> "GridMeasure":
        cached = getattr(self, "_reflect_cache", None)
        if cached is None:
            cached = GridMeasure(-self.x[::-1], self.pdf[::-1], policy=self._policy)
            self._reflect_cache = cached
        return cached

    def reflect(self) -> "GridMeasure":
        return self._reflected()

    def shift(self, c: float) -> "GridMeasure":
        return GridMeasure(self.x + c, self.pdf, policy=self._policy)

    def to_json(self) -> dict:
        return {"type": "grid", "x": self.x.tolist(), "pdf": self.pdf.tolist()}

    def __repr__(self):
        s = self.support
        return f"GridMeasure({self.x.size} pts, support [{s.left_edge:g}, {s.right_edge:g}])"


# ---------------------------------------------------------------------------
# analytic families
# ---------------------------------------------------------------------------


class SemicircleMeasure(Measure):
    """Semicircle law with given variance (optionally shifted)."""

    def __init__(self, var: float, center: float = 0.0):
        if var <= 0:
            raise ValueError("variance must be positive")
        self.var = float(var)
        self.center = float(center)
        self.radius = 2.0 * math.sqrt(self.var)

    def _compute_support(self) -> SupportInfo:
        sigma = math.sqrt(self.var)
        return SupportInfo(
            left_edge=self.center - self.radius,
            right_edge=self.center + self.radius,
            g_at_right=1.0 / sigma,
            g_at_left=-1.0 / sigma,
        )

    def stieltjes_at(self, lam):
        lam_arr, scalar = _as_scalar_or_array(lam)
        u = lam_arr - self.center
        root = np.sqrt(np.maximum(u * u - 4.0 * self.var, 0.0))
        out = (u - np.sign(u) * root) / (2.0 * self.var)
        return float(out) if scalar else out

    def stieltjes_deriv(self, lam):
        lam_arr, scalar = _as_scalar_or_array(lam)
        u = lam_arr - self.center
        root = np.sqrt(np.maximum(u * u - 4.0 * self.var, 0.0))
        out = (1.0 - np.sign(u) * u / root) / (2.0 * self.var)
        return float(out) if scalar else out

    def stieltjes_complex(self, z):
        z_arr = np.asarray(z, dtype=complex)
        u = z_arr - self.center
        root = np.sqrt(u - self.radius) * np.sqrt(u + self.radius)
        out = (u - root) / (2.0 * self.var)
        scalar = z_arr.ndim == 0
        return complex(out) if scalar else out

    def stieltjes_complex_deriv(self, z):
        z_arr = np.asarray(z, dtype=complex)
        u = z_arr - self.center
        root = np.sqrt(u - self.radius) * np.sqrt(u + self.radius)
        out = (1.0 - u / root) / (2.0 * self.var)
        return complex(out) if z_arr.ndim == 0 else out

    def density(self, y):
        y_arr, scalar = _as_scalar_or_array(y)
        u = y_arr - self.center
        val = np.sqrt(np.maximum(4.0 * self.var - u * u, 0.0)) / (2.0 * math.pi * self.var)
        return float(val) if scalar else val

    def moment(self, k: int) -> float:
        # central moments: Catalan numbers times var^m for even orders
        if k == 1:
            return self.center
        gl_y, gl_w = np.polynomial.legendre.leggauss(120)
        y = self.center + self.radius * gl_y
        return float((gl_w * self.radius * self.density(y)) @ (y**k))

    def log_moment(self, rho):
        rho_arr, scalar = _as_scalar_or_array(rho)
        u = np.abs(rho_arr - self.center)
        if np.any(u < self.radius):
            raise DomainError("log-potential argument is inside the support")
        t = np.abs(self.stieltjes_at(rho_arr))
        # exact: integral log|rho-y| dmu = t*u - 1 - log t - var*t^2/2
        out = t * u - 1.0 - np.log(t) - 0.5 * self.var * t * t
        return float(out) if scalar else out

    def reflect(self) -> "SemicircleMeasure":
        return SemicircleMeasure(self.var, -self.center)

    def shift(self, c: float) -> "SemicircleMeasure":
        return SemicircleMeasure(self.var, self.center + c)

    def k_inverse_exact(self, z):
        z_arr, scalar = _as_scalar_or_array(z)
        out = self.center + self.var * z_arr + 1.0 / z_arr
        return float(out) if scalar else out

    def r_integral_exact(self, t):
        t_arr, scalar = _as_scalar_or_array(t)
        out = self.center * t_arr + 0.5 * self.var * t_arr * t_arr
        return float(out) if scalar else out

    def to_json(self) -> dict:
        params = [self.var] if self.center == 0.0 else [self.var, self.center]
        return {"type": "named", "name": "semicircle", "params": params}

    def __repr__(self):
        return f"SemicircleMeasure(var={self.var:g}, center={self.center:g})"


class UniformMeasure(Measure):
    """Uniform law on [a, b]."""

    def __init__(self, a: float, b: float):
        if not (b > a):
            raise ValueError("need b > a")
        self.a = float(a)
        self.b = float(b)

    def _compute_support(self) -> SupportInfo:
        return SupportInfo(self.a, self.b, math.inf, -math.inf)

    def stieltjes_at(self, lam):
        lam_arr, scalar = _as_scalar_or_array(lam)
        out = np.log(np.abs((lam_arr - self.a) / (lam_arr - self.b))) / (self.b - self.a)
        return float(out) if scalar else out

    def stieltjes_deriv(self, lam):
        lam_arr, scalar = _as_scalar_or_array(lam)
        out = (1.0 / (lam_arr - self.a) - 1.0 / (lam_arr - self.b)) / (self.b - self.a)
        return float(out) if scalar else out

    def stieltjes_complex(self, z):
        z_arr = np.asarray(z, dtype=complex)
        out = np.log((z_arr - self.a) / (z_arr - self.b)) / (self.b - self.a)
        return complex(out) if z_arr.ndim == 0 else out

    def stieltjes_complex_deriv(self, z):
        z_arr = np.asarray(z, dtype=complex)
        out = (1.0 / (z_arr - self.a) - 1.0 / (z_arr - self.b)) / (self.b - self.a)
        return complex(out) if z_arr.ndim == 0 else out

    def moment(self, k: int) -> float:
        return (self.b ** (k + 1) - self.a ** (k + 1)) / ((k + 1) * (self.b - self.a))

    def log_moment(self, rho):
        rho_arr, scalar = _as_scalar_or_array(rho)
        if np.any((rho_arr > self.a) & (rho_arr < self.b)):
            raise DomainError("log-potential argument is inside the support")

        def anti(t):
            with np.errstate(divide="ignore", invalid="ignore"):
                v = t * np.log(np.abs(t)) - t
            return np.where(t == 0.0, 0.0, v)

        out = (anti(rho_arr - self.a) - anti(rho_arr - self.b)) / (self.b - self.a)
        return float(out) if scalar else out

    def reflect(self) -> "UniformMeasure":
        return UniformMeasure(-self.b, -self.a)

    def shift(self, c: float) -> "UniformMeasure":
        return UniformMeasure(self.a + c, self.b + c)

    def to_json(self) -> dict:
        return {"type": "named", "name": "uniform", "params": [self.a, self.b]}

    def __repr__(self):
        return f"UniformMeasure({self.a:g}, {self.b:g})"


# ---------------------------------------------------------------------------
# named-measure parsing and JSON round trips
# ---------------------------------------------------------------------------

_NAMED_RE = re.compile(r"^\s*([a-z_]+)\s*\(\s*([^()]*)\s*\)\s*$")


def _build_named(name: str, params: list[float]) -> Measure:
    if name == "semicircle":
        if len(params) == 1:
            return SemicircleMeasure(params[0])
        if len(params) == 2:
            return SemicircleMeasure(params[0], params[1])
    elif name == "dirac" and len(params) == 1:
        return dirac_measure(params[0])
    elif name == "bernoulli" and len(params) == 3:
        return bernoulli_measure(*params)
    elif name == "uniform" and len(params) == 2:
        return UniformMeasure(*params)
    raise ValueError(f"unknown named measure {name!r} with {len(params)} parameter(s)")


def parse_named_measure(text: str) -> Measure:
    """Parse shorthand like 'semicircle(1)', 'dirac(2)', 'bernoulli(0.5,-1,1)'."""
    m = _NAMED_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse measure string {text!r}")
    name = m.group(1)
    raw = m.group(2).strip()
    params = [float(tok) for tok in raw.split(",")] if raw else []
    return _build_named(name, params)


def measure_from_json(obj) -> Measure:
    """Inverse of Measure.to_json; also accepts named-measure strings."""
    if isinstance(obj, str):
        return parse_named_measure(obj)
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError("measure JSON must be a string or an object with a 'type'")
    kind = obj["type"]
    if kind == "atomic":
        pairs = obj["atoms"]
        atoms = [p[0] for p in pairs]
        weights = [p[1] for p in pairs]
        return AtomicMeasure(atoms, weights)
    if kind == "grid":
        return GridMeasure(obj["x"], obj["pdf"])
    if kind == "named":
        return _build_named(obj["name"], [float(v) for v in obj.get("params", [])])
    raise ValueError(f"unknown measure type {kind!r}")
