"""Finite-N Monte Carlo for randomly rotated matrix sums.

Haar sampling on the orthogonal/unitary group, eigenvalue draws of
H = A + U B U^*, empirical spectral measures, finite-N spherical
integrals (plain Monte Carlo and an exact rank-one formula at beta = 2),
window-probability estimators for the largest eigenvalue, a tilted
Metropolis sampler for rare-event estimates, rank-p deformed draws, and
weighted-resolvent samples.

Every sampler is a deterministic function of its inputs and an integer
seed.  Replicated draws use counter-based Philox streams keyed by
(seed, replica_id), so results are independent of block sizes and
scheduling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DomainError
from .measures import AtomicMeasure, GridMeasure, Measure

__all__ = [
    "EnsembleSpec",
    "McEstimate",
    "TailEstimate",
    "TiltConfig",
    "TiltResult",
    "DeformedDraw",
    "replica_rng",
    "spectrum_from_measure",
    "haar_sample",
    "sample_H",
    "sample_eigenvalues",
    "empirical_measure",
    "mean_empirical",
    "spherical_integral_mc",
    "spherical_exact_beta2",
    "tail_probability_mc",
    "tilted_sampler",
    "sample_deformed",
    "secular_residual",
    "weighted_resolvent",
]

_MASK64 = (1 << 64) - 1


def replica_rng(seed: int, replica_id: int = 0) -> np.random.Generator:
    """Counter-based generator for one replica.

    Streams with different (seed, replica_id) keys are independent, so
    replicas can run in any order or in parallel and still reproduce.
    """
    key = np.array([seed & _MASK64, replica_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return replica_rng(int(rng), 0)


# ---------------------------------------------------------------------------
# ensemble specification


@dataclass
class EnsembleSpec:
    """Deterministic spectra of the two summands at matrix size N.

    eigs_a, eigs_b : array_like, length N, stored sorted descending
    beta : 1 (orthogonal conjugation) or 2 (unitary)
    """

    eigs_a: np.ndarray
    eigs_b: np.ndarray
    beta: int = 1

    def __post_init__(self):
        self.eigs_a = np.sort(np.asarray(self.eigs_a, dtype=float).ravel())[::-1].copy()
        self.eigs_b = np.sort(np.asarray(self.eigs_b, dtype=float).ravel())[::-1].copy()
        if self.eigs_a.size != self.eigs_b.size:
            raise ValueError("eigs_a and eigs_b must have equal length")
        if self.eigs_a.size < 2:
            raise ValueError("need N >= 2")
        if not (np.all(np.isfinite(self.eigs_a)) and np.all(np.isfinite(self.eigs_b))):
            raise ValueError("spectra must be finite")
        if self.beta not in (1, 2):
            raise ValueError("beta must be 1 or 2")

    @property
    def n(self) -> int:
        return int(self.eigs_a.size)

    @classmethod
    def from_measures(cls, mu_a: Measure, mu_b: Measure, n: int, beta: int = 1) -> "EnsembleSpec":
        return cls(
            eigs_a=spectrum_from_measure(mu_a, n),
            eigs_b=spectrum_from_measure(mu_b, n),
            beta=beta,
        )

    def to_json(self) -> dict:
        return {
            "eigs_a": self.eigs_a.tolist(),
            "eigs_b": self.eigs_b.tolist(),
            "beta": self.beta,
        }


def spectrum_from_measure(measure: Measure, n: int) -> np.ndarray:
    """Deterministic n-point discretization of a probability measure.

    Atomic measures get largest-remainder apportionment of the weights;
    continuous measures get density quantiles at levels (i - 1/2)/n.
    Returned sorted descending.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if isinstance(measure, AtomicMeasure):
        raw = measure.weights * n
        counts = np.floor(raw).astype(int)
        short = n - int(counts.sum())
        if short > 0:
            order = np.argsort(raw - counts)[::-1]
            counts[order[:short]] += 1
        vals = np.repeat(measure.atoms, counts)
        return np.sort(vals)[::-1]
    if isinstance(measure, GridMeasure):
        xs = measure.x
        pdf = measure.pdf
    else:
        sup = measure.support
        pad = 1e-9 * (1.0 + sup.right_edge - sup.left_edge)
        k = np.arange(32769)
        xs = sup.left_edge + (sup.right_edge - sup.left_edge) * 0.5 * (
            1.0 - np.cos(np.pi * k / 32768.0)
        )
        density = getattr(measure, "density", None)
        if density is not None:
            pdf = np.asarray(density(xs), dtype=float)
        else:
            pdf = -np.imag(measure.stieltjes_complex(xs + 1j * pad)) / np.pi
        pdf = np.clip(pdf, 0.0, None)
    cell = 0.5 * (pdf[1:] + pdf[:-1]) * np.diff(xs)
    cum = np.concatenate([[0.0], np.cumsum(cell)])
    cum /= cum[-1]
    levels = (np.arange(n) + 0.5) / n
    vals = np.interp(levels, cum, xs)
    return np.sort(vals)[::-1]


# ---------------------------------------------------------------------------
# Haar sampling and eigenvalue draws


def haar_sample(n: int, beta: int, rng) -> np.ndarray:
    """One Haar-distributed orthogonal (beta=1) or unitary (beta=2) matrix.

    QR of a standard Gaussian matrix with the diagonal of R normalized to
    positive entries / unit phases, which makes the factorization unique
    and the Q factor exactly Haar.
    """
    rng = _as_generator(rng)
    return _haar_block(n, beta, rng, 1)[0]


def _haar_block(n: int, beta: int, rng, count: int) -> np.ndarray:
    if beta == 2:
        z = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
    elif beta == 1:
        z = rng.standard_normal((count, n, n))
    else:
        raise ValueError("beta must be 1 or 2")
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    absd = np.abs(d)
    phase = np.where(absd == 0.0, 1.0, d / np.where(absd == 0.0, 1.0, absd))
    q = q * phase[:, None, :]
    return q


def _h_eigenvalues(eigs_a: np.ndarray, eigs_b: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Descending spectrum of diag(a) + U diag(b) U^*."""
    h = (u * eigs_b) @ u.conj().T
    idx = np.arange(eigs_a.size)
    h[idx, idx] += eigs_a
    return np.linalg.eigvalsh(h)[::-1]


def sample_H(spec: EnsembleSpec, u: np.ndarray) -> np.ndarray:
    """Eigenvalues (descending) of A + U B U^* for a given rotation U."""
    if u.shape != (spec.n, spec.n):
        raise ValueError("rotation has the wrong shape")
    return _h_eigenvalues(spec.eigs_a, spec.eigs_b, u)


def sample_eigenvalues(spec: EnsembleSpec, n_reps: int, seed: int, *,
                       first_replica: int = 0) -> np.ndarray:
    """(n_reps, N) array of spectra over independent Haar rotations.

    Replica k uses the (seed, first_replica + k) Philox stream; the output is
    identical however the internal batching (or an outer partition into
    first_replica ranges) splits the work.
    """
    n = spec.n
    out = np.empty((n_reps, n))
    block = max(1, int(2**21) // max(1, n * n))
    idx = np.arange(n)
    for i0 in range(0, n_reps, block):
        count = min(block, n_reps - i0)
        if spec.beta == 2:
            z = np.empty((count, n, n), dtype=complex)
            for k in range(count):
                g = replica_rng(seed, first_replica + i0 + k)
                z[k] = g.standard_normal((n, n)) + 1j * g.standard_normal((n, n))
        else:
            z = np.empty((count, n, n))
            for k in range(count):
                z[k] = replica_rng(seed, first_replica + i0 + k).standard_normal((n, n))
        q, r = np.linalg.qr(z)
        d = np.diagonal(r, axis1=1, axis2=2)
        absd = np.abs(d)
        phase = np.where(absd == 0.0, 1.0, d / np.where(absd == 0.0, 1.0, absd))
        q = q * phase[:, None, :]
        h = (q * spec.eigs_b[None, None, :]) @ q.conj().transpose(0, 2, 1)
        h[:, idx, idx] += spec.eigs_a
        out[i0 : i0 + count] = np.linalg.eigvalsh(h)[:, ::-1]
    return out


def empirical_measure(eigs) -> AtomicMeasure:
    """Uniform atoms at the given eigenvalues."""
    eigs = np.asarray(eigs, dtype=float).ravel()
    w = np.full(eigs.size, 1.0 / eigs.size)
    w /= w.sum()
    return AtomicMeasure(eigs, w)


def mean_empirical(eigs_list) -> AtomicMeasure:
    """Across-replica average of the empirical measures (pooled atoms)."""
    pooled = np.concatenate([np.asarray(e, dtype=float).ravel() for e in eigs_list])
    w = np.full(pooled.size, 1.0 / pooled.size)
    w /= w.sum()
    return AtomicMeasure(pooled, w)


# ---------------------------------------------------------------------------
# spherical integrals


@dataclass
class McEstimate:
    value: float
    std_err: float
    n_samples: int


def _sphere_exponents(theta: float, eigs: np.ndarray, beta: int, n: int, rng) -> np.ndarray:
    """n draws of N*theta*sum(eigs * v^2) with v uniform on the sphere."""
    n_dim = eigs.size
    out = np.empty(n)
    chunk = max(1, int(2**24) // max(1, n_dim))
    for i0 in range(0, n, chunk):
        m = min(chunk, n - i0)
        if beta == 2:
            # |g|^2 of a standard complex Gaussian is exactly Exponential
            g2 = rng.exponential(size=(m, n_dim))
        else:
            g2 = rng.standard_normal((m, n_dim)) ** 2
        out[i0 : i0 + m] = (g2 @ eigs) / g2.sum(axis=1)
    return n_dim * theta * out


def spherical_integral_mc(theta: float, eigs, beta: int, n: int, rng) -> McEstimate:
    """Monte Carlo estimate of (1/N) log E exp(N theta <v, diag(eigs) v>).

    v is uniform on the real (beta=1) or complex (beta=2) unit sphere,
    realized as a normalized standard Gaussian.  Log-mean-exp is computed
    with a max shift; the standard error is the delta-method error of the
    log divided by N.
    """
    eigs = np.asarray(eigs, dtype=float).ravel()
    rng = _as_generator(rng)
    n_dim = eigs.size
    s = _sphere_exponents(theta, eigs, beta, n, rng)
    m = s.max()
    w = np.exp(s - m)
    mean_w = w.mean()
    value = (m + math.log(mean_w)) / n_dim
    if n > 1:
        se = float(w.std(ddof=1) / (mean_w * math.sqrt(n))) / n_dim
    else:
        se = math.inf
    return McEstimate(value=float(value), std_err=se, n_samples=n)


def _log_spherical_exact_beta2(theta: float, eigs: np.ndarray) -> float:
    """log of the exact beta=2 spherical integral via divided differences.

    The integral over the complex sphere is (N-1)! times the divided
    difference of exp at the points N*theta*eigs; the divided difference
    is read off the corner entry of the exponential of the bidiagonal
    matrix with those nodes on the diagonal (Opitz' rule).  The constant
    superdiagonal c = ((N-1)!)^(1/(N-1)) folds the factorial into the
    corner entry so nothing under- or overflows.
    """
    n_dim = eigs.size
    t = np.sort(n_dim * theta * eigs)
    if n_dim == 1:
        return float(t[0])
    scale = max(1.0, float(np.abs(t).max()))
    jitter = 1e-12 * scale
    for attempt in range(6):
        tj = t.copy()
        for i in range(1, n_dim):
            if tj[i] < tj[i - 1] + jitter:
                tj[i] = tj[i - 1] + jitter
        tmax = tj[-1]
        c = math.exp(math.lgamma(n_dim) / (n_dim - 1))
        z = np.diag(tj - tmax) + np.diag(np.full(n_dim - 1, c), k=1)
        val = float(expm(z)[0, -1])
        if math.isfinite(val) and val > 0.0:
            if attempt > 0:
                warnings.warn(
                    "near-degenerate spectrum: spherical integral evaluated "
                    f"after jitter {jitter:.1e}",
                    RuntimeWarning,
                )
            return tmax + math.log(val)
        jitter *= 100.0
    raise DomainError("spherical integral: divided differences degenerate")


def spherical_exact_beta2(theta: float, eigs, *, log: bool = False) -> float:
    """Exact complex-sphere integral E exp(N theta <v, diag(eigs) v>).

    Returns the integral itself, or its log when log=True (the value can
    overflow float range for large N*theta*max(eigs)).
    """
    if theta <= 0.0:
        raise DomainError("need theta > 0")
    eigs = np.asarray(eigs, dtype=float).ravel()
    lv = _log_spherical_exact_beta2(theta, eigs)
    if log:
        return lv
    try:
        return math.exp(lv)
    except OverflowError:
        return math.inf


# ---------------------------------------------------------------------------
# tail probabilities


@dataclass
class TailEstimate:
    x: float
    delta: float
    p_hat: float
    std_err: float
    n_samples: int
    neg_log_rate: float


def _tail_from_counts(x, delta, hits, n, n_dim, std_err=None) -> TailEstimate:
    p_hat = hits / n
    if std_err is None:
        std_err = math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)
    if p_hat > 0.0:
        nlr = -math.log(p_hat) / n_dim
    else:
        # Wilson upper bound at z=1: p <= 1/(n+1) when no hits were seen
        nlr = math.log(n + 1.0) / n_dim
    return TailEstimate(
        x=float(x),
        delta=float(delta),
        p_hat=float(p_hat),
        std_err=float(std_err),
        n_samples=int(n),
        neg_log_rate=float(nlr),
    )


def tail_probability_mc(spec: EnsembleSpec, x: float, delta: float, n: int, seed: int) -> TailEstimate:
    """Plain Monte Carlo frequency of lambda_max in [x-delta, x+delta]."""
    n_dim = spec.n
    idx = np.arange(n_dim)
    block = max(1, int(2**21) // max(1, n_dim * n_dim))
    hits = 0
    for i0 in range(0, n, block):
        count = min(block, n - i0)
        if spec.beta == 2:
            z = np.empty((count, n_dim, n_dim), dtype=complex)
            for k in range(count):
                g = replica_rng(seed, i0 + k)
                z[k] = g.standard_normal((n_dim, n_dim)) + 1j * g.standard_normal((n_dim, n_dim))
        else:
            z = np.empty((count, n_dim, n_dim))
            for k in range(count):
                z[k] = replica_rng(seed, i0 + k).standard_normal((n_dim, n_dim))
        q, r = np.linalg.qr(z)
        d = np.diagonal(r, axis1=1, axis2=2)
        absd = np.abs(d)
        phase = np.where(absd == 0.0, 1.0, d / np.where(absd == 0.0, 1.0, absd))
        q = q * phase[:, None, :]
        h = (q * spec.eigs_b[None, None, :]) @ q.conj().transpose(0, 2, 1)
        h[:, idx, idx] += spec.eigs_a
        lmax = np.linalg.eigvalsh(h)[:, -1].real
        hits += int(np.count_nonzero(np.abs(lmax - x) <= delta))
    return _tail_from_counts(x, delta, hits, n, n_dim)


# ---------------------------------------------------------------------------
# tilted sampling


@dataclass
class TiltConfig:
    """Metropolis chain settings for the exponentially tilted rotation law."""

    theta: float
    n_burn: int = 2000
    n_keep: int = 8000
    proposal_angle: float = 1.2
    weight_mc_samples: int = 256

    def __post_init__(self):
        if self.theta < 0.0:
            raise ValueError("need theta >= 0")
        if self.n_burn <= 0 or self.n_keep <= 0:
            raise ValueError("n_burn and n_keep must be positive")
        if not (0.0 < self.proposal_angle < math.pi):
            raise ValueError("proposal_angle must lie in (0, pi)")
        if self.weight_mc_samples < 1:
            raise ValueError("weight_mc_samples must be positive")


@dataclass
class TiltResult:
    """Kept states of the tilted chain with inverse-tilt weights.

    log_inv_weight[k] = log I(theta, A) + log I(theta, B) - log I(theta, H_k),
    so mean(indicator * exp(log_inv_weight)) estimates the untilted
    probability of the event.
    """

    theta: float
    n_dim: int
    lambda_max: np.ndarray
    log_inv_weight: np.ndarray
    acceptance_rate: float
    n_burn: int

    def tail_estimate(self, x: float, delta: float) -> TailEstimate:
        ind = np.abs(self.lambda_max - x) <= delta
        vals = np.where(ind, np.exp(self.log_inv_weight), 0.0)
        n = vals.size
        p_hat = float(vals.mean())
        n_blocks = min(32, n)
        blocks = np.array_split(vals, n_blocks)
        bm = np.array([b.mean() for b in blocks])
        se = float(bm.std(ddof=1) / math.sqrt(n_blocks)) if n_blocks > 1 else math.inf
        est = _tail_from_counts(x, delta, p_hat * n, n, self.n_dim, std_err=se)
        return est


def _givens_propose(u: np.ndarray, beta: int, angle: float, rng) -> np.ndarray:
    n = u.shape[0]
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    phi = float(rng.uniform(-angle, angle))
    c, s = math.cos(phi), math.sin(phi)
    u2 = u.copy()
    if beta == 2:
        psi = float(rng.uniform(0.0, 2.0 * math.pi))
        e = complex(math.cos(psi), math.sin(psi))
        u2[i] = c * u[i] + s * e * u[j]
        u2[j] = -s * np.conj(e) * u[i] + c * u[j]
    else:
        u2[i] = c * u[i] + s * u[j]
        u2[j] = -s * u[i] + c * u[j]
    return u2


def tilted_sampler(spec: EnsembleSpec, tilt: TiltConfig, rng) -> TiltResult:
    """Metropolis chain targeting the exponentially tilted rotation law.

    The tilted density wrt Haar is proportional to I(theta, A + U B U^*);
    the chain proposes random Givens rotations (with an extra phase at
    beta=2).  Weights are exact at beta=2 (rank-one formula) and averaged
    sphere estimates at beta=1, which makes the beta=1 chain slightly
    approximate; kept states carry inverse-tilt log weights.
    """
    rng = _as_generator(rng)
    theta = tilt.theta
    n_dim = spec.n

    def log_i(eigs: np.ndarray) -> float:
        if theta == 0.0:
            return 0.0
        if spec.beta == 2:
            return _log_spherical_exact_beta2(theta, eigs)
        s = _sphere_exponents(theta, eigs, 1, tilt.weight_mc_samples, rng)
        m = s.max()
        return m + math.log(np.exp(s - m).mean())

    n_ref = max(tilt.weight_mc_samples, 8192)
    if theta == 0.0:
        log_ia = log_ib = 0.0
    elif spec.beta == 2:
        log_ia = _log_spherical_exact_beta2(theta, spec.eigs_a)
        log_ib = _log_spherical_exact_beta2(theta, spec.eigs_b)
    else:
        sa = _sphere_exponents(theta, spec.eigs_a, 1, n_ref, rng)
        sb = _sphere_exponents(theta, spec.eigs_b, 1, n_ref, rng)
        log_ia = sa.max() + math.log(np.exp(sa - sa.max()).mean())
        log_ib = sb.max() + math.log(np.exp(sb - sb.max()).mean())

    u = haar_sample(n_dim, spec.beta, rng)
    eigs = _h_eigenvalues(spec.eigs_a, spec.eigs_b, u)
    cur_log_i = log_i(eigs)

    lam = np.empty(tilt.n_keep)
    liw = np.empty(tilt.n_keep)
    accepted_burn = 0
    accepted = 0
    total = tilt.n_burn + tilt.n_keep
    # one chain step = a sweep of n_dim Givens micro-proposals, so kept
    # samples decorrelate on the scale of a few steps
    for step in range(total):
        for _ in range(n_dim):
            u2 = _givens_propose(u, spec.beta, tilt.proposal_angle, rng)
            eigs2 = _h_eigenvalues(spec.eigs_a, spec.eigs_b, u2)
            new_log_i = log_i(eigs2)
            if math.log(rng.uniform()) < new_log_i - cur_log_i:
                u, eigs, cur_log_i = u2, eigs2, new_log_i
                if step < tilt.n_burn:
                    accepted_burn += 1
                else:
                    accepted += 1
        if step == tilt.n_burn - 1 and accepted_burn < 0.01 * tilt.n_burn * n_dim:
            warnings.warn(
                f"tilted chain acceptance {accepted_burn / (tilt.n_burn * n_dim):.2%} "
                "over burn-in; reduce proposal_angle",
                RuntimeWarning,
            )
        if step >= tilt.n_burn:
            k = step - tilt.n_burn
            lam[k] = eigs[0]
            liw[k] = log_ia + log_ib - cur_log_i
    return TiltResult(
        theta=theta,
        n_dim=n_dim,
        lambda_max=lam,
        log_inv_weight=liw,
        acceptance_rate=(accepted_burn + accepted) / (total * n_dim),
        n_burn=tilt.n_burn,
    )


# ---------------------------------------------------------------------------
# rank-p deformations


@dataclass
class DeformedDraw:
    """One draw of the spiked model with the pieces needed for checks."""

    eigs_x: np.ndarray
    eigs_h: np.ndarray
    overlaps: np.ndarray  # |<spike-1 direction, eigenvector_i of H>|^2


def _unit_vector(n: int, beta: int, rng) -> np.ndarray:
    if beta == 2:
        g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    else:
        g = rng.standard_normal(n)
    return g / np.linalg.norm(g)


def sample_deformed(spec: EnsembleSpec, gammas, rng, *, return_parts: bool = False):
    """Eigenvalues (descending) of A + U B U^* + sum_i gamma_i u_i u_i^*.

    U is Haar; each spike direction u_i is an independent uniform unit
    vector (the first column of an independent Haar matrix).  With
    return_parts=True also returns the spectrum of the unspiked matrix and
    the squared overlaps of the first spike direction with its
    eigenvectors, for residual checks of the rank-one eigenvalue equation.
    """
    rng = _as_generator(rng)
    gammas = [float(g) for g in np.atleast_1d(np.asarray(getattr(gammas, "gammas", gammas), dtype=float))]
    n_dim = spec.n
    u = haar_sample(n_dim, spec.beta, rng)
    h = (u * spec.eigs_b) @ u.conj().T
    idx = np.arange(n_dim)
    h[idx, idx] += spec.eigs_a
    x = h.copy()
    dirs = []
    for g in gammas:
        v = _unit_vector(n_dim, spec.beta, rng)
        dirs.append(v)
        x += g * np.outer(v, v.conj())
    eigs_x = np.linalg.eigvalsh(x)[::-1]
    if not return_parts:
        return eigs_x
    eigs_h, vecs = np.linalg.eigh(h)
    overlaps = np.abs(vecs.conj().T @ dirs[0]) ** 2
    return DeformedDraw(eigs_x=eigs_x, eigs_h=eigs_h[::-1], overlaps=overlaps[::-1])


def secular_residual(eigs_h, overlaps, gamma: float, z: float) -> float:
    """|sum_i overlaps_i/(z - lambda_i) - 1/gamma| for a rank-one spike."""
    eigs_h = np.asarray(eigs_h, dtype=float).ravel()
    overlaps = np.asarray(overlaps, dtype=float).ravel()
    return abs(float(overlaps @ (1.0 / (z - eigs_h))) - 1.0 / gamma)


# ---------------------------------------------------------------------------
# weighted resolvents


def weighted_resolvent(eigs, x: float, rng, n: int) -> np.ndarray:
    """n draws of sum_i g_i^2/(x - lambda_i) / sum_i g_i^2, g standard normal."""
    eigs = np.asarray(eigs, dtype=float).ravel()
    rng = _as_generator(rng)
    inv = 1.0 / (x - eigs)
    out = np.empty(n)
    chunk = max(1, int(2**24) // max(1, eigs.size))
    for i0 in range(0, n, chunk):
        m = min(chunk, n - i0)
        g2 = rng.standard_normal((m, eigs.size)) ** 2
        out[i0 : i0 + m] = (g2 @ inv) / g2.sum(axis=1)
    return out
