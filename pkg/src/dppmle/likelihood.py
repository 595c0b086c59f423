"""Normalized log-likelihood evaluators for stationary DPP models.

All evaluators share the decomposition

    value = 1 + fredholm_term + logdet_term,

where fredholm_term approximates the per-volume Fredholm log-determinant
of the kernel operator by an integral (or mode sum) of log(1 - spectral
density), and logdet_term is the per-volume log-determinant of the
likelihood-kernel matrix on the observed points.  Variants differ in the
distance matrix (plain, torus-wrapped, edge-corrected) or in replacing
the likelihood kernel by a truncated Fourier series baseline.

A non-positive determinant is reported through the diagnostics instead
of raising, so optimizers can skip the parameter value and continue.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .errors import (DegeneratePattern, EmptyInteriorPool, SaturatedSpectrum,
                     SingularL0Matrix, TruncationOverflow, WindowNotRect)
from .families import (KernelModel, alpha_max, bessel_support_radius,
                       spectral_decay_radius, spectral_density_radial)
from .geometry import (DistanceMatrix, PointPattern, Rect, pairwise,
                       pairwise_torus)
from .linalg import signed_logdet
from .spectral import (SATURATION_GAP, SpectralProfile,
                       spectral_mode_tail_bound)

__all__ = [
    "LikelihoodEvaluation",
    "fredholm_integral",
    "likelihood_matrix",
    "loglik_from_distances",
    "loglik_plain",
    "loglik_torus",
    "loglik_fourier",
    "edge_correct_distances",
    "loglik_edge_corrected",
    "periodic_eigenvalue_check",
    "PeriodicSpectrumCheck",
]


@dataclass(frozen=True)
class LikelihoodEvaluation:
    """One objective evaluation with its decomposition and diagnostics.

    value is None when the determinant came out negative (the evaluator
    reports the sign in diagnostics instead of failing); it is -inf when
    the determinant is exactly zero to working precision.
    """

    value: float | None
    fredholm_term: float
    logdet_term: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def usable(self) -> bool:
        return self.value is not None and np.isfinite(self.value)


def fredholm_integral(model: KernelModel) -> float:
    """Integral of log(1 - spectral density) over frequency space.

    Radial reduction plus adaptive quadrature; closed form for the
    bessel family, whose flat compactly supported spectral density gives
    max_intensity * log(1 - rho/max_intensity) exactly.
    """
    if model.rho == 0.0:
        return 0.0
    if model.spectral_peak >= 1.0 - SATURATION_GAP:
        raise SaturatedSpectrum(
            f"spectral peak {model.spectral_peak} too close to 1")
    if model.family == "bessel":
        cap = model.max_intensity
        return cap * math.log1p(-model.rho / cap)
    d = model.dim
    surface = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    upper = spectral_decay_radius(model, 1e-22 * model.spectral_peak)

    def integrand(s):
        return s ** (d - 1) * np.log1p(-spectral_density_radial(model, s))

    scale = 1.0 / (math.pi * model.alpha)
    pts = sorted({p for p in (scale, 5.0 * scale) if 0.0 < p < upper})
    val, err = scipy.integrate.quad(integrand, 0.0, upper, points=pts or None,
                                    epsabs=1e-10, epsrel=1e-10, limit=500)
    return surface * val


def likelihood_matrix(profile: SpectralProfile, dmat: DistanceMatrix
                      ) -> np.ndarray:
    """Likelihood-kernel matrix L0(r_ij) from a distance matrix."""
    r = dmat.matrix
    n = r.shape[0]
    out = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    rv = r[iu]
    if rv.size:
        order = np.argsort(rv)
        vals = np.empty_like(rv)
        vals[order] = np.atleast_1d(profile.value(rv[order],
                                                  assume_sorted=True))
        out[iu] = vals
        out += out.T
    np.fill_diagonal(out, profile.value(0.0))
    return out


def _evaluation(matrix: np.ndarray, fredholm: float, volume: float,
                diagnostics: dict) -> LikelihoodEvaluation:
    try:
        sign, log_abs = signed_logdet(matrix)
    except SingularL0Matrix:
        sign, log_abs = 0, -np.inf
    diagnostics = dict(diagnostics)
    diagnostics["determinant_sign"] = sign
    if sign > 0:
        diagnostics["min_eigen_estimate"] = None
        ld = log_abs / volume
        return LikelihoodEvaluation(1.0 + fredholm + ld, fredholm, ld,
                                    diagnostics)
    diagnostics["min_eigen_estimate"] = float(
        np.linalg.eigvalsh(matrix).min())
    if sign == 0:
        return LikelihoodEvaluation(-np.inf, fredholm, -np.inf, diagnostics)
    return LikelihoodEvaluation(None, fredholm, log_abs / volume, diagnostics)


def loglik_from_distances(model: KernelModel, dmat: DistanceMatrix,
                          volume: float,
                          profile: SpectralProfile | None = None,
                          fredholm: float | None = None
                          ) -> LikelihoodEvaluation:
    """Core evaluator on a fixed distance matrix.

    profile and fredholm can be passed in when the caller caches them
    across evaluations (one profile per model, one matrix per fit).
    """
    if profile is None:
        profile = SpectralProfile(model)
    if fredholm is None:
        fredholm = fredholm_integral(model)
    mat = likelihood_matrix(profile, dmat)
    return _evaluation(mat, fredholm, volume,
                       {"truncation": profile.n_terms, "mode": dmat.mode})


def _check_pattern(model: KernelModel, pattern: PointPattern) -> None:
    if pattern.window.dim != model.dim:
        raise ValueError("model dimension does not match the window")
    if pattern.n_points == 0:
        raise DegeneratePattern("likelihood needs a nonempty pattern")


def loglik_plain(model: KernelModel, pattern: PointPattern
                 ) -> LikelihoodEvaluation:
    """Likelihood approximation on plain Euclidean distances."""
    _check_pattern(model, pattern)
    return loglik_from_distances(model, pairwise(pattern),
                                 pattern.window.volume)


def loglik_torus(model: KernelModel, pattern: PointPattern
                 ) -> LikelihoodEvaluation:
    """Periodic variant: distances wrapped on the window torus.

    The wrapped matrix can lose positive definiteness under strong
    repulsion; the determinant sign lands in the diagnostics.
    """
    _check_pattern(model, pattern)
    return loglik_from_distances(model, pairwise_torus(pattern),
                                 pattern.window.volume)


def _dirichlet(y: np.ndarray, n: int) -> np.ndarray:
    """sin((2n+1) pi y) / sin(pi y), the 1-periodic mode-sum kernel."""
    t = y - np.round(y)
    s = np.sin(np.pi * t)
    small = np.abs(s) < 1e-12
    t_safe = np.where(small, 1.0, t)
    out = np.sin((2 * n + 1) * np.pi * t_safe) / np.sin(np.pi * t_safe)
    return np.where(small, float(2 * n + 1), out)


def _cube_shell(s: int, d: int) -> np.ndarray:
    """Integer points with max-norm exactly s, enumerated face by face."""
    if s == 0:
        return np.zeros((1, d), dtype=np.int64)
    pieces = []
    for axis in range(d):
        before = [np.arange(-s, s + 1)] * axis
        after = [np.arange(-s + 1, s)] * (d - axis - 1)
        for sign in (-s, s):
            axes = before + [np.array([sign])] + after
            pieces.append(np.stack(np.meshgrid(*axes, indexing="ij"),
                                   axis=-1).reshape(-1, d))
    return np.concatenate(pieces)


def _fourier_mode_radius(model: KernelModel, sides: np.ndarray,
                         coverage: float, n_cap: int) -> int:
    """Smallest N whose cube of modes carries `coverage` of the total
    spectral mass; the mass outside the scanned cubes is bounded by an
    integral majorant (radially decreasing density).  Aborts early once
    the mass inside the cap provably cannot reach the coverage target
    (the running total only grows, so the shortfall is conclusive)."""
    inv = 1.0 / sides
    d = sides.size
    l_max = float(sides.max())
    shell_sums = [float(spectral_density_radial(model, 0.0))]
    total_low = shell_sums[0]
    acc_cap = shell_sums[0]
    s = 0
    hard_cap = 8192
    next_check = 8
    tail = np.inf
    while True:
        s += 1
        if s > hard_cap:
            raise TruncationOverflow(
                "spectral mass sum did not localize within "
                f"{hard_cap} shells")
        pts = _cube_shell(s, d)
        t = np.linalg.norm(pts * inv, axis=1)
        shell_sums.append(float(np.sum(spectral_density_radial(model, t))))
        total_low += shell_sums[-1]
        if s <= n_cap:
            acc_cap += shell_sums[-1]
        elif acc_cap <= coverage * total_low:
            raise TruncationOverflow(
                f"fourier truncation exceeds cap {n_cap}: cube mass at "
                f"the cap covers {acc_cap / total_low:.6f} < {coverage}")
        if s == next_check:
            tail = spectral_mode_tail_bound(model, s, l_max)
            if tail <= 1e-6 * total_low:
                break
            next_check *= 2
    total = total_low + tail
    acc = 0.0
    for n, val in enumerate(shell_sums):
        acc += val
        if acc > coverage * total:
            if n > n_cap:
                raise TruncationOverflow(
                    f"fourier truncation N={n} exceeds cap {n_cap}")
            return max(n, 1)
    raise TruncationOverflow(
        f"coverage {coverage} not reached within {len(shell_sums)} shells")


def _fourier_gram(points: np.ndarray, modes: np.ndarray, coeffs: np.ndarray,
                  inv_sides: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    gram = np.zeros((n, n), dtype=complex)
    step = max(1, (1 << 21) // max(n, 1))
    for start in range(0, modes.shape[0], step):
        block = modes[start:start + step]
        weight = np.sqrt(coeffs[start:start + step])
        phase = np.exp(2j * np.pi * (points @ (block * inv_sides).T))
        v = phase * weight
        gram += v @ v.conj().T
    return gram.real


def loglik_fourier(model: KernelModel, pattern: PointPattern,
                   coverage: float = 0.99, n_cap: int = 256
                   ) -> LikelihoodEvaluation:
    """Fourier-series baseline on a rectangle window.

    Modes k are scaled by the inverse side lengths; the truncation N is
    the smallest cube capturing `coverage` of the spectral mass, and the
    retained set is the Euclidean ball of radius N.  The bessel family
    has a flat, compactly supported density: its mode set is the support
    ellipse directly, and on the unit square the mode sum collapses to a
    product of two 1-D periodic kernels.
    """
    if not isinstance(pattern.window, Rect):
        raise WindowNotRect("fourier baseline needs a rectangle window")
    if pattern.window.dim != model.dim:
        raise ValueError("model dimension does not match the window")
    if model.spectral_peak >= 1.0 - SATURATION_GAP:
        raise SaturatedSpectrum(
            f"spectral peak {model.spectral_peak} too close to 1")
    window = pattern.window
    sides = window.side_lengths
    inv = 1.0 / sides
    volume = window.volume
    d = model.dim
    pts = pattern.points - np.array(window.lo)

    if model.family == "bessel" and model.rho > 0.0:
        support = bessel_support_radius(model.alpha, d)
        n_trunc = int(math.floor(sides.max() * support))
        peak = model.spectral_peak
        ranges = [np.arange(-n_trunc, n_trunc + 1)] * d
        grid = np.stack(np.meshgrid(*ranges, indexing="ij"),
                        axis=-1).reshape(-1, d)
        inside = np.linalg.norm(grid * inv, axis=1) <= support
        fredholm = inside.sum() * math.log1p(-peak) / volume
        diagnostics = {"truncation": n_trunc, "mode": "fourier"}
        unit_square = d == 2 and np.allclose(sides, 1.0)
        if unit_square:
            c = peak / (1.0 - peak)
            dx = pts[:, 0][:, None] - pts[:, 0][None, :]
            dy = pts[:, 1][:, None] - pts[:, 1][None, :]
            mat = c * _dirichlet(dx, n_trunc) * _dirichlet(dy, n_trunc)
            return _evaluation(mat, fredholm, volume, diagnostics)
        if n_trunc > n_cap:
            raise TruncationOverflow(
                f"fourier truncation N={n_trunc} exceeds cap {n_cap}")
        modes = grid[inside]
        coeffs = np.full(modes.shape[0], peak / (1.0 - peak))
        mat = _fourier_gram(pts, modes, coeffs, inv) / volume
        return _evaluation(mat, fredholm, volume, diagnostics)

    if model.rho == 0.0 or model.spectral_peak == 0.0:
        n_pts = pattern.n_points
        diagnostics = {"truncation": 0, "mode": "fourier",
                       "determinant_sign": 0 if n_pts else 1,
                       "min_eigen_estimate": 0.0 if n_pts else None}
        if n_pts == 0:
            return LikelihoodEvaluation(1.0, 0.0, 0.0, diagnostics)
        return LikelihoodEvaluation(-np.inf, 0.0, -np.inf, diagnostics)

    n_trunc = _fourier_mode_radius(model, sides, coverage, n_cap)
    ranges = [np.arange(-n_trunc, n_trunc + 1)] * d
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"),
                    axis=-1).reshape(-1, d)
    in_ball = np.einsum("ij,ij->i", grid, grid) < n_trunc ** 2
    modes = grid[in_ball]
    t = np.linalg.norm(modes * inv, axis=1)
    density = spectral_density_radial(model, t)
    fredholm = float(np.sum(np.log1p(-density))) / volume
    coeffs = density / (1.0 - density)
    mat = _fourier_gram(pts, modes, coeffs, inv) / volume
    return _evaluation(mat, fredholm, volume,
                       {"truncation": n_trunc, "mode": "fourier"})


def edge_correct_distances(pattern: PointPattern, model_upper: KernelModel,
                           rng: np.random.Generator) -> DistanceMatrix:
    """Resample boundary-distorted entries of the distance matrix.

    Three steps: (1) the interaction range r_max is the largest observed
    distance at which the positive part of the reference likelihood
    kernel still exceeds 0.001 of its value at zero; (2) points closer
    than r_max to the boundary form the border set, and interior points
    supply a pool of neighbour counts and a pool of neighbour distances;
    (3) each border point draws a target count from the interior pool
    and, scanning the remaining indices in input order, replaces that
    many beyond-range entries with interior distances larger than its
    own boundary distance (applied symmetrically).

    Counts and pools are frozen from the original matrix, so later
    replacements do not feed back into the correction.
    """
    if pattern.n_points < 2:
        raise DegeneratePattern("edge correction needs at least 2 points")
    dmat = pairwise(pattern)
    r = dmat.matrix.copy()
    n = r.shape[0]
    profile = SpectralProfile(model_upper)
    at_zero = profile.value(0.0)
    iu = np.triu_indices(n, 1)
    vals = np.atleast_1d(profile.value(r[iu]))
    in_range = vals > 1e-3 * at_zero
    r_max = float(r[iu][in_range].max()) if bool(in_range.any()) else 0.0
    if r_max == 0.0:
        return DistanceMatrix(r, "edge-corrected")

    depth = np.atleast_1d(pattern.window.boundary_distances(pattern.points))
    border = depth < r_max
    if not bool(border.any()):
        return DistanceMatrix(r, "edge-corrected")
    interior = ~border
    if not bool(interior.any()):
        raise EmptyInteriorPool(
            "no interior points: window too small for the interaction "
            f"range {r_max:.4g}")
    off_diag = ~np.eye(n, dtype=bool)
    near = (r <= r_max) & off_diag
    counts = near.sum(axis=1)
    count_pool = counts[interior]
    dist_pool = r[interior][:, :][near[interior]]

    for i in np.nonzero(border)[0]:
        target = int(rng.choice(count_pool))
        deficit = target - int(counts[i])
        if deficit <= 0:
            continue
        replaced = 0
        for j in range(i + 1, n):
            if replaced >= deficit:
                break
            if r[i, j] <= r_max:
                continue
            candidates = dist_pool[dist_pool > depth[i]]
            if candidates.size == 0:
                break
            new = float(rng.choice(candidates))
            r[i, j] = r[j, i] = new
            replaced += 1
    return DistanceMatrix(r, "edge-corrected")


def loglik_edge_corrected(model: KernelModel, pattern: PointPattern,
                          rng: np.random.Generator) -> LikelihoodEvaluation:
    """loglik_plain on an edge-corrected distance matrix.

    The reference kernel for the interaction range is (rho_hat,
    0.9 * alpha_max); when every point is border (no interior pool) the
    evaluator warns and falls back to plain distances.
    """
    _check_pattern(model, pattern)
    rho_hat = pattern.intensity
    upper = KernelModel(model.family, rho_hat,
                        0.9 * alpha_max(model.family, rho_hat,
                                        sigma=model.sigma, dim=model.dim),
                        sigma=model.sigma, dim=model.dim)
    try:
        dmat = edge_correct_distances(pattern, upper, rng)
    except EmptyInteriorPool as exc:
        warnings.warn(f"edge correction unavailable ({exc}); "
                      "using plain distances", stacklevel=2)
        dmat = pairwise(pattern)
    return loglik_from_distances(model, dmat, pattern.window.volume)


@dataclass(frozen=True)
class PeriodicSpectrumCheck:
    """Fourier coefficients of the torus-wrapped likelihood kernel.

    all_positive flags material negative spectral mass only: wrapping a
    smooth kernel at the half-period kink injects genuine but tiny
    (~1e-6 relative) negative coefficients at high frequencies, while a
    truncated-support kernel under strong repulsion produces order-0.1
    relative negative mass (the negative-determinant regime).  Negative
    coefficients below noise_floor times the maximum are ignored.
    """

    coefficients: np.ndarray
    k_range: int
    noise_floor: float = 1e-5

    @property
    def min_coefficient(self) -> float:
        return float(self.coefficients.min())

    @property
    def all_positive(self) -> bool:
        tol = self.noise_floor * float(self.coefficients.max())
        return self.min_coefficient > -tol


def periodic_eigenvalue_check(model: KernelModel, window: Rect,
                              k_range: int = 64, panels: int = 8,
                              order: int = 32) -> PeriodicSpectrumCheck:
    """Torus eigenvalue diagnostic over a finite frequency box.

    Computes (1/|W|) * integral over W of L0(wrapped x) times the
    conjugate frequency-k character, for k in [-k_range, k_range]^2, by
    panelled Gauss-Legendre quadrature (panel count even so the wrap
    kink at half-period lands on a panel edge).  All-positive output
    means the periodic kernel is positive definite on this box.
    """
    if model.dim != 2 or window.dim != 2:
        raise ValueError("periodic diagnostic is 2-D only")
    if panels % 2:
        raise ValueError("panel count must be even")
    sides = window.side_lengths
    profile = SpectralProfile(model)
    base, base_w = np.polynomial.legendre.leggauss(order)

    nodes, weights = [], []
    for length in sides:
        edges = np.linspace(0.0, length, panels + 1)
        x = np.concatenate([0.5 * (b - a) * base + 0.5 * (a + b)
                            for a, b in zip(edges[:-1], edges[1:])])
        w = np.concatenate([0.5 * (b - a) * base_w
                            for a, b in zip(edges[:-1], edges[1:])])
        nodes.append(x)
        weights.append(w)

    wrapped = [np.abs(x - length * np.round(x / length))
               for x, length in zip(nodes, sides)]
    radius = np.hypot(wrapped[0][:, None], wrapped[1][None, :])
    flat = radius.ravel()
    order_idx = np.argsort(flat)
    vals = np.empty_like(flat)
    vals[order_idx] = np.atleast_1d(profile.value(flat[order_idx],
                                                  assume_sorted=True))
    weighted = (weights[0][:, None] * weights[1][None, :]
                * vals.reshape(radius.shape))

    ks = np.arange(-k_range, k_range + 1)
    phase_x = np.exp(-2j * np.pi * np.outer(ks, nodes[0] / sides[0]))
    phase_y = np.exp(-2j * np.pi * np.outer(ks, nodes[1] / sides[1]))
    coeff = phase_x @ weighted @ phase_y.T / window.volume
    return PeriodicSpectrumCheck(coeff.real, k_range)
