"""Sampling stationary DPPs on rectangles and finite grids.

On a rectangle the kernel is replaced by its Fourier approximation, whose
eigenvalues are the spectral density at the lattice of window frequencies
and whose eigenfunctions are the corresponding complex exponentials.  A
draw then proceeds in two stages: an independent Bernoulli coin per
retained mode picks a random projection kernel, and the projection DPP of
that rank is sampled by the sequential conditional-density algorithm
(rejection sampling from a constant envelope plus a Gram-Schmidt update of
the conditional kernel).  Composite windows are handled by restriction of
a bounding-rectangle draw, and finite grids by exact eigendecomposition.

Binomial and Poisson reference generators are included for benchmarking.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EigenFailure, RejectionStall, TruncationOverflow, WindowNotRect
from .families import GridKernel, KernelModel, spectral_density_radial
from .geometry import CompositeWindow, ObservationWindow, PointPattern, Rect
from .spectral import spectral_mode_tail_bound

__all__ = [
    "SpectralSampler",
    "GridProjectionSampler",
    "sample_dpp",
    "sample_dpp_window",
    "sample_grid_dpp",
    "sample_binomial",
    "sample_poisson",
]

# Enumeration stops once the shell-tail bound is this small relative to the
# mass found so far; the slack only inflates the retained radius slightly.
_TAIL_REL = 1e-5
_SHELL_CAP = 8192


def _chebyshev_shell(s: int, d: int) -> np.ndarray:
    """Integer vectors with max-norm exactly s, shape (m, d)."""
    if s == 0:
        return np.zeros((1, d), dtype=np.int64)
    if d == 1:
        return np.array([[-s], [s]], dtype=np.int64)
    if d == 2:
        edge = np.arange(-s, s + 1, dtype=np.int64)
        inner = np.arange(-s + 1, s, dtype=np.int64)
        return np.concatenate([
            np.stack([np.full_like(edge, -s), edge], axis=1),
            np.stack([np.full_like(edge, s), edge], axis=1),
            np.stack([inner, np.full_like(inner, -s)], axis=1),
            np.stack([inner, np.full_like(inner, s)], axis=1),
        ])
    full = np.arange(-s, s + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(*([full] * d), indexing="ij"), axis=-1)
    grid = grid.reshape(-1, d)
    return grid[np.abs(grid).max(axis=1) == s]


class SpectralSampler:
    """Spectral data of the Fourier kernel approximation on a rectangle.

    Holds the retained frequency modes (integer vectors k with ||k|| below
    the truncation radius), their Bernoulli probabilities (the spectral
    density at the mode frequency), and the window geometry.  Retained
    mass is at least `coverage` of the full lattice spectral mass, the
    default 0.999 keeping simulation bias well below estimator noise.
    """

    def __init__(self, model: KernelModel, window: Rect,
                 coverage: float = 0.999) -> None:
        if not isinstance(window, Rect):
            raise WindowNotRect("spectral sampler needs a rectangle window")
        if window.dim != model.dim:
            raise ValueError("window dimension does not match the model")
        if not 0.0 < coverage < 1.0:
            raise ValueError("coverage must be in (0, 1)")
        self.model = model
        self.window = window
        self.coverage = coverage

        sides = np.asarray(window.side_lengths, dtype=float)
        inv = 1.0 / sides
        l_max = float(sides.max())
        d = model.dim

        if model.rho == 0.0:
            self.modes = np.zeros((0, d), dtype=np.int64)
            self.probs = np.zeros(0)
            self.n_sim = 0
            self.retained_mass = 0.0
            self.total_mass_bound = 0.0
            return

        shells: list[np.ndarray] = []
        dens: list[np.ndarray] = []
        total_low = 0.0
        tail = math.inf
        s = 0
        while True:
            ks = _chebyshev_shell(s, d)
            p = spectral_density_radial(
                model, np.linalg.norm(ks * inv, axis=1))
            shells.append(ks)
            dens.append(p)
            total_low += float(p.sum())
            if s >= 8 and s % 8 == 0:
                tail = spectral_mode_tail_bound(model, s, l_max)
                if tail <= _TAIL_REL * total_low:
                    break
            if s > _SHELL_CAP:
                raise TruncationOverflow(
                    "spectral mass has not localized within the shell cap")
            s += 1

        modes = np.concatenate(shells)
        probs = np.concatenate(dens)
        total_upper = total_low + tail

        norms = np.linalg.norm(modes, axis=1)
        order = np.argsort(norms, kind="stable")
        csum = np.cumsum(probs[order])
        target = coverage * total_upper
        j = int(np.searchsorted(csum, target))
        j = min(j, len(csum) - 1)
        n_sim = int(math.floor(norms[order[j]])) + 1

        while n_sim > s:
            s += 1
            ks = _chebyshev_shell(s, d)
            p = spectral_density_radial(
                model, np.linalg.norm(ks * inv, axis=1))
            modes = np.concatenate([modes, ks])
            probs = np.concatenate([probs, p])
            norms = np.concatenate([norms, np.linalg.norm(ks, axis=1)])
            total_low += float(p.sum())
            total_upper = total_low + spectral_mode_tail_bound(
                model, s, l_max)

        keep = norms < n_sim
        modes, probs = modes[keep], probs[keep]
        # lexicographic mode order fixes the Bernoulli stream so equal
        # seeds give equal patterns on every platform
        order = np.lexsort(modes.T[::-1])
        self.modes = modes[order]
        self.probs = probs[order]
        self.n_sim = n_sim
        self.retained_mass = float(self.probs.sum())
        self.total_mass_bound = float(total_upper)

    @property
    def expected_count(self) -> float:
        """Mean cardinality of a draw, sum of the mode probabilities."""
        return float(self.probs.sum())

    @property
    def count_variance(self) -> float:
        """Variance of the cardinality, sum of p(1-p) over modes."""
        return float((self.probs * (1.0 - self.probs)).sum())

    def sample(self, rng: np.random.Generator,
               max_proposals: int = 1_000_000,
               batch: int = 2) -> PointPattern:
        """One draw from the spectrally approximated DPP.

        Bernoulli coins pick the active modes; the resulting projection
        DPP is sampled point by point, each conditional density handled
        by rejection from the constant envelope rank/|W| (projections of
        the conditional kernel only lower the intensity, so the bound
        stays valid throughout).  Raises RejectionStall if a point is not
        accepted within max_proposals proposals, which signals numerical
        degeneracy close to the existence boundary.
        """
        window = self.window
        d = self.model.dim
        if len(self.probs) == 0:
            return PointPattern(np.zeros((0, d)), window)
        active = rng.uniform(size=len(self.probs)) < self.probs
        kmodes = self.modes[active].astype(float)
        rank = len(kmodes)
        if rank == 0:
            return PointPattern(np.zeros((0, d)), window)

        lo = np.asarray(window.lo, dtype=float)
        sides = np.asarray(window.side_lengths, dtype=float)
        volume = window.volume
        envelope = rank / volume
        root_vol = math.sqrt(volume)

        # columns of comp[:, :r] form an orthonormal basis, in coefficient
        # space, of the functions still available after the points drawn
        # so far; the conditional intensity is the squared norm of a row's
        # projection onto it, and accepting a point removes one column via
        # a Householder rotation.  Work per proposal then shrinks with the
        # remaining rank, which keeps the late, rejection-heavy steps cheap.
        comp = np.eye(rank, dtype=complex)
        r = rank
        points = np.empty((rank, d))

        for t in range(rank):
            # acceptance rate is r/rank, so scale the batch to the
            # expected number of proposals (schedule depends only on t,
            # keeping the rng stream reproducible)
            b_t = min(max(batch, (3 * rank) // (2 * r)), 1024)
            used = 0
            accepted = False
            while not accepted:
                if used >= max_proposals:
                    raise RejectionStall(
                        "no acceptance within %d proposals at point %d of "
                        "%d; spectrum is close to saturation" %
                        (max_proposals, t + 1, rank))
                b = min(b_t, max_proposals - used)
                unit = rng.uniform(size=(b, d))
                height = rng.uniform(size=b) * envelope
                used += b
                rows = np.exp(2j * np.pi * (unit @ kmodes.T)) / root_vol
                proj = rows @ comp[:, :r]
                lam = (proj.real ** 2 + proj.imag ** 2).sum(axis=1)
                hits = np.nonzero(height < lam)[0]
                if hits.size == 0:
                    continue
                i = int(hits[0])
                # constraint f(x)=0 removes one direction of the available
                # coefficient space; rotate it onto the last column and
                # shrink the active block
                u = proj[i].conj() / math.sqrt(lam[i])
                tip = u[r - 1]
                phase = tip / abs(tip) if abs(tip) > 0.0 else 1.0
                v = u.copy()
                v[r - 1] += phase
                beta = 1.0 / (1.0 + abs(tip))
                qv = comp[:, :r] @ v
                comp[:, :r - 1] -= beta * np.outer(qv, v[:r - 1].conj())
                r -= 1
                points[t] = lo + unit[i] * sides
                accepted = True

        return PointPattern(points, window)


def sample_dpp(model: KernelModel, window: Rect, rng: np.random.Generator,
               coverage: float = 0.999,
               max_proposals: int = 1_000_000) -> PointPattern:
    """Draw one pattern on a rectangle window.

    Convenience wrapper building the spectral data each call; construct a
    SpectralSampler once when drawing many replicates.
    """
    return SpectralSampler(model, window, coverage).sample(
        rng, max_proposals=max_proposals)


def sample_dpp_window(model: KernelModel, window: ObservationWindow,
                      rng: np.random.Generator, coverage: float = 0.999,
                      max_proposals: int = 1_000_000) -> PointPattern:
    """Draw one pattern on a rectangle or composite window.

    A composite window is handled by sampling its bounding rectangle and
    keeping the points inside, which is exact because the kernel of the
    restricted process is the restriction of the kernel.
    """
    if isinstance(window, Rect):
        return sample_dpp(model, window, rng, coverage, max_proposals)
    box = window.bounding_box
    full = sample_dpp(model, box, rng, coverage, max_proposals)
    inside = window.contains(full.points)
    return PointPattern(full.points[inside], window)


def _finite_projection_sample(vectors: np.ndarray,
                              rng: np.random.Generator) -> np.ndarray:
    """Exact projection-DPP sample on a finite ground set.

    vectors holds orthonormal columns; returns the selected row indices.
    Each step picks a site with probability proportional to the squared
    row norm of the current basis, then projects the coefficient space
    onto the complement of the chosen row.
    """
    state = np.array(vectors, dtype=float)
    n, rank = state.shape
    chosen = np.empty(rank, dtype=np.intp)
    for t in range(rank):
        w = np.einsum("ij,ij->i", state, state)
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if total <= 0.0:
            raise EigenFailure("projection basis collapsed during sampling")
        i = rng.choice(n, p=w / total)
        chosen[t] = i
        u = state[i] / math.sqrt(w[i])
        state -= np.outer(state @ u, u)
    return chosen


class GridProjectionSampler:
    """Eigendecomposed lattice kernel on a finite box, reusable per draw.

    The ground set is the integer sites in [0, shape_1) x ... x
    [0, shape_d); the full kernel matrix over the box is eigendecomposed
    once, then each draw keeps eigenvectors by independent Bernoulli
    coins on their eigenvalues and samples the resulting projection DPP
    exactly.
    """

    def __init__(self, grid_kernel: GridKernel,
                 shape: tuple[int, ...]) -> None:
        shape = tuple(int(m) for m in shape)
        if len(shape) != grid_kernel.dim:
            raise ValueError("box dimension does not match the kernel")
        if any(m < 1 for m in shape):
            raise ValueError("box extents must be positive")
        self.grid_kernel = grid_kernel
        self.shape = shape
        axes = [np.arange(m) for m in shape]
        sites = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        self.sites = sites.reshape(-1, grid_kernel.dim)
        lags = self.sites[:, None, :] - self.sites[None, :, :]
        matrix = grid_kernel.kernel_lag(lags)
        try:
            evals, evecs = np.linalg.eigh(matrix)
        except np.linalg.LinAlgError as exc:
            raise EigenFailure("eigendecomposition failed: %s" % exc) from exc
        if evals.min() < -1e-8 or evals.max() > 1.0 + 1e-8:
            raise EigenFailure(
                "kernel eigenvalues leave [0,1]: range [%g, %g]" %
                (evals.min(), evals.max()))
        self.evals = np.clip(evals, 0.0, 1.0)
        self.evecs = evecs

    @property
    def expected_count(self) -> float:
        return float(self.evals.sum())

    @property
    def count_variance(self) -> float:
        return float((self.evals * (1.0 - self.evals)).sum())

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Occupied sites of one draw, integer array of shape (count, d)."""
        active = rng.uniform(size=len(self.evals)) < self.evals
        if not active.any():
            return np.zeros((0, self.grid_kernel.dim), dtype=np.int64)
        idx = _finite_projection_sample(self.evecs[:, active], rng)
        return self.sites[idx]


def sample_grid_dpp(grid_kernel: GridKernel, shape: tuple[int, ...],
                    rng: np.random.Generator) -> np.ndarray:
    """Exact draw of a lattice DPP on a finite box of grid sites.

    Convenience wrapper; construct a GridProjectionSampler once when
    drawing many replicates (the eigendecomposition dominates).
    """
    return GridProjectionSampler(grid_kernel, shape).sample(rng)


def _uniform_in(window: ObservationWindow, count: int,
                rng: np.random.Generator) -> np.ndarray:
    """count iid uniform points in the window (rejection from the box)."""
    if isinstance(window, Rect):
        lo = np.asarray(window.lo, dtype=float)
        sides = np.asarray(window.side_lengths, dtype=float)
        return lo + rng.uniform(size=(count, window.dim)) * sides
    box = window.bounding_box
    lo = np.asarray(box.lo, dtype=float)
    sides = np.asarray(box.side_lengths, dtype=float)
    out = np.empty((count, window.dim))
    have = 0
    while have < count:
        need = count - have
        factor = max(2, int(math.ceil(1.5 * box.volume / window.volume)))
        cand = lo + rng.uniform(size=(need * factor, window.dim)) * sides
        cand = cand[window.contains(cand)]
        take = min(len(cand), need)
        out[have:have + take] = cand[:take]
        have += take
    return out


def sample_poisson(intensity: float, window: ObservationWindow,
                   rng: np.random.Generator) -> PointPattern:
    """Homogeneous Poisson reference pattern of the given intensity."""
    if intensity < 0:
        raise ValueError("intensity must be nonnegative")
    count = int(rng.poisson(intensity * window.volume))
    return PointPattern(_uniform_in(window, count, rng), window)


def sample_binomial(count: int, window: ObservationWindow,
                    rng: np.random.Generator) -> PointPattern:
    """Fixed-count binomial reference pattern (iid uniform points)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return PointPattern(_uniform_in(window, count, rng), window)
