"""Catalogue of stationary DPP kernel families.

Four isotropic parametric families (gauss, bessel, cauchy, whittle) with
closed-form spectral densities, existence bounds, analytic parameter
derivatives, and a lattice discretization.  Every family is parametrized
by an intensity ``rho`` (points per unit volume) and a range parameter
``alpha``; the whittle family carries an extra fixed shape ``sigma``.

Conventions: the Fourier transform uses the angular-frequency-free form
F[K](t) = integral K(x) exp(-2*pi*i*<t,x>) dx, so the spectral density
integrates to rho and existence of the process is exactly
sup_t spectral_density(t) <= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.special import jv, kv

from .errors import ExistenceViolated, TruncationOverflow

FAMILIES = ("gauss", "bessel", "cauchy", "whittle")

__all__ = [
    "FAMILIES",
    "KernelModel",
    "GridKernel",
    "SpectralDerivatives",
    "kernel",
    "kernel_radial",
    "spectral_density",
    "spectral_density_radial",
    "spectral_density_grad",
    "spectral_density_derivatives",
    "max_intensity",
    "alpha_max",
    "bessel_support_radius",
    "spectral_decay_radius",
    "discretize",
]


def max_intensity(family: str, alpha: float, sigma: float | None = None,
                  dim: int = 2) -> float:
    """Largest intensity for which the family member is a valid DPP kernel.

    The existence condition sup spectral_density <= 1 is rho <= max_intensity,
    since the density peaks at frequency zero and is linear in rho.
    """
    d = dim
    if family == "gauss":
        return (math.sqrt(math.pi) * alpha) ** (-d)
    if family == "bessel":
        return d ** (d / 2) / ((2 * math.pi) ** (d / 2) * alpha ** d
                               * gamma_fn(d / 2 + 1))
    if family == "cauchy":
        return gamma_fn((d + 1) / 2) / (math.pi ** ((d + 1) / 2) * alpha ** d)
    if family == "whittle":
        if sigma is None:
            raise ValueError("whittle family needs sigma")
        return gamma_fn(sigma) / (gamma_fn(sigma + d / 2)
                                  * (2 * math.sqrt(math.pi) * alpha) ** d)
    raise ValueError(f"unknown family {family!r}")


def alpha_max(family: str, rho: float, sigma: float | None = None,
              dim: int = 2) -> float:
    """Largest range parameter compatible with intensity rho.

    max_intensity scales as alpha**(-dim) in every family, so the bound
    inverts in closed form.
    """
    c1 = max_intensity(family, 1.0, sigma, dim)
    return (c1 / rho) ** (1.0 / dim)


def bessel_support_radius(alpha: float, dim: int = 2) -> float:
    """Radius of the bessel family's spectral support ball."""
    return math.sqrt(dim / 2.0) / (math.pi * alpha)


@dataclass(frozen=True)
class KernelModel:
    """One member of a stationary kernel family.

    sigma is required for the whittle family and rejected elsewhere.
    Existence (rho <= max_intensity) is enforced at construction; code
    that scans parameter grids should stay inside alpha_max.
    """

    family: str
    rho: float
    alpha: float
    sigma: float | None = None
    dim: int = 2

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.rho >= 0:
            raise ValueError("rho must be >= 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not (isinstance(self.dim, int) and self.dim >= 1):
            raise ValueError("dim must be a positive integer")
        if self.family == "whittle":
            if self.sigma is None or not self.sigma > 0:
                raise ValueError("whittle family needs sigma > 0")
        elif self.sigma is not None:
            raise ValueError(f"{self.family} family takes no sigma")
        cap = max_intensity(self.family, self.alpha, self.sigma, self.dim)
        if self.rho > cap * (1 + 1e-12):
            raise ExistenceViolated(
                f"rho={self.rho} exceeds max intensity {cap:.6g} "
                f"for {self.family}(alpha={self.alpha})")

    @property
    def max_intensity(self) -> float:
        return max_intensity(self.family, self.alpha, self.sigma, self.dim)

    @property
    def alpha_max(self) -> float:
        return alpha_max(self.family, self.rho, self.sigma, self.dim)

    @property
    def spectral_peak(self) -> float:
        """Spectral density at frequency zero, i.e. rho / max_intensity."""
        return self.rho / self.max_intensity


def _norm(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (dim,):
        raise ValueError(f"vectors must have last axis of length {dim}")
    return np.linalg.norm(x, axis=-1)


def kernel(model: KernelModel, x) -> np.ndarray:
    """Kernel value at lag vector(s) x, shape (..., dim)."""
    return kernel_radial(model, _norm(x, model.dim))


def kernel_radial(model: KernelModel, r):
    """Kernel value at radial distance(s) r >= 0."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    rr = np.atleast_1d(r)
    rho, a, d = model.rho, model.alpha, model.dim
    if model.family == "gauss":
        out = rho * np.exp(-((rr / a) ** 2))
    elif model.family == "bessel":
        z = math.sqrt(2.0 * d) * rr / a
        nu = d / 2.0
        out = np.full(z.shape, rho)
        nz = z > 0
        # J_nu(z)/z^nu -> 1/(2^nu Gamma(nu+1)) as z -> 0, cancelling the prefactor
        pref = rho * 2 ** nu * gamma_fn(nu + 1)
        out[nz] = pref * jv(nu, z[nz]) / z[nz] ** nu
    elif model.family == "cauchy":
        out = rho * (1.0 + (rr / a) ** 2) ** (-(d + 1) / 2.0)
    elif model.family == "whittle":
        s = model.sigma
        w = rr / a
        out = np.full(w.shape, rho)
        nz = w > 0
        out[nz] = rho * 2 ** (1 - s) / gamma_fn(s) * w[nz] ** s * kv(s, w[nz])
    else:
        raise ValueError(model.family)
    return float(out[0]) if scalar else out


def spectral_density(model: KernelModel, x) -> np.ndarray:
    """Spectral density at frequency vector(s) x, shape (..., dim)."""
    return spectral_density_radial(model, _norm(x, model.dim))


def spectral_density_radial(model: KernelModel, r):
    """Spectral density at radial frequency r >= 0; values in [0, 1]."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    rr = np.atleast_1d(r)
    rho, a, d = model.rho, model.alpha, model.dim
    if model.family == "gauss":
        out = rho * (math.sqrt(math.pi) * a) ** d \
            * np.exp(-((math.pi * a * rr) ** 2))
    elif model.family == "bessel":
        level = rho / max_intensity("bessel", a, None, d)
        # closed boundary: the support sphere itself is included
        out = np.where(rr <= bessel_support_radius(a, d), level, 0.0)
    elif model.family == "cauchy":
        pref = rho * (math.sqrt(math.pi) * a) ** d * math.sqrt(math.pi) \
            / gamma_fn((d + 1) / 2)
        out = pref * np.exp(-2 * math.pi * a * rr)
    elif model.family == "whittle":
        s = model.sigma
        pref = rho * gamma_fn(s + d / 2) / gamma_fn(s) \
            * (2 * math.sqrt(math.pi) * a) ** d
        out = pref * (1.0 + (2 * math.pi * a * rr) ** 2) ** (-(s + d / 2))
    else:
        raise ValueError(model.family)
    return float(out[0]) if scalar else out


class SpectralDerivatives(NamedTuple):
    """First and second partial derivatives of the spectral density in
    (rho, alpha) at fixed frequency."""

    d_rho: np.ndarray
    d_alpha: np.ndarray
    d_rho_rho: np.ndarray
    d_rho_alpha: np.ndarray
    d_alpha_alpha: np.ndarray


def spectral_density_derivatives(model: KernelModel, r) -> SpectralDerivatives:
    """All parameter derivatives of the radial spectral density.

    The density is linear in rho in every family, so d_rho = value/rho and
    d_rho_rho = 0.  For the bessel family the support boundary moves with
    alpha; derivatives are taken at fixed frequency where the indicator is
    locally constant (valid strictly inside or outside the support).
    """
    r = np.asarray(r, dtype=float)
    rho, a, d = model.rho, model.alpha, model.dim
    val = np.asarray(spectral_density_radial(model, r))
    if model.family == "gauss":
        g = d / a - 2 * math.pi ** 2 * a * r ** 2
        d_a = val * g
        d_aa = val * (g ** 2 - d / a ** 2 - 2 * math.pi ** 2 * r ** 2)
    elif model.family == "cauchy":
        g = d / a - 2 * math.pi * r
        d_a = val * g
        d_aa = val * (g ** 2 - d / a ** 2)
    elif model.family == "whittle":
        s = model.sigma
        u = 1.0 + (2 * math.pi * a * r) ** 2
        g = d / a - (s + d / 2) * 8 * math.pi ** 2 * a * r ** 2 / u
        gp = -d / a ** 2 - (s + d / 2) * 8 * math.pi ** 2 * r ** 2 \
            * (1.0 - (2 * math.pi * a * r) ** 2) / u ** 2
        d_a = val * g
        d_aa = val * (g ** 2 + gp)
    elif model.family == "bessel":
        # inside the support the value is rho * c(d) * alpha^d, so the
        # log-derivatives in alpha are d/alpha and d*(d-1)/alpha^2
        d_a = val * d / a
        d_aa = val * d * (d - 1) / a ** 2
    else:
        raise ValueError(model.family)
    zeros = np.zeros_like(val)
    return SpectralDerivatives(
        d_rho=val / rho,
        d_alpha=d_a,
        d_rho_rho=zeros,
        d_rho_alpha=d_a / rho,
        d_alpha_alpha=d_aa,
    )


def spectral_density_grad(model: KernelModel, r, param: str):
    """(first, second) derivative of the spectral density in one parameter.

    param is "rho", "alpha", or "rho_alpha" (cross derivative, returned as
    the first element with the pure-alpha second derivative alongside).
    """
    g = spectral_density_derivatives(model, r)
    if param == "rho":
        return g.d_rho, g.d_rho_rho
    if param == "alpha":
        return g.d_alpha, g.d_alpha_alpha
    if param == "rho_alpha":
        return g.d_rho_alpha, g.d_alpha_alpha
    raise ValueError(f"unknown parameter {param!r}")


def spectral_decay_radius(model: KernelModel, tol: float) -> float:
    """Radius beyond which the radial spectral density stays <= tol.

    Uses each family's monotone radial envelope; for bessel, the support
    radius itself (the density vanishes outside).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a, d = model.alpha, model.dim
    peak = model.spectral_peak
    if model.family == "bessel":
        return 0.0 if tol >= peak else bessel_support_radius(a, d)
    if peak <= tol:
        return 0.0
    if model.family == "gauss":
        return math.sqrt(math.log(peak / tol)) / (math.pi * a)
    if model.family == "cauchy":
        return math.log(peak / tol) / (2 * math.pi * a)
    if model.family == "whittle":
        s = model.sigma
        return math.sqrt((peak / tol) ** (1.0 / (s + d / 2)) - 1.0) \
            / (2 * math.pi * a)
    raise ValueError(model.family)


class GridKernel:
    """Stationary kernel on the integer lattice Z^d.

    Carries the lag-domain kernel (callable on integer lag vectors), the
    spectral density on the frequency torus [0,1]^d, and the truncation
    tail bound of the aliasing sum so existence checks stay conservative.
    """

    def __init__(self, dim: int, lag_kernel: Callable[[np.ndarray], np.ndarray],
                 torus_spectral: Callable[[np.ndarray], np.ndarray],
                 tail_bound: float = 0.0, eps: float | None = None,
                 spectral_sup: float | None = None) -> None:
        self.dim = dim
        self._lag_kernel = lag_kernel
        self._torus_spectral = torus_spectral
        self.tail_bound = tail_bound
        self.eps = eps
        self.spectral_sup = spectral_sup

    def kernel_lag(self, lags) -> np.ndarray:
        """Kernel at integer lag vectors, shape (..., dim)."""
        lags = np.asarray(lags, dtype=float)
        if lags.shape[-1:] != (self.dim,):
            raise ValueError("lag vectors must have last axis dim")
        return self._lag_kernel(lags)

    def spectral(self, t) -> np.ndarray:
        """Spectral density at frequencies t, shape (..., dim); periodic,
        reduced componentwise to [0,1)."""
        t = np.asarray(t, dtype=float)
        if t.shape[-1:] != (self.dim,):
            raise ValueError("frequency vectors must have last axis dim")
        return self._torus_spectral(t - np.floor(t))

    @classmethod
    def flat(cls, level: float, dim: int = 2) -> "GridKernel":
        """Synthetic kernel level*1{x=0}: constant spectral density."""
        if not 0 <= level < 1:
            raise ValueError("flat spectrum level must be in [0,1)")

        def lag(x: np.ndarray) -> np.ndarray:
            return np.where(np.all(x == 0, axis=-1), level, 0.0)

        def spec(t: np.ndarray) -> np.ndarray:
            return np.full(t.shape[:-1], level, dtype=float)

        return cls(dim, lag, spec, tail_bound=0.0, spectral_sup=level)


def _alias_tail_bound(model: KernelModel, eps: float, m: int) -> float:
    """Upper bound on the aliasing sum truncated at |k|_inf <= m.

    Every omitted offset k with |k|_inf = s has ||t+k|| >= s-1 for all
    t in [0,1]^d, and the radial density is decreasing, so shell s
    contributes at most count(s) * density((s-1)/eps).
    """
    d = model.dim

    def shell(s):
        count = (2 * s + 1) ** d - (2 * s - 1) ** d
        return count * np.asarray(spectral_density_radial(model, (s - 1) / eps))

    total = 0.0
    s0 = m + 1
    last = math.inf
    while True:
        s = np.arange(s0, s0 + 512, dtype=float)
        terms = shell(s)
        total += float(terms.sum())
        last = float(terms[-1])
        s0 += 512
        if last == 0.0 or last < 1e-6 * 1e-10:
            break
        if s0 > 10 ** 6:
            raise TruncationOverflow("aliasing tail did not converge")
    if last > 0.0:
        # integral comparison covers the smooth monotone remainder
        rem, _ = integrate.quad(lambda s: float(shell(s)), s0 - 1, np.inf,
                                limit=200)
        total += max(rem, 0.0)
    return total


def discretize(model: KernelModel, eps: float, tail_tol: float = 1e-10,
               check_grid: int = 64) -> GridKernel:
    """Lattice discretization with spacing eps.

    The lag kernel is eps^dim * kernel(eps * lag); its spectral density on
    the frequency torus is the continuous density summed over integer
    frequency offsets, truncated once the shell tail bound drops below
    tail_tol.  Raises ExistenceViolated when the discretized density
    (supremum over a check_grid^dim lattice plus tail bound) reaches 1,
    signalling that eps is too large.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = model.dim

    m = max(1, int(math.ceil(eps * spectral_decay_radius(model, tail_tol))) + 1)
    tail = _alias_tail_bound(model, eps, m)
    while tail >= tail_tol:
        m = max(m + 1, int(math.ceil(1.3 * m)))
        if m > 4096:
            raise TruncationOverflow(
                "aliasing sum needs more than 4096 offset shells")
        tail = _alias_tail_bound(model, eps, m)
    axes = [np.arange(-m, m + 1)] * d
    offsets = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")],
                       axis=-1).astype(float)

    def spec(t: np.ndarray) -> np.ndarray:
        flat = t.reshape(-1, d)
        out = np.zeros(flat.shape[0])
        # chunk the offset axis: full broadcast can reach GBs for slow decay
        step = max(1, 2 ** 22 // max(flat.shape[0], 1))
        for i in range(0, offsets.shape[0], step):
            block = flat[:, None, :] + offsets[i:i + step]
            radii = np.linalg.norm(block, axis=-1) / eps
            out += np.asarray(spectral_density_radial(model, radii)).sum(axis=-1)
        return out.reshape(t.shape[:-1])

    def lag(x: np.ndarray) -> np.ndarray:
        return eps ** d * np.asarray(
            kernel_radial(model, eps * np.linalg.norm(x, axis=-1)))

    axes = [np.arange(check_grid) / check_grid] * d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    sup = float(spec(mesh).max())
    if sup + tail >= 1.0:
        raise ExistenceViolated(
            f"discretized spectral density reaches {sup + tail:.6g} >= 1 "
            f"at eps={eps}; decrease eps")
    return GridKernel(d, lag, spec, tail_bound=tail, eps=eps,
                      spectral_sup=sup + tail)
