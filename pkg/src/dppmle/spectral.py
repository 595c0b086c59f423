"""Likelihood kernel of a stationary DPP: closed-form series, truncation
policy, Hankel-transform route, and self-convolution bounds.

The likelihood kernel is the inverse transform of
spectral_density / (1 - spectral_density).  Expanding the ratio as a
geometric series in the spectral density turns it into a sum of n-fold
kernel self-convolutions, which the four families admit in closed form;
this module evaluates that series with a documented truncation rule and
provides an independent oscillatory-quadrature route for cross-checks
and for kernels without closed-form terms.
"""

from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import gammaln, jn_zeros, jv, kve

from . import families as fam
from .errors import QuadratureFailure, SaturatedSpectrum

__all__ = [
    "SpectralProfile",
    "LikelihoodKernelDerivatives",
    "spectral_ratio",
    "likelihood_kernel_hankel",
    "spectral_mode_tail_bound",
    "convolution_power_bound",
]

SATURATION_GAP = 1e-12


def spectral_ratio(model: fam.KernelModel, r) -> np.ndarray:
    """spectral_density / (1 - spectral_density) at radial frequency r.

    Raises SaturatedSpectrum when the density comes within 1e-12 of 1,
    which signals rho at or above the existence bound.
    """
    val = np.asarray(fam.spectral_density_radial(model, r), dtype=float)
    if np.any(val >= 1.0 - SATURATION_GAP):
        raise SaturatedSpectrum(
            f"spectral density reaches {float(np.max(val)):.12g}; "
            "rho is at or above the existence bound")
    out = val / (1.0 - val)
    return float(out) if out.ndim == 0 else out


def convolution_power_bound(model: fam.KernelModel, n: int) -> float:
    """Bound on the n-fold kernel self-convolution: K(0) * sup(K_hat)^(n-1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(fam.kernel_radial(model, 0.0)) * model.spectral_peak ** (n - 1)


def _log_phi(mu: float, w: np.ndarray) -> np.ndarray:
    """log(w^mu * K_mu(w)) for w > 0, stable at large order.

    kve covers moderate orders; where exp-scaled K overflows (w << mu),
    the ascending series' leading branch gives
    w^mu K_mu(w) = 2^(mu-1) Gamma(mu) * S with S -> 1, the discarded
    branch being smaller by a factor exp(2*mu*log(w/2) - 2*lgamma(mu)).
    """
    mu = abs(mu)
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    if mu < 1e-12:
        # K_0 never overflows; w^0 K_0(w) direct
        return -w + np.log(kve(0.0, w))
    small = gammaln(mu) + mu * np.log(2.0 / np.maximum(w, 1e-300)) > 600.0
    big = ~small
    if np.any(big):
        wb = w[big]
        out[big] = mu * np.log(wb) - wb + np.log(kve(mu, wb))
    if np.any(small):
        ws = w[small]
        q = ws * ws / 4.0
        series = np.ones_like(ws)
        term = np.ones_like(ws)
        for k in range(1, 30):
            if abs(k - mu) < 1e-9:
                # integer order: the pole term belongs to the negligible
                # second branch; truncate here
                break
            term = term * q / (k * (k - mu))
            series += term
            if np.all(np.abs(term) < 1e-18):
                break
        out[small] = (mu - 1) * math.log(2.0) + gammaln(mu) + np.log(series)
    return out


def _phi_ratio(mu: float, w: np.ndarray) -> np.ndarray:
    """w^mu K_mu(w) / (2^(mu-1) Gamma(mu)): equals 1 at w=0, decays to 0."""
    out = np.ones_like(w)
    pos = w > 0
    if np.any(pos):
        log0 = (mu - 1) * math.log(2.0) + gammaln(abs(mu))
        out[pos] = np.exp(_log_phi(mu, w[pos]) - log0)
    return out


class LikelihoodKernelDerivatives(NamedTuple):
    """Likelihood kernel and its parameter derivatives at given radii."""

    value: np.ndarray
    d_rho: np.ndarray
    d_alpha: np.ndarray
    d_rho_rho: np.ndarray
    d_rho_alpha: np.ndarray
    d_alpha_alpha: np.ndarray


class SpectralProfile:
    """Evaluator for the likelihood kernel of one model.

    Gauss/cauchy/whittle use the convolution series with terms retained
    until every dropped term at lag 0 falls below rel_tol times the first
    term (monotone decay makes the first dropped term the witness),
    capped at max_terms.  The bessel family has a single closed form.

    Attributes: n_terms (retained count), mode ("closed-series" or
    "closed-form"), rule_met (False when the cap bound before the drop
    tolerance was reached), truncation_budget (sum of self-convolution
    bounds over dropped orders).
    """

    def __init__(self, model: fam.KernelModel, rel_tol: float = 1e-4,
                 max_terms: int = 50) -> None:
        peak = model.spectral_peak
        if peak >= 1.0 - SATURATION_GAP:
            raise SaturatedSpectrum(
                f"spectral peak {peak:.12g} leaves no room for the "
                "geometric series; rho at or above the existence bound")
        self.model = model
        self.rel_tol = rel_tol
        if model.family == "bessel":
            self.mode = "closed-form"
            self.n_terms = 1
            self.rule_met = True
            self.truncation_budget = 0.0
            return
        self.mode = "closed-series"
        at_zero = self._terms_at_zero(np.arange(1, max_terms + 2))
        below = at_zero[1:] < rel_tol * at_zero[0]
        hits = np.nonzero(below)[0]
        if hits.size:
            self.n_terms = int(hits[0]) + 1
            self.rule_met = True
        else:
            self.n_terms = max_terms
            self.rule_met = False
        # geometric tail of the self-convolution bound over dropped orders
        self.truncation_budget = model.rho * peak ** self.n_terms / (1 - peak)

    def _terms_at_zero(self, n: np.ndarray) -> np.ndarray:
        m = self.model
        peak, d = m.spectral_peak, m.dim
        if m.family == "gauss":
            return m.rho * peak ** (n - 1) / n ** (d / 2)
        if m.family == "cauchy":
            return m.rho * peak ** (n - 1) / n ** float(d)
        if m.family == "whittle":
            s = m.sigma
            mu = n * s + (n - 1) * d / 2
            logs = (math.log(m.rho) + (n - 1) * math.log(peak)
                    + gammaln(mu) - gammaln(mu + d / 2)
                    - gammaln(s) + gammaln(s + d / 2))
            return np.exp(logs)
        raise ValueError(m.family)

    def term_values_at_zero(self) -> np.ndarray:
        """Retained series terms evaluated at lag 0 (diagnostics)."""
        if self.mode == "closed-form":
            return np.array([self.value(np.zeros(1))[0]])
        return self._terms_at_zero(np.arange(1, self.n_terms + 1))

    def value(self, r, assume_sorted: bool = False) -> np.ndarray:
        """Likelihood kernel at radial lags r.

        With assume_sorted=True, r must be ascending; per-term radius
        cutoffs then skip entries where a term underflows below
        1e-18 * rho, which is the hot path for distance matrices.
        """
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        rr = np.atleast_1d(r).astype(float)
        m = self.model
        if self.mode == "closed-form":
            out = np.asarray(fam.kernel_radial(m, rr)) / (1.0 - m.spectral_peak)
            return float(out[0]) if scalar else out.reshape(r.shape)
        flat = rr.ravel()
        out = np.zeros_like(flat)
        d, a, rho, peak = m.dim, m.alpha, m.rho, m.spectral_peak
        cut = 1e-18 * rho
        if m.family == "gauss":
            for n in range(1, self.n_terms + 1):
                c = rho * peak ** (n - 1) / n ** (d / 2)
                if c < cut:
                    break
                if assume_sorted:
                    rmax = a * math.sqrt(n * math.log(c / cut))
                    i = np.searchsorted(flat, rmax)
                    if i == 0:
                        continue
                    out[:i] += c * np.exp(-(flat[:i] / a) ** 2 / n)
                else:
                    out += c * np.exp(-(flat / a) ** 2 / n)
        elif m.family == "cauchy":
            for n in range(1, self.n_terms + 1):
                c = rho * peak ** (n - 1) / n ** float(d)
                if c < cut:
                    break
                if assume_sorted:
                    qmax = (c / cut) ** (2.0 / (d + 1)) - 1.0
                    i = np.searchsorted(flat, n * a * math.sqrt(qmax))
                    if i == 0:
                        continue
                    q = (flat[:i] / (n * a)) ** 2
                    out[:i] += c * (1.0 + q) ** (-(d + 1) / 2.0)
                else:
                    q = (flat / (n * a)) ** 2
                    out += c * (1.0 + q) ** (-(d + 1) / 2.0)
        elif m.family == "whittle":
            w = flat / a
            zeros_at = self._terms_at_zero(np.arange(1, self.n_terms + 1))
            for n in range(1, self.n_terms + 1):
                mu = n * m.sigma + (n - 1) * d / 2
                out += zeros_at[n - 1] * _phi_ratio(mu, w)
        else:
            raise ValueError(m.family)
        out = out.reshape(rr.shape)
        return float(out[0]) if scalar else out.reshape(r.shape)

    def derivatives(self, r) -> LikelihoodKernelDerivatives:
        """Kernel value plus first/second derivatives in (rho, alpha).

        Series families differentiate term by term; the rho structure
        t_n proportional to rho^n gives the rho derivatives exactly.
        """
        r = np.asarray(r, dtype=float)
        rr = np.atleast_1d(r).astype(float).ravel()
        m = self.model
        if self.mode == "closed-form":
            out = _bessel_closed_derivatives(m, rr)
        else:
            out = self._series_derivatives(m, rr)
        return LikelihoodKernelDerivatives(
            *(np.asarray(a).reshape(r.shape) for a in out))

    def _series_derivatives(self, m: fam.KernelModel, rr: np.ndarray):
        d, a, rho = m.dim, m.alpha, m.rho
        acc = [np.zeros_like(rr) for _ in range(6)]
        for n in range(1, self.n_terms + 1):
            if m.family == "gauss":
                c = rho * m.spectral_peak ** (n - 1) / n ** (d / 2)
                t = c * np.exp(-(rr / a) ** 2 / n)
                u = d * (n - 1) / a + 2 * rr ** 2 / (n * a ** 3)
                du = -d * (n - 1) / a ** 2 - 6 * rr ** 2 / (n * a ** 4)
                t_a = t * u
                t_aa = t * (u * u + du)
            elif m.family == "cauchy":
                c = rho * m.spectral_peak ** (n - 1) / n ** float(d)
                q = (rr / (n * a)) ** 2
                t = c * (1.0 + q) ** (-(d + 1) / 2.0)
                u = d * (n - 1) / a + (d + 1) * q / (a * (1.0 + q))
                du = -d * (n - 1) / a ** 2 \
                    - (d + 1) * q * (3.0 + q) / (a ** 2 * (1.0 + q) ** 2)
                t_a = t * u
                t_aa = t * (u * u + du)
            elif m.family == "whittle":
                t, t_a, t_aa = _whittle_term_alpha(m, n, rr)
            else:
                raise ValueError(m.family)
            acc[0] += t
            acc[1] += n * t / rho
            acc[2] += t_a
            acc[3] += n * (n - 1) * t / rho ** 2
            acc[4] += n * t_a / rho
            acc[5] += t_aa
        return acc


def _whittle_term_alpha(m: fam.KernelModel, n: int, rr: np.ndarray):
    """One whittle series term with its alpha derivatives.

    t = c(alpha) * phi_mu(w), w = r/alpha, phi_mu(w) = w^mu K_mu(w),
    c proportional to alpha^(d(n-1)).  Uses d/dw[w^m K_m] = -w^m K_{m-1}:
    d/dalpha[phi] = w^{mu+1} K_{mu-1} / alpha and
    d2/dalpha2[phi] = (w^{mu+2} K_{mu-2} - 3 w^{mu+1} K_{mu-1}) / alpha^2.
    """
    d, a, s = m.dim, m.alpha, m.sigma
    mu = n * s + (n - 1) * d / 2
    # coefficient in log space; phi at 0 equals 2^(mu-1) Gamma(mu)
    log_c = (n * math.log(m.rho) + d * (n - 1) * math.log(math.sqrt(math.pi) * a)
             + n * (gammaln(s + d / 2) - gammaln(s))
             + (1 - n * s + (n - 1) * d / 2) * math.log(2.0)
             - gammaln(n * (s + d / 2)))
    log_phi0 = (mu - 1) * math.log(2.0) + gammaln(mu)
    w = rr / a
    pos = w > 0
    phi = np.full_like(rr, math.exp(log_phi0))
    dphi = np.zeros_like(rr)
    d2phi = np.zeros_like(rr)
    if np.any(pos):
        wp = w[pos]
        lw = np.log(wp)
        phi[pos] = np.exp(_log_phi(mu, wp))
        # log(w^nu K_nu) for signed nu: K_{-v} = K_v but the power keeps nu
        lk1 = _log_phi(mu - 1.0, wp) + ((mu - 1.0) - abs(mu - 1.0)) * lw
        lk2 = _log_phi(mu - 2.0, wp) + ((mu - 2.0) - abs(mu - 2.0)) * lw
        p1 = np.exp(2.0 * lw + lk1)   # w^{mu+1} K_{mu-1}
        p2 = np.exp(4.0 * lw + lk2)   # w^{mu+2} K_{mu-2}
        dphi[pos] = p1 / a
        d2phi[pos] = (p2 - 3.0 * p1) / a ** 2
    c = math.exp(log_c)
    pref = d * (n - 1) / a
    t = c * phi
    t_a = t * pref + c * dphi
    t_aa = t * pref * (pref - 1.0 / a) \
        + 2.0 * c * pref * dphi + c * d2phi
    return t, t_a, t_aa


def _bessel_closed_derivatives(m: fam.KernelModel, rr: np.ndarray):
    """Closed-form bessel likelihood kernel with parameter derivatives.

    value = c * G(rho, alpha) * b(z) with z = sqrt(2 d) r / alpha,
    b = J_nu(z)/z^nu, nu = d/2, G = rho/(1 - rho*v), v = 1/max_intensity.
    """
    d, a, rho = m.dim, m.alpha, m.rho
    nu = d / 2.0
    c = 2.0 ** nu * math.gamma(nu + 1.0)
    v = 1.0 / fam.max_intensity("bessel", a, None, d)
    dv = d * v / a
    d2v = d * (d - 1) * v / a ** 2
    one = 1.0 - rho * v
    G = rho / one
    G_r = 1.0 / one ** 2
    G_rr = 2.0 * v / one ** 3
    G_a = rho ** 2 * dv / one ** 2
    G_ra = 2.0 * rho * dv / one ** 3
    G_aa = rho ** 2 * (d2v * one + 2.0 * rho * dv ** 2) / one ** 3

    z = math.sqrt(2.0 * d) * rr / a
    b = np.full_like(rr, 2.0 ** (-nu) / math.gamma(nu + 1.0))
    b1 = np.zeros_like(rr)
    pos = z > 0
    zp = z[pos]
    b[pos] = jv(nu, zp) / zp ** nu
    b1[pos] = jv(nu + 1.0, zp) / zp ** nu
    b_a = z * b1 / a
    b_aa = ((2.0 * nu - 1.0) * z * b1 - z * z * b) / a ** 2

    val = c * G * b
    return (
        val,
        c * G_r * b,
        c * (G_a * b + G * b_a),
        c * G_rr * b,
        c * (G_ra * b + G_r * b_a),
        c * (G_aa * b + 2.0 * G_a * b_a + G * b_aa),
    )


def _averaged_tail(partials: np.ndarray, tol: float, scale: float) -> float:
    """Limit of a partial-sum sequence with (eventually) alternating
    increments, by repeated adjacent averaging."""
    s = partials.astype(float)
    prev = s[-1]
    while s.size > 1:
        s = 0.5 * (s[1:] + s[:-1])
        if abs(s[-1] - prev) < tol * max(scale, abs(s[-1])):
            return float(s[-1])
        prev = s[-1]
    return float(s[-1])


def likelihood_kernel_hankel(model: fam.KernelModel, r: float,
                             tol: float = 1e-8) -> float:
    """Likelihood kernel at radius r via the radial (Hankel) transform.

    Integrates (2 pi / r^(d/2-1)) s^(d/2) ratio(s) J_{d/2-1}(2 pi s r)
    between consecutive Bessel zeros and accelerates the alternating
    tail; independent of the closed-form series, so it doubles as the
    cross-check oracle.  Raises QuadratureFailure if the segment-sum
    extrapolation does not stabilise to tol.
    """
    d = model.dim
    order = d / 2.0 - 1.0
    ratio0 = float(spectral_ratio(model, 0.0))
    if model.family == "bessel":
        upper = fam.bessel_support_radius(model.alpha, model.dim)
    else:
        peak = model.spectral_peak
        target = 1e-14 * peak / (1.0 + ratio0)
        upper = fam.spectral_decay_radius(model, target)

    if r == 0.0:
        # J(0) limit: surface-area weighted moment of the ratio
        pref = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
        val, _ = integrate.quad(
            lambda s: s ** (d - 1) * float(spectral_ratio(model, s)),
            0.0, upper, epsabs=1e-12, epsrel=1e-12, limit=400)
        return pref * val

    def integrand(s: float) -> float:
        return s ** (d / 2.0) * float(spectral_ratio(model, s)) \
            * jv(order, 2.0 * math.pi * s * r)

    # segment ends: Bessel-J zeros mapped to the s axis, then the cutoff
    n_zero_budget = int(2.0 * math.pi * upper * r / math.pi) + 4
    zeros = jn_zeros(int(round(order)), n_zero_budget) / (2.0 * math.pi * r) \
        if order == int(order) else None
    if zeros is None:
        raise QuadratureFailure("non-integer Bessel order not supported")
    ends = [z for z in zeros if z < upper] + [upper]
    pieces = []
    lo = 0.0
    for hi in ends:
        piece, _ = integrate.quad(integrand, lo, hi, epsabs=1e-13,
                                  epsrel=1e-10, limit=200)
        pieces.append(piece)
        lo = hi
    partials = np.cumsum(pieces)
    scale = ratio0
    if len(pieces) <= 4:
        total = float(partials[-1])
    else:
        head = 4
        total = _averaged_tail(partials[head - 1:], 0.1 * tol, scale)
        check = _averaged_tail(partials[head:], 0.1 * tol, scale)
        if abs(total - check) > tol * max(scale, abs(total)):
            raise QuadratureFailure(
                f"Hankel tail did not stabilise: {total} vs {check}")
    return 2.0 * math.pi / r ** (d / 2.0 - 1.0) * total

def spectral_mode_tail_bound(model: fam.KernelModel, shell: int,
                             l_max: float) -> float:
    """Upper bound on spectral mass over cube shells beyond a given index.

    Modes are the integer lattice scaled by inverse window sides (longest
    side l_max).  Shell s holds fewer than 2d(2s+1)^(d-1) modes, each of
    density at most the radial density at s/l_max (families are radially
    decreasing), so the tail is dominated by an integral majorant.
    """
    d = model.dim
    upper = max(l_max * fam.spectral_decay_radius(
        model, 1e-30 * model.spectral_peak), shell + 1.0)

    def g(u):
        return ((2.0 * u + 3.0) ** (d - 1)
                * fam.spectral_density_radial(model, u / l_max))

    # piecewise dyadic quadrature: a single quad over the whole (possibly
    # enormous) decay range can miss the bulk near the lower end for
    # polynomial tails
    total = 0.0
    a = float(shell)
    width = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        while a < upper:
            b = min(a + width, upper)
            val, _ = integrate.quad(g, a, b, epsrel=1e-8, limit=100)
            total += val
            if total > 0.0 and val < 1e-10 * total and b - a >= width:
                break
            a = b
            width *= 2.0
    return 2.0 * d * total
