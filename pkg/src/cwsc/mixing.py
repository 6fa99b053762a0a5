"""Curie-Weiss spins, their de Finetti mixing measure and the spin kernels.

The mixing measure of Curie-Weiss(beta, n) spins is the law of a variable
``t`` in (-1, 1) with density proportional to
``exp(-(n/2) F_beta(t)) / (1 - t^2)``, where
``F_beta(t) = artanh(t)^2 / beta + log(1 - t^2)``.

Everything numerical is done in the coordinate ``u = artanh(t)``. There the
measure has density proportional to ``exp(-n phi(u))`` with
``phi(u) = u^2 / (2 beta) - log cosh(u)``, which is smooth, log-concave for
``beta <= 1`` and bimodal at ``u = +-beta c`` for ``beta > 1``.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp

from . import quadrature
from .errors import (ConfigError, DiracMeasure, DomainError,
                     OracleScaleExceeded, SupercriticalRequired)

ORACLE_MAX_N = 24
TABLE_SIZE = 4096
REFINE_GAP = 2.0 ** -20
_TAIL_LOG = 80.0  # exp(-80) ~ 1e-35: mass beyond the integration window


def log_cosh(u):
    a = np.abs(u)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def solve_spontaneous_magnetization(beta):
    """Unique positive root ``c`` of ``tanh(beta c) = c`` for ``beta > 1``."""
    beta = float(beta)
    if not beta > 1.0:
        raise SupercriticalRequired(f"beta must exceed 1, got {beta}")
    lo, hi = 0.0, 1.0
    # g(c) = tanh(beta c) - c is positive just above 0 and negative at 1
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if math.tanh(beta * mid) - mid > 0.0:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        return hi
    return lo


def _require_beta(beta):
    beta = float(beta)
    if not (beta >= 0.0 and math.isfinite(beta)):
        raise ConfigError(f"inverse temperature must be a finite number >= 0, got {beta}")
    return beta


class MixingMeasure:
    """The de Finetti mixing law ``mu^beta_n`` of Curie-Weiss(beta, n) spins.

    Construction computes the normalization constant and an inverse-CDF
    table; the object is immutable afterwards and may be shared between
    workers.

    Parameters
    ----------
    beta : float
        Inverse temperature, ``>= 0``. ``beta == 0`` is the point mass at 0.
    n : int
        Number of exchangeable spins (``N**2`` for an ``N x N`` matrix).
    """

    def __init__(self, beta, n, table_size=TABLE_SIZE):
        self.beta = _require_beta(beta)
        n = int(n)
        if n < 1:
            raise ConfigError(f"n must be positive, got {n}")
        self.n = n
        self.is_dirac = self.beta == 0.0
        if self.is_dirac:
            return
        self.modes = self._find_modes()
        self.phi_min = float(self.phi(self.modes[-1]))
        self.width = self._find_width()
        self.u_max = self._find_cutoff()
        self.breakpoints = self._breakpoints()
        mass = self._integrate(self._weight, self.breakpoints, abs_tol=1e-300, rel_tol=1e-14)
        self._log_mass = math.log(mass)
        # log C, with C the normalization constant of the t-density
        self.log_normalization = -(self._log_mass - self.n * self.phi_min)
        self._build_table(table_size)

    # -- density in u -----------------------------------------------------
    def phi(self, u):
        return u * u / (2.0 * self.beta) - log_cosh(u)

    def excess(self, u):
        """``phi(u) - phi_min`` without cancellation near the modes."""
        if self.beta <= 1.0:
            return self.phi(u)
        c, u0 = self._c, self.modes[-1]
        d = np.abs(u) - u0
        # log(cosh(u0 + d) / cosh(u0)) = log1p(2 sinh(d/2)^2 + tanh(u0) sinh(d))
        sh = np.sinh(0.5 * d)
        return c * d + d * d / (2.0 * self.beta) - np.log1p(2.0 * sh * sh + c * np.sinh(d))

    def _weight(self, u):
        """Unnormalized u-density, scaled so its maximum is 1."""
        return np.exp(-self.n * self.excess(u))

    def density_u(self, u):
        """Normalized density of ``u = artanh(t)``."""
        return self._weight(u) / math.exp(self._log_mass)

    def _integrate(self, f, bp, **tol):
        # n * excess carries ~ sqrt(n) eps of absolute rounding noise
        noise = max(64.0, 4.0 * math.sqrt(self.n)) * np.finfo(float).eps
        return quadrature.integrate(f, bp, min_width=1e-4 * self.width,
                                    rel_floor=noise, **tol)

    @property
    def normalization(self):
        """The constant C of the t-density; may over/underflow for huge n."""
        if self.is_dirac:
            raise DiracMeasure("beta = 0: the mixing measure has no density")
        return math.exp(self.log_normalization)

    def _find_modes(self):
        if self.beta <= 1.0:
            self._c = 0.0
            return np.array([0.0])
        c = self._c = solve_spontaneous_magnetization(self.beta)
        u = self.beta * c
        return np.array([-u, u])

    def _find_width(self):
        """Distance from the outer mode where n(phi - phi_min) reaches 1/2."""
        u0 = self.modes[-1]
        g = lambda d: self.n * self.excess(u0 + d) - 0.5
        hi = 1e-8
        while g(hi) < 0.0:
            hi *= 2.0
        return brentq(g, 0.0, hi, xtol=1e-14 * max(hi, 1e-300), rtol=1e-12)

    def _find_cutoff(self):
        u0 = self.modes[-1]
        g = lambda u: self.n * self.excess(u) - _TAIL_LOG
        hi = u0 + self.width
        while g(hi) < 0.0:
            hi = u0 + 2.0 * (hi - u0)
        return brentq(g, u0, hi, xtol=1e-13, rtol=1e-12)

    def _breakpoints(self):
        w, U = self.width, self.u_max
        pts = [-U, 0.0, U]
        steps = np.array([0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0])
        for mode in self.modes:
            pts.extend(mode + steps * w)
            pts.extend(mode - steps * w)
            pts.append(mode)
        pts = np.clip(np.array(pts), -U, U)
        return np.unique(pts)

    # -- t-space API ------------------------------------------------------
    def density(self, t):
        """Density ``f_n(t) = C exp(-(n/2) F_beta(t)) / (1 - t^2)``."""
        if self.is_dirac:
            raise DiracMeasure("beta = 0: the mixing measure has no density")
        t = np.asarray(t, dtype=float)
        if np.any(np.abs(t) >= 1.0):
            raise DomainError("mixing density is defined on (-1, 1) only")
        u = np.arctanh(t)
        # dt = (1 - t^2) du and 1 / (1 - t^2) = cosh(u)^2
        out = np.exp(-self._log_mass - self.n * self.excess(u) + 2.0 * log_cosh(u))
        return out if out.ndim else float(out)

    def expect(self, func):
        """``integral func(t) dmu(t)`` for a vectorized ``func``."""
        if self.is_dirac:
            return float(np.asarray(func(np.zeros(1)))[0])
        scale = math.exp(-self._log_mass)
        f = lambda u: func(np.tanh(u)) * self._weight(u) * scale
        return self._integrate(f, self.breakpoints, abs_tol=1e-15, rel_tol=1e-13)

    def moment(self, p):
        p = int(p)
        if p < 1:
            raise ConfigError("moment order must be >= 1")
        if self.is_dirac:
            return 0.0
        return self.expect(lambda t: t ** p)

    def mass(self, a, b):
        """``mu([a, b])`` for ``-1 <= a <= b <= 1``."""
        if self.is_dirac:
            return 1.0 if a <= 0.0 <= b else 0.0
        with np.errstate(divide="ignore"):
            ua = max(-self.u_max, float(np.arctanh(np.clip(a, -1.0, 1.0))))
            ub = min(self.u_max, float(np.arctanh(np.clip(b, -1.0, 1.0))))
        if ub <= ua:
            return 0.0
        bp = self.breakpoints
        bp = np.concatenate([[ua], bp[(bp > ua) & (bp < ub)], [ub]])
        scale = math.exp(-self._log_mass)
        return self._integrate(lambda u: self._weight(u) * scale, bp,
                               abs_tol=1e-300, rel_tol=1e-12)

    # -- sampling ---------------------------------------------------------
    def _build_table(self, size):
        U, w = self.u_max, self.width
        base = np.linspace(-U, U, size // 2 + 1)
        dense = []
        per_mode = size // (2 * len(self.modes))
        for mode in self.modes:
            dense.append(np.linspace(max(-U, mode - 8 * w), min(U, mode + 8 * w), per_mode))
        nodes = np.unique(np.concatenate([base, *dense]))
        cdf = quadrature.cumulative(self._weight, nodes)
        self._table_u = nodes
        self._table_cdf = cdf / cdf[-1]
        self._table_scale = cdf[-1]

    def sample(self, rng, size=None):
        """Inverse-CDF draw(s) of ``t``; exactly 0 when beta = 0.

        One uniform is consumed per draw regardless of beta so that random
        streams stay aligned across temperatures.
        """
        v = rng.random(size)
        if self.is_dirac:
            return 0.0 if size is None else np.zeros(size)
        u = self._invert(np.atleast_1d(v))
        t = np.tanh(u)
        return float(t[0]) if size is None else t.reshape(np.shape(v))

    def _invert(self, v):
        nodes, cdf = self._table_u, self._table_cdf
        k = np.clip(np.searchsorted(cdf, v, side="right") - 1, 0, len(nodes) - 2)
        lo, hi = nodes[k], nodes[k + 1]
        c_lo, c_hi = cdf[k], cdf[k + 1]
        gap = c_hi - c_lo
        frac = np.where(gap > 0, (v - c_lo) / np.where(gap > 0, gap, 1.0), 0.5)
        u = lo + frac * (hi - lo)
        refine = gap > REFINE_GAP
        if np.any(refine):
            u[refine] = self._newton(v[refine], lo[refine], hi[refine], c_lo[refine], u[refine])
        return u

    def _newton(self, v, lo, hi, c_lo, u):
        """Safeguarded Newton on the in-panel CDF, vectorized over draws."""
        x, w = quadrature.gauss_legendre(16)
        scale = 1.0 / self._table_scale
        a, b = lo.copy(), hi.copy()
        for _ in range(30):
            half = 0.5 * (u - lo)
            pts = (lo + half)[:, None] + half[:, None] * x[None, :]
            F = c_lo + half * (self._weight(pts) @ w) * scale
            g = self._weight(u) * scale
            r = F - v
            a = np.where(r < 0, u, a)
            b = np.where(r >= 0, u, b)
            step = np.where(g > 0, r / np.where(g > 0, g, 1.0), 0.0)
            new = u - step
            bad = (new <= a) | (new >= b) | (g <= 0)
            new = np.where(bad, 0.5 * (a + b), new)
            if np.all(np.abs(new - u) <= 1e-15 * (1.0 + np.abs(u))):
                return new
            u = new
        return u

    def __repr__(self):
        return f"MixingMeasure(beta={self.beta}, n={self.n})"


@lru_cache(maxsize=256)
def mixing_measure(beta, n):
    """Cached constructor; tables are immutable so sharing is safe."""
    return MixingMeasure(beta, n)


def mixing_density(mm, t):
    return mm.density(t)


def sample_mixing(mm, rng, size=None):
    return mm.sample(rng, size)


def mixing_moment(mm, p):
    return mm.moment(p)


# -- exact Curie-Weiss oracle -------------------------------------------------
def _check_config(n, config):
    if n > ORACLE_MAX_N:
        raise OracleScaleExceeded(f"exact oracle limited to n <= {ORACLE_MAX_N}, got {n}")
    y = np.asarray(config, dtype=float).ravel()
    if y.size != n:
        raise ConfigError(f"configuration has {y.size} entries, expected {n}")
    if not np.all(np.abs(y) == 1.0):
        raise ConfigError("configuration entries must be +1 or -1")
    return y


@lru_cache(maxsize=256)
def _log_partition(beta, n):
    k = np.arange(n + 1)
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return float(logsumexp(log_binom + beta / (2.0 * n) * (2.0 * k - n) ** 2))


def exact_cw_pmf(beta, n, config):
    """Exact Curie-Weiss(beta, n) probability of a +-1 configuration.

    The partition function is summed over magnetization classes, O(n).
    """
    beta = _require_beta(beta)
    n = int(n)
    y = _check_config(n, config)
    s = y.sum()
    return math.exp(beta / (2.0 * n) * s * s - _log_partition(beta, n))


def definetti_pmf_oracle(beta, n, config):
    """Same probability via the mixture ``int prod (1 + t y_i)/2 dmu(t)``."""
    beta = _require_beta(beta)
    n = int(n)
    y = _check_config(n, config)
    k = int((y > 0).sum())
    if beta == 0.0:
        return 2.0 ** -n
    mm = mixing_measure(beta, n)
    return mm.expect(lambda t: ((1.0 + t) / 2.0) ** k * ((1.0 - t) / 2.0) ** (n - k))


def correlation_exact(beta, n, ell):
    """``E[Y_1 ... Y_ell]`` for Curie-Weiss(beta, n) spins.

    Conditionally on t the spins are i.i.d. with mean t, so the correlation
    is the ell-th moment of the mixing measure.
    """
    ell = int(ell)
    if ell < 1:
        raise ConfigError("ell must be >= 1")
    beta = _require_beta(beta)
    if beta == 0.0:
        return 0.0
    return mixing_measure(beta, int(n)).moment(ell)


# -- spin kernels -------------------------------------------------------------
@dataclass(frozen=True)
class SpinKernel:
    """Conditional single-spin law ``P_t`` (plain) or ``P~_t`` (perturbed).

    The perturbed kernel recenters a +-1 spin by ``-c`` when ``t > 0`` and by
    ``+c`` otherwise, then rescales by ``1/sqrt(1 - c^2)``.
    """

    variant: str = "plain"
    beta: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if self.variant not in ("plain", "perturbed"):
            raise ConfigError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "perturbed" and not 0.0 < self.c < 1.0:
            raise ConfigError("perturbed kernel needs 0 < c < 1")

    @classmethod
    def plain(cls, beta=0.0):
        return cls("plain", float(beta), 0.0)

    @classmethod
    def perturbed(cls, beta):
        return cls("perturbed", float(beta), solve_spontaneous_magnetization(beta))

    def support(self, t):
        """``((up, down), (p_up, p_down))``; ``up`` is drawn with prob (1+t)/2."""
        p = ((1.0 + t) / 2.0, (1.0 - t) / 2.0)
        if self.variant == "plain":
            return (1.0, -1.0), p
        s = math.sqrt(1.0 - self.c * self.c)
        shift = -self.c if t > 0 else self.c
        return ((1.0 + shift) / s, (-1.0 + shift) / s), p

    def moment(self, t, ell):
        (a, b), (pa, pb) = self.support(t)
        return pa * a ** ell + pb * b ** ell

    def m1(self, t):
        return self.moment(t, 1)

    def m2(self, t):
        return self.moment(t, 2)

    def sample(self, t, count, rng):
        """``count`` i.i.d. draws at fixed ``t``; one uniform per draw."""
        if not abs(t) < 1.0:
            raise DomainError("t must lie in (-1, 1)")
        (a, b), (pa, _) = self.support(t)
        return np.where(rng.random(count) < pa, a, b)


def sample_spins(kernel, t, count, rng):
    return kernel.sample(t, count, rng)


def perturbed_moments(beta, t):
    """Closed forms of the perturbed kernel's ``m~1(t)`` and ``1 - m~2(t)``."""
    c = solve_spontaneous_magnetization(beta)
    if t > 0:
        return (t - c) / math.sqrt(1.0 - c * c), 2.0 * c / (1.0 - c * c) * (t - c)
    return (t + c) / math.sqrt(1.0 - c * c), -2.0 * c / (1.0 - c * c) * (t + c)
