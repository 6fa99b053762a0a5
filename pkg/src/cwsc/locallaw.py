"""Spectral domains, error terms and the local law statistics.

The Monte Carlo routines never assert anything themselves; they return
reports (tail frequencies, medians, fitted slopes) that the tests and the
harness judge.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import spectral
from .ensembles import EnsembleSpec, SymmetricMatrix, build
from .errors import ConfigError, DomainError, NumericalFailure, ScaleExceeded
from .harness.rng import derive_seed, make_rng

DOMAIN_VARIANTS = ("full", "bulk", "encompassing")
MAX_NET_POINTS = 100_000


# -- domains ---------------------------------------------------------------------
@dataclass(frozen=True)
class Domain:
    """Spectral domain in the upper half-plane.

    ``full``: ``E in [-1/tau, 1/tau]``, ``eta in [N^(tau-1), 1/tau]``;
    ``bulk``: ``E in [-2+tau, 2-tau]``, same ``eta``;
    ``encompassing``: ``E in [-1/tau, 1/tau]``, ``eta in [1/N, 1/tau]``.
    With ``lattice_exponent = L`` the domain is intersected with
    ``N^-L (Z + iZ)``.
    """

    tau: float
    N: int
    variant: str = "full"
    lattice_exponent: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ConfigError("tau must lie in (0, 1)")
        if self.variant not in DOMAIN_VARIANTS:
            raise ConfigError(f"unknown domain variant {self.variant!r}")
        if self.variant == "bulk" and self.tau >= 2:
            raise ConfigError("bulk domain needs tau < 2")
        if self.N < 1:
            raise ConfigError("N must be positive")

    @property
    def E_range(self):
        if self.variant == "bulk":
            return -2.0 + self.tau, 2.0 - self.tau
        return -1.0 / self.tau, 1.0 / self.tau

    @property
    def eta_range(self):
        lo = 1.0 / self.N if self.variant == "encompassing" else float(self.N) ** (self.tau - 1.0)
        return lo, 1.0 / self.tau

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        (a, b), (lo, hi) = self.E_range, self.eta_range
        tol = 1e-12
        return (z.real >= a - tol) & (z.real <= b + tol) & (z.imag >= lo * (1 - tol)) & (z.imag <= hi + tol)

    def grid(self, n_E=24, n_eta=16):
        """Tensor grid, linear in ``E`` and geometric in ``eta`` (flattened)."""
        (a, b), (lo, hi) = self.E_range, self.eta_range
        E = np.linspace(a, b, n_E)
        eta = np.geomspace(lo, hi, n_eta) if n_eta > 1 else np.array([lo])
        return (E[None, :] + 1j * eta[:, None]).ravel()

    def lattice_net(self, max_points=MAX_NET_POINTS):
        """Points of ``N^-L (Z + iZ)`` inside the domain.

        When the full lattice has more than ``max_points`` points, a
        linear-in-E, geometric-in-eta grid of at most ``max_points`` points is
        snapped inward to the lattice instead; it then still consists of
        lattice points of the domain but is no longer a ``2/N^L`` net.
        """
        if self.lattice_exponent is None:
            raise ConfigError("domain has no lattice exponent")
        h = float(self.N) ** (-self.lattice_exponent)
        (a, b), (lo, hi) = self.E_range, self.eta_range
        E0, E1 = math.ceil(a / h - 1e-9), math.floor(b / h + 1e-9)
        eta0, eta1 = math.ceil(lo / h - 1e-9), math.floor(hi / h + 1e-9)
        if (E1 - E0 + 1) * (eta1 - eta0 + 1) <= max_points:
            jE, jeta = np.arange(E0, E1 + 1), np.arange(eta0, eta1 + 1)
            return (jE[None, :] * h + 1j * jeta[:, None] * h).ravel()
        n_eta = max(2, int(math.sqrt(max_points / 1.6)))
        n_E = max(2, int(max_points // n_eta))
        E = np.unique(np.clip(np.round(np.linspace(a, b, n_E) / h), E0, E1)) * h
        eta = np.unique(np.clip(np.round(np.geomspace(lo, hi, n_eta) / h), eta0, eta1)) * h
        return (E[None, :] + 1j * eta[:, None]).ravel()


def bulk_line(N, tau=0.5, n_E=24, eta=None):
    """Bulk E-grid at the single height ``eta`` (default ``N^(tau-1)``)."""
    a, b = -2.0 + tau, 2.0 - tau
    h = float(N) ** (tau - 1.0) if eta is None else eta
    return np.linspace(a, b, n_E) + 1j * h


# -- error terms -----------------------------------------------------------------
def _split(z):
    z = np.asarray(spectral.as_complex(z), dtype=complex)
    if np.any(z.imag <= 0):
        raise DomainError("error terms need Im z > 0")
    return z.real, z.imag


def error_term(variant, z, N):
    """``psi1 = a / sqrt(kappa + eta + a)`` or ``psi2 = a`` with ``a = (N eta)^(-1/2)``.

    Every psi1 evaluation also checks ``psi1 <= (N eta)^(-1/4)`` and
    ``psi1 <= (N eta kappa)^(-1/2)``.
    """
    E, eta = _split(z)
    a = 1.0 / np.sqrt(N * eta)
    if variant == "psi2":
        return a[()]
    if variant != "psi1":
        raise ConfigError(f"unknown error term {variant!r}")
    kappa = np.abs(np.abs(E) - 2.0)
    psi = a / np.sqrt(kappa + eta + a)
    viol = error_term_violations(psi, a, kappa)
    if viol:
        raise NumericalFailure(f"{viol} error-term inequality violations")
    return psi[()]


def error_term_violations(psi, a, kappa, rtol=1e-12):
    """Count failures of ``psi <= sqrt(a)`` and ``psi <= a / sqrt(kappa)``."""
    psi, a, kappa = np.broadcast_arrays(psi, a, kappa)
    first = psi > np.sqrt(a) * (1 + rtol)
    with np.errstate(divide="ignore"):
        bound = np.where(kappa > 0, a / np.sqrt(np.where(kappa > 0, kappa, 1.0)), np.inf)
    second = psi > bound * (1 + rtol)
    return int(first.sum() + second.sum())


# -- pointwise statistics ----------------------------------------------------------
@dataclass(frozen=True)
class LambdaStat:
    Lambda: float
    Lambda_star: float
    s_minus_m: float


def lambda_stat(matrix, z, spectrum=None):
    """``Lambda = max |G_ij - m delta_ij|``, ``Lambda_* = max_{i != j} |G_ij|``, ``|s - m|``.

    Raises :class:`ScaleExceeded` above the resolvent cap, carrying
    ``|s - m|`` as ``partial``.
    """
    z = complex(spectral.as_complex(z))
    if spectrum is None:
        spectrum = spectral.eigenvalues(matrix)
    m = spectral.semicircle_stieltjes(z)
    sm = float(abs(spectral.empirical_stieltjes(spectrum, z) - m))
    try:
        G = spectral.resolvent(matrix, z)
    except ScaleExceeded as exc:
        raise ScaleExceeded(str(exc), partial=sm) from None
    diag = np.abs(np.diag(G) - m)
    off = np.abs(G - np.diag(np.diag(G)))
    lam_star = float(off.max()) if G.shape[0] > 1 else 0.0
    return LambdaStat(max(float(diag.max()), lam_star), lam_star, sm)


def s_minus_m(spectrum, z):
    """``|s(z) - m(z)|`` vectorized over ``z``."""
    return np.abs(spectral.empirical_stieltjes(spectrum, z) - spectral.semicircle_stieltjes(z))


def _stat_values(item, z, statistic):
    if isinstance(item, spectral.Spectrum):
        if statistic != "s":
            raise ConfigError("the Lambda statistics need matrices, not spectra")
        return s_minus_m(item, z)
    spec = spectral.eigenvalues(item)
    if statistic == "s":
        return s_minus_m(spec, z)
    out = np.empty(z.shape)
    for k, zk in enumerate(z):
        st = lambda_stat(item, zk, spec)
        out[k] = st.Lambda if statistic == "lambda" else max(st.Lambda, st.s_minus_m)
    return out


# -- domination experiments -----------------------------------------------------------
STATISTICS = ("s", "lambda", "max")


def ensemble_source(spec, master_seed=0, experiment="domination", spectra_only=True):
    """Replica provider ``(N, replica) -> (item, seed)`` over ``spec`` with varying N.

    Returns spectra when ``spectra_only`` so experiments can share a cache.
    """
    def provide(N, replica):
        seed = derive_seed(master_seed, experiment, N, replica)
        H = build(spec.with_(N=int(N), seed=seed), make_rng(seed))
        return (spectral.eigenvalues(H) if spectra_only else H), seed
    return provide


@dataclass
class DominationReport:
    """Raw statistics per N plus the derived tail frequencies.

    ``values[N]`` has shape ``(replicas, n_z)``; ``psi[N]`` has shape ``(n_z,)``.
    """

    epsilon: float
    N_grid: list
    replicas: int
    z: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    psi: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    def tail_frequency(self, epsilon=None):
        """``{N: frequency of stat > N^eps psi per z}``."""
        eps = self.epsilon if epsilon is None else epsilon
        out = {}
        for N in self.N_grid:
            v = self.values[N]
            if v.shape[0] == 0:
                out[N] = np.zeros(v.shape[1])
            else:
                out[N] = np.mean(v > float(N) ** eps * self.psi[N][None, :], axis=0)
        return out

    def max_frequency(self, epsilon=None):
        tf = self.tail_frequency(epsilon)
        return [float(tf[N].max(initial=0.0)) for N in self.N_grid]

    def median_scaled(self):
        """Median over replicas and grid points of ``stat / psi``."""
        return [float(np.median(self.values[N] / self.psi[N][None, :])) if self.values[N].size
                else float("nan") for N in self.N_grid]


def domination_experiment(spec, epsilon, N_grid, replicas, z_grid, statistic="s",
                          error="psi2", master_seed=0, experiment="domination", source=None):
    """Tail frequencies of ``{stat(z) > N^eps Psi(z)}`` across replicas.

    Parameters
    ----------
    spec : EnsembleSpec
        Template; ``N`` and ``seed`` are overwritten per cell.
    z_grid : callable or Domain factory
        ``z_grid(N)`` gives the complex evaluation points.
    source : callable, optional
        ``(N, replica) -> (Spectrum or SymmetricMatrix, seed)``; defaults to
        :func:`ensemble_source`, which lets callers share cached draws.
    """
    if statistic not in STATISTICS:
        raise ConfigError(f"statistic must be one of {STATISTICS}")
    if source is None:
        source = ensemble_source(spec, master_seed, experiment, spectra_only=statistic == "s")
    report = DominationReport(epsilon, list(N_grid), int(replicas))
    for N in N_grid:
        z = np.atleast_1d(np.asarray(z_grid(N), dtype=complex))
        rows, seeds = [], []
        for r in range(int(replicas)):
            item, seed = source(N, r)
            rows.append(_stat_values(item, z, statistic))
            seeds.append(seed)
        report.z[N] = z
        report.values[N] = np.array(rows).reshape(len(rows), z.size)
        report.psi[N] = np.atleast_1d(error_term(error, z, N))
        report.seeds[N] = seeds
    return report


def simultaneous_sup_stat(item, domain, statistic="s", error="psi2", max_points=MAX_NET_POINTS):
    """``sup over the lattice net of stat(z) / Psi(z)``."""
    z = domain.lattice_net(max_points)
    if isinstance(item, SymmetricMatrix) or (isinstance(item, np.ndarray) and item.ndim == 2):
        item = item if statistic != "s" else spectral.eigenvalues(item)
    vals = _stat_values(item, z, statistic)
    return float(np.max(vals / error_term(error, z, domain.N)))


# -- interval statistics ------------------------------------------------------------
@dataclass(frozen=True)
class IntervalStat:
    """``sup_I |sigma_N(I) - sigma(I)|`` and an interval attaining it.

    ``arg_interval = (a, b, a_closed, b_closed)``.
    """

    sup_deviation: float
    arg_interval: tuple


def _discrepancy_candidates(lam, window=None):
    """Points and values of ``D = F_N - F`` at all candidate extrema.

    Returns ``(x, value, side)`` where side ``+1`` is the right value
    ``D(x)`` and ``-1`` the left limit ``D(x-)``; ``x = +-inf`` stands for the
    limits at infinity.
    """
    N = lam.size
    if window is not None:
        L, R = window
        inside = lam[(lam >= L) & (lam <= R)]
        pts = np.concatenate([[L], inside, [R]])
    else:
        pts = lam
    F = spectral.semicircle_cdf(pts)
    right = np.searchsorted(lam, pts, side="right") / N - F
    left = np.searchsorted(lam, pts, side="left") / N - F
    x = np.concatenate([pts, pts])
    val = np.concatenate([right, left])
    side = np.concatenate([np.ones(pts.size), -np.ones(pts.size)])
    if window is None:
        x = np.concatenate([x, [-np.inf, np.inf]])
        val = np.concatenate([val, [0.0, 0.0]])
        side = np.concatenate([side, [1.0, -1.0]])
    return x, val, side


def interval_sup(spectrum, variant="global", tau=0.5):
    """Exact supremum over intervals of ``|sigma_N(I) - sigma(I)|``.

    ``variant="bulk"`` restricts to intervals inside ``[-2+tau, 2-tau]``.
    The supremum equals ``max D - min D`` with ``D = F_N - F_sigma``; between
    eigenvalues ``D`` is non-increasing, so the extrema sit at eigenvalues
    (both one-sided values), at the window ends, or at infinity.
    """
    lam = spectral._values(spectrum)
    if variant == "global":
        window = None
    elif variant == "bulk":
        window = (-2.0 + tau, 2.0 - tau)
    else:
        raise ConfigError(f"unknown interval variant {variant!r}")
    x, val, side = _discrepancy_candidates(np.sort(lam), window)
    i_max, i_min = int(np.argmax(val)), int(np.argmin(val))
    sup = float(val[i_max] - val[i_min])
    # sigma_N(I) - sigma(I) = D(upper) - D(lower): the interval runs between the two
    pts = sorted([(x[i_max], side[i_max]), (x[i_min], side[i_min])])
    (a, sa), (b, sb) = pts
    arg = (float(a), float(b), bool(sa < 0 and np.isfinite(a)), bool(sb > 0 and np.isfinite(b)))
    return IntervalStat(max(sup, 0.0), arg)


def interval_lattice(N, tau):
    """Endpoint lattice ``h Z`` inside the bulk, ``h = N^(-1/2+tau) / 10``."""
    h = float(N) ** (-0.5 + tau) / 10.0
    k = math.floor((2.0 - tau) / h + 1e-9)
    return np.arange(-k, k + 1) * h, h


def relative_interval_stat(spectrum, tau, min_steps=10):
    """``sup |sigma_N(I) / sigma(I) - 1|`` over lattice intervals ``(a, b]``.

    Endpoints range over :func:`interval_lattice`; lengths are at least
    ``min_steps`` lattice steps, i.e. ``N^(-1/2+tau)`` by default. The
    lattice is a discretization, so the value is a lower bound for the
    supremum over all admissible intervals.
    """
    if not 0 < tau < 0.5:
        raise ConfigError("tau must lie in (0, 1/2)")
    lam = np.sort(spectral._values(spectrum))
    N = lam.size
    x, _ = interval_lattice(N, tau)
    Fn = np.searchsorted(lam, x, side="right") / N
    F = spectral.semicircle_cdf(x)
    best = 0.0
    for j in range(x.size - min_steps):
        num = Fn[j + min_steps:] - Fn[j]
        den = F[j + min_steps:] - F[j]
        best = max(best, float(np.max(np.abs(num / den - 1.0))))
    return best


def interval_ratio(spectrum, a, b):
    """``sigma_N((a, b]) / sigma((a, b]) - 1``."""
    lam = np.sort(spectral._values(spectrum))
    count = np.searchsorted(lam, b, side="right") - np.searchsorted(lam, a, side="right")
    return float(count / lam.size / spectral.semicircle_interval(a, b) - 1.0)


# -- kernel smoothing -----------------------------------------------------------------
def kernel_grid(eta, tau):
    """E-grid on ``[-1/tau, 1/tau]`` with spacing at most ``eta / 10``.

    The point count is odd so ``E = 0`` is always on the grid.
    """
    half = 1.0 / tau
    n = int(math.ceil(2 * half / (eta / 10.0))) + 1
    n += 1 - n % 2
    return np.linspace(-half, half, n)


def kernel_distance(spectrum, eta, tau):
    """``sup_E |(1/pi) Im s(E + i eta) - f_sigma(E)|`` on :func:`kernel_grid`."""
    E = kernel_grid(eta, tau)
    return float(np.max(np.abs(spectral.cauchy_smoothed(spectrum, eta, E) - spectral.semicircle_density(E))))


def semicircle_kernel_distance(eta, C, n_points=100_000):
    """Same distance with ``s`` replaced by ``m``, over ``E in [-C, C]``."""
    E = np.linspace(-C, C, n_points)
    return float(np.max(np.abs(spectral.semicircle_smoothed(eta, E) - spectral.semicircle_density(E))))


# -- rates ----------------------------------------------------------------------------
@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residuals: np.ndarray
    r_squared: float


def decay_slope(N_values, stat_values):
    """Least-squares slope of ``log stat`` against ``log N``.

    ``stat_values`` holds one median per N (or a replica array per N, whose
    median is taken). At least four N values are required.
    """
    N_values = np.asarray(N_values, dtype=float)
    if N_values.size < 4:
        raise ConfigError("decay_slope needs at least four N values")
    y = np.array([np.median(v) for v in stat_values], dtype=float)
    if np.any(y <= 0):
        raise DomainError("statistics must be positive to take logarithms")
    X, Y = np.log(N_values), np.log(y)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), resid, r2)
