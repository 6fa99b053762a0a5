"""Schur-complement decomposition, large deviation bounds and rank perturbations."""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import spectral
from .ensembles import build
from .errors import ConfigError, ScaleExceeded
from .harness.rng import derive_seed, make_rng
from .mixing import SpinKernel, mixing_measure

SCHUR_MAX_N = 256


# -- Schur decomposition ---------------------------------------------------------
@dataclass(frozen=True)
class SchurDecomposition:
    """Pieces of ``1/G_ii = -z - s + Y_i`` for one index ``i``.

    ``residual_raw`` is ``|1/G_ii - (H_ii - z - h^T G^(i) h)|`` and
    ``residual`` is ``|1/G_ii + z + s - Y_i|``.
    """

    i: int
    G_ii: complex
    A_i: complex
    Z1_i: complex
    Z2_i: complex
    Y_i: complex
    s: complex
    residual_raw: float
    residual: float


def schur_decompose(matrix, z, i, G=None):
    """Decompose ``1/G_ii`` using the full resolvent and the minor resolvent.

    ``A_i = (1/N) sum_k G_ki G_ik / G_ii`` (all ``k``, so it includes
    ``G_ii / N``), ``Z1_i`` the off-diagonal part of ``h^T G^(i) h`` and
    ``Z2_i = sum_k (h_k^2 - 1/N) G^(i)_kk`` with ``h`` the ``i``-th column of
    ``H`` without entry ``i``.
    """
    H = spectral._dense(matrix)
    N = H.shape[0]
    if N > SCHUR_MAX_N:
        raise ScaleExceeded(f"Schur decomposition capped at N = {SCHUR_MAX_N}")
    z = complex(spectral.as_complex(z))
    if G is None:
        G = spectral.resolvent(H, z)
    Gi, keep = spectral.minor_resolvent(H, [i], z)
    h = H[keep, i]
    s = np.trace(G) / N
    gii = G[i, i]
    quad = h @ Gi @ h
    dg = np.diag(Gi)
    A = np.sum(G[:, i] * G[i, :]) / (N * gii)
    Z1 = quad - np.sum(h * h * dg)
    Z2 = np.sum((h * h - 1.0 / N) * dg)
    Y = H[i, i] + A - Z1 - Z2
    raw = abs(1.0 / gii - (H[i, i] - z - quad))
    res = abs(1.0 / gii + z + s - Y)
    return SchurDecomposition(int(i), complex(gii), complex(A), complex(Z1), complex(Z2),
                              complex(Y), complex(s), float(raw), float(res))


def downdate_minor(G, i):
    """``G^(i)_kl = G_kl - G_ki G_il / G_ii`` for ``k, l != i``."""
    keep = np.delete(np.arange(G.shape[0]), i)
    sub = G[np.ix_(keep, keep)]
    return sub - np.outer(G[keep, i], G[i, keep]) / G[i, i], keep


# -- Lp bounds for linear and bilinear forms -----------------------------------------
FORM_VARIANTS = ("linear", "bilinear", "offdiag", "full")
COEFFICIENT_SOURCES = ("synthetic", "resolvent")


def default_mu(p):
    """Crude ``||Y - m1||_p`` bound used by default for spin-supported kernels."""
    return 2.0 ** p


def default_A(p):
    """Default constant of the moment inequalities, of Khintchine order ``sqrt(p)``."""
    return math.sqrt(p)


def form_bound(variant, p, m1, N, mu_p=None, A_p=None):
    """Prefactor multiplying ``sqrt(sum |coeff|^2)`` in the Lp bound."""
    mu = default_mu(p) if mu_p is None else mu_p
    A = default_A(p) if A_p is None else A_p
    m = abs(m1)
    root = math.sqrt(N)
    if variant == "linear":
        return A * mu + root * m
    if variant in ("bilinear", "full"):
        return (A * mu) ** 2 + 2 * A * mu * root * m + N * m * m
    if variant == "offdiag":
        return 4 * (A * mu) ** 2 + 2 * A * mu * root * m + N * m * m
    raise ConfigError(f"unknown form variant {variant!r}")


@dataclass
class BilinearCheck:
    """One ``(N, p)`` cell of the Lp experiment."""

    p: int
    N: int
    variant: str
    empirical_pnorm: float
    bound_scale: float
    mu_p: float
    A_p: float
    m1: float
    bound: float

    @property
    def normalized(self):
        """``empirical_pnorm / bound_scale``."""
        return self.empirical_pnorm / self.bound_scale if self.bound_scale > 0 else 0.0


def synthetic_coefficients(N, variant, rng):
    """Complex Gaussian coefficients normalized to unit Frobenius norm."""
    shape = (N,) if variant == "linear" else (N, N)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if variant == "offdiag":
        np.fill_diagonal(a, 0.0)
    return a / np.linalg.norm(a)


def resolvent_coefficients(N, variant, rng, beta=0.0, z=0.5 + 0.5j):
    """Coefficients from the minor resolvent of an independent ``(N+1)``-matrix draw."""
    from .ensembles import EnsembleSpec
    H = build(EnsembleSpec("curie_weiss", beta, N + 1), rng)
    Gm, _ = spectral.minor_resolvent(H, [0], z)
    if variant == "linear":
        return Gm[0, :].copy()
    a = Gm.copy()
    if variant == "offdiag":
        np.fill_diagonal(a, 0.0)
    return a


def evaluate_form(variant, coeff, Y, Z=None):
    """Vectorized forms over replica rows of ``Y`` (and ``Z``)."""
    if variant == "linear":
        return Y @ coeff
    if variant == "bilinear":
        return np.einsum("ri,ij,rj->r", Y, coeff, Z)
    if variant in ("offdiag", "full"):
        a = coeff.copy()
        if variant == "offdiag":
            np.fill_diagonal(a, 0.0)
        return np.einsum("ri,ij,rj->r", Y, a, Y)
    raise ConfigError(f"unknown form variant {variant!r}")


def bilinear_pnorm_experiment(kernel=None, source="synthetic", p=2, N_grid=(32, 64, 128, 256),
                              replicas=1000, variant="bilinear", t=0.0, seed=0,
                              mu_p=None, A_p=None, transform=None):
    """Monte Carlo ``Lp`` norms of linear and bilinear spin forms.

    Parameters
    ----------
    kernel : SpinKernel, optional
        Conditional law of the spins; plain ``beta = 0`` by default.
    source : {"synthetic", "resolvent"}
        Coefficients are drawn once per ``N`` and are independent of the spins.
    t : float or None
        Fixed mixing variable, or ``None`` to draw one per replica from the
        mixing measure of the ``N`` (``2N`` for bilinear forms) spins.
    transform : {None, "one_minus_square"}
        Replace each spin ``Y`` by ``1 - Y^2``.

    Returns
    -------
    list of BilinearCheck
    """
    kernel = SpinKernel.plain(0.0) if kernel is None else kernel
    if variant not in FORM_VARIANTS:
        raise ConfigError(f"unknown form variant {variant!r}")
    if source not in COEFFICIENT_SOURCES:
        raise ConfigError(f"unknown coefficient source {source!r}")
    if p < 2 or p % 2:
        raise ConfigError("p must be an even integer >= 2")
    mu = default_mu(p) if mu_p is None else mu_p
    A = default_A(p) if A_p is None else A_p
    out = []
    for N in N_grid:
        rng = make_rng(derive_seed(seed, "ldp-bilinear", N, 0))
        if source == "synthetic":
            coeff = synthetic_coefficients(N, variant, rng)
        else:
            coeff = resolvent_coefficients(N, variant, rng, beta=kernel.beta)
        width = 2 * N if variant == "bilinear" else N
        if t is None:
            ts = mixing_measure(kernel.beta, width).sample(rng, replicas)
        else:
            ts = np.full(replicas, float(t))
        spins = np.empty((replicas, width))
        for r in range(replicas):
            spins[r] = kernel.sample(ts[r], width, rng)
        if transform == "one_minus_square":
            spins = 1.0 - spins ** 2
            m1 = np.array([1.0 - kernel.m2(x) for x in ts])
        elif transform is None:
            m1 = np.array([kernel.m1(x) for x in ts])
        else:
            raise ConfigError(f"unknown transform {transform!r}")
        Y, Z = spins[:, :N], spins[:, N:] if variant == "bilinear" else None
        vals = evaluate_form(variant, coeff, Y, Z)
        pnorm = float(np.mean(np.abs(vals) ** p) ** (1.0 / p)) if replicas else 0.0
        scale = float(np.linalg.norm(coeff))
        m_eff = float(np.mean(np.abs(m1) ** p) ** (1.0 / p)) if replicas else 0.0
        out.append(BilinearCheck(p, N, variant, pnorm, scale, mu, A, m_eff,
                                 form_bound(variant, p, m_eff, N, mu, A) * scale))
    return out


# -- resolvent quadratic forms ---------------------------------------------------------
@dataclass
class QuadraticReport:
    """Tail frequencies of the resolvent quadratic forms per N."""

    epsilon: float
    N_grid: list
    replicas: int
    z: complex
    z1_ratio: dict = field(default_factory=dict)
    z2_ratio: dict = field(default_factory=dict)
    z2_abs_max: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    def tail_frequency(self, which="z1", epsilon=None):
        eps = self.epsilon if epsilon is None else epsilon
        data = self.z1_ratio if which == "z1" else self.z2_ratio
        return [float(np.mean(data[N] > float(N) ** eps)) if data[N].size else 0.0
                for N in self.N_grid]


def quadratic_domination_experiment(spec, N_grid, replicas, epsilon, z=0.5 + 0.5j,
                                    indices=32, master_seed=0, experiment="ldp"):
    """Ratios ``|Z1_i| / ((1/N^2) sum_kl |G^(i)_kl|^2)^(1/2)`` and the ``Z2`` analogue.

    The minors come from the downdate of one full resolvent per draw; the
    first ``indices`` indices of every draw are used.
    """
    rep = QuadraticReport(epsilon, list(N_grid), int(replicas), complex(z))
    for N in N_grid:
        r1, r2, seeds = [], [], []
        zmax = 0.0
        for r in range(int(replicas)):
            seed = derive_seed(master_seed, experiment, N, r)
            H = build(spec.with_(N=int(N), seed=seed), make_rng(seed)).entries
            G = spectral.resolvent(H, z)
            for i in range(min(indices, N)):
                Gi, keep = downdate_minor(G, i)
                h = H[keep, i]
                dg = np.diag(Gi)
                Z1 = h @ Gi @ h - np.sum(h * h * dg)
                Z2 = np.sum((h * h - 1.0 / N) * dg)
                r1.append(abs(Z1) / math.sqrt(np.sum(np.abs(Gi) ** 2) / N ** 2))
                r2.append(abs(Z2) / math.sqrt(np.sum(np.abs(dg) ** 2) / N ** 2))
                zmax = max(zmax, abs(Z2))
            seeds.append(seed)
        rep.z1_ratio[N] = np.array(r1)
        rep.z2_ratio[N] = np.array(r2)
        rep.z2_abs_max[N] = zmax
        rep.seeds[N] = seeds
    return rep


# -- rank perturbation ---------------------------------------------------------------
def numerical_rank(E, rtol=1e-10):
    E = np.asarray(E, dtype=float)
    sv = np.linalg.svd(E, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


@dataclass(frozen=True)
class PerturbationGap:
    gap: float
    bound: float
    rank: int

    @property
    def holds(self):
        return self.gap <= self.bound


def rank_perturbation_gap(Y, E, z):
    """``|tr (Y - z)^-1 - tr (Y + E - z)^-1|`` against ``2k / eta``."""
    Y = spectral._dense(Y)
    E = np.asarray(E, dtype=float)
    z = complex(spectral.as_complex(z))
    k = numerical_rank(E)
    if k == 0:
        return PerturbationGap(0.0, 0.0, 0)
    a = spectral.resolvent_trace(np.linalg.eigvalsh(Y), z)
    b = spectral.resolvent_trace(np.linalg.eigvalsh(Y + E), z)
    return PerturbationGap(float(abs(a - b)), 2.0 * k / z.imag, k)


def random_low_rank(N, k, rng, scale=1.0):
    """Symmetric ``sum_j s_j v_j v_j^T`` with ``k`` orthonormal ``v_j`` and signed ``s_j``."""
    if k == 0:
        return np.zeros((N, N))
    Q, _ = np.linalg.qr(rng.standard_normal((N, k)))
    s = scale * rng.choice([-1.0, 1.0], size=k) * (0.5 + rng.random(k)) * math.sqrt(N)
    return (Q * s) @ Q.T
