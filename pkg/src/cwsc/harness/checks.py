"""Deterministic invariant suites, shared by ``cwsc check`` and the test-suite.

Each suite returns a :class:`CheckResult` with the measured quantity, the
threshold it is judged against and the pass flag.
"""
import math
from dataclasses import dataclass

import numpy as np

from .. import ldp, locallaw, mixing, spectral
from ..ensembles import EnsembleSpec, build
from .rng import make_rng


@dataclass
class CheckResult:
    name: str
    measured: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail or f'{self.measured:.3e} vs {self.threshold:.3e}'}"


def definetti_oracle(betas=(0.3, 0.7, 1.0), sizes=(4, 8, 12), tol=1e-8):
    """Max gap between the mixture pmf and the exact pmf over all magnetization classes."""
    worst = 0.0
    for beta in betas:
        for n in sizes:
            for k in range(n + 1):
                y = np.array([1.0] * k + [-1.0] * (n - k))
                gap = abs(mixing.definetti_pmf_oracle(beta, n, y) - mixing.exact_cw_pmf(beta, n, y))
                worst = max(worst, gap)
    return CheckResult("definetti_oracle", worst, tol, worst < tol)


def correlation_rates(sizes=(10 ** 3, 10 ** 4, 10 ** 5)):
    """Fitted decay exponents of the two-point correlation and the supercritical limit."""
    logs = np.log(sizes)
    slopes = {}
    for beta in (0.5, 1.0):
        vals = [mixing.correlation_exact(beta, n, 2) for n in sizes]
        slopes[beta] = float(np.polyfit(logs, np.log(vals), 1)[0])
    c = mixing.solve_spontaneous_magnetization(1.5)
    rel = abs(mixing.correlation_exact(1.5, sizes[-1], 2) / c ** 2 - 1.0)
    odd = max(abs(mixing.correlation_exact(b, n, ell))
              for b in (0.5, 1.0, 1.5) for n in sizes for ell in (1, 3, 5))
    passed = (abs(slopes[0.5] + 1.0) <= 0.1 and abs(slopes[1.0] + 0.5) <= 0.1
              and rel <= 0.05 and odd <= 1e-12)
    detail = (f"slope(0.5)={slopes[0.5]:.4f} slope(1)={slopes[1.0]:.4f} "
              f"rel_c2={rel:.2e} odd_max={odd:.1e}")
    return CheckResult("correlation_rates", max(abs(slopes[0.5] + 1), abs(slopes[1.0] + 0.5)), 0.1,
                       passed, detail)


def error_term_inequalities(Ns=(10 ** 2, 10 ** 4), tau=0.1, n_side=100):
    """Count violations of ``psi1 <= (N eta)^(-1/4)`` and ``psi1 <= (N eta kappa)^(-1/2)``."""
    violations = 0
    for N in Ns:
        z = locallaw.Domain(tau, N, "full").grid(n_side, n_side)
        a = 1.0 / np.sqrt(N * z.imag)
        kappa = np.abs(np.abs(z.real) - 2.0)
        psi = a / np.sqrt(kappa + z.imag + a)
        violations += locallaw.error_term_violations(psi, a, kappa, rtol=0.0)
    return CheckResult("error_term_inequalities", violations, 0, violations == 0,
                       f"{violations} violations on {len(Ns)} x {n_side ** 2} points")


def smoothing_bound(Cs=(2.0, 3.0), etas=(1e-1, 1e-2, 1e-3, 1e-4), n_points=100_000):
    """``sup |(1/pi) Im m - f| <= sqrt(C eta)`` on ``[-C, C]``."""
    violations, worst = 0, 0.0
    for C in Cs:
        for eta in etas:
            d = locallaw.semicircle_kernel_distance(eta, C, n_points)
            worst = max(worst, d / math.sqrt(C * eta))
            violations += d > math.sqrt(C * eta)
    return CheckResult("smoothing_bound", worst, 1.0, violations == 0,
                       f"{violations} violations, worst ratio {worst:.3f}")


def stieltjes_equation(count=10_000, seed=0, tol=1e-12):
    """``m^2 + z m + 1 = 0`` on random ``z`` in the upper half-plane."""
    rng = make_rng(seed)
    z = rng.uniform(-5, 5, count) + 1j * np.exp(rng.uniform(math.log(1e-4), math.log(10), count))
    m = spectral.semicircle_stieltjes(z)
    res = float(np.max(np.abs(m * m + z * m + 1.0)))
    ok = res < tol and bool(np.all(m.imag > 0))
    return CheckResult("stieltjes_equation", res, tol, ok)


def schur_identity(triples=50, N=64, seed=0, tol=1e-10):
    """Both Schur identity residuals for random ``(beta, z)`` and every index."""
    rng = make_rng(seed)
    worst = 0.0
    for k in range(triples):
        beta = (0.0, 1.0)[k % 2]
        H = build(EnsembleSpec("curie_weiss", beta, N, seed=k), rng)
        z = complex(rng.uniform(-2.5, 2.5), math.exp(rng.uniform(math.log(0.05), math.log(2.0))))
        G = spectral.resolvent(H, z)
        for i in range(N):
            d = ldp.schur_decompose(H, z, i, G=G)
            worst = max(worst, d.residual, d.residual_raw)
    return CheckResult("schur_identity", worst, tol, worst < tol)


def rank_perturbation(trials=1000, seed=0):
    """Randomized ``gap <= 2k / eta`` over ``eta in [0.1, 10]``, ``k <= 3``, ``N in [16, 256]``."""
    rng = make_rng(seed)
    sizes = (16, 32, 64, 128, 256)
    violations, worst = 0, 0.0
    for _ in range(trials):
        N = int(rng.choice(sizes))
        k = int(rng.integers(1, 4))
        eta = float(math.exp(rng.uniform(math.log(0.1), math.log(10.0))))
        beta = float(rng.choice([0.0, 1.0]))
        Y = build(EnsembleSpec("curie_weiss", beta, N), rng)
        E = ldp.random_low_rank(N, k, rng, scale=float(rng.uniform(0.1, 3.0)))
        g = ldp.rank_perturbation_gap(Y, E, complex(rng.uniform(-3, 3), eta))
        worst = max(worst, g.gap / g.bound)
        violations += not g.holds
    return CheckResult("rank_perturbation", worst, 1.0, violations == 0,
                       f"{violations} violations in {trials} trials, worst gap/bound {worst:.3f}")


SUITES = {
    "oracle": [definetti_oracle],
    "correlations": [correlation_rates],
    "inequalities": [error_term_inequalities, smoothing_bound, stieltjes_equation],
    "schur": [schur_identity],
    "perturbation": [rank_perturbation],
}


def run_suite(name):
    if name == "all":
        return [f() for key in SUITES for f in SUITES[key]]
    return [f() for f in SUITES[name]]
