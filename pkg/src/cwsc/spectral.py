"""Eigenvalues, resolvents, Stieltjes transforms and the semicircle law.

Two eigenvalue routes are available. ``householder_ql`` is a self-contained
Householder tridiagonalization followed by implicit-shift QL; ``lapack``
calls numpy's ``eigvalsh`` and is the default for Monte Carlo work because it
is two orders of magnitude faster. The test suite checks the two against each
other and against characteristic-polynomial roots.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, NumericalFailure, ScaleExceeded

RESOLVENT_MAX_N = 512
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues of one matrix draw."""

    eigenvalues: np.ndarray
    source: Optional[object] = None

    def __post_init__(self):
        ev = np.sort(np.asarray(self.eigenvalues, dtype=float))
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def N(self):
        return self.eigenvalues.size

    def __len__(self):
        return self.eigenvalues.size


@dataclass(frozen=True)
class SpectralPoint:
    """``z = E + i eta`` in the upper half-plane."""

    E: float
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")

    @property
    def z(self):
        return complex(self.E, self.eta)

    @property
    def kappa(self):
        return abs(abs(self.E) - 2.0)


def as_complex(z):
    """Accept a SpectralPoint, a complex scalar or an array of complex."""
    if isinstance(z, SpectralPoint):
        return z.z
    return z


def _values(spec):
    if isinstance(spec, Spectrum):
        return spec.eigenvalues
    return np.asarray(spec, dtype=float)


def _dense(matrix):
    return np.asarray(getattr(matrix, "entries", matrix), dtype=float)


# -- eigensolver ----------------------------------------------------------------
def tridiagonalize(A):
    """Householder reduction of a symmetric matrix to tridiagonal form.

    Returns the diagonal ``d`` and sub-diagonal ``e`` (length ``n - 1``).
    Each step applies ``P A P`` with ``P = I - 2 v v^T`` as a rank-two update
    ``A - 2 (v q^T + q v^T)``, ``q = A v - (v^T A v) v``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    d = np.empty(n)
    e = np.zeros(max(n - 1, 0))
    for k in range(n - 2):
        d[k] = A[0, 0]
        x = A[1:, 0].copy()
        norm = float(np.linalg.norm(x))
        B = A[1:, 1:]
        if norm == 0.0:
            e[k] = 0.0
            A = B
            continue
        alpha = -math.copysign(norm, x[0])
        x[0] -= alpha
        v = x / np.linalg.norm(x)
        p = B @ v
        q = p - (v @ p) * v
        B -= 2.0 * (np.outer(v, q) + np.outer(q, v))
        e[k] = alpha
        A = B
    if n >= 2:
        d[n - 2] = A[0, 0]
        d[n - 1] = A[1, 1]
        e[n - 2] = A[1, 0]
    elif n == 1:
        d[0] = A[0, 0]
    return d, e


def tridiagonal_ql(d, e, max_sweeps=None):
    """Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL.

    An off-diagonal element is deflated when
    ``|e_m| <= eps * (|d_m| + |d_{m+1}|)``. Wilkinson-type shifts from the
    leading 2x2 block; the sweep is chased with Givens rotations.
    """
    d = [float(x) for x in d]
    n = len(d)
    e = [float(x) for x in e] + [0.0]
    limit = max_sweeps if max_sweeps is not None else 50 * max(n, 1)
    sweeps = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > limit:
                raise NumericalFailure(f"QL iteration did not converge in {limit} sweeps")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            restart = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    # underflow: split here and restart the sweep
                    d[i + 1] -= p
                    e[m] = 0.0
                    restart = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if restart:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.sort(np.array(d))


def eigenvalues(matrix, method="lapack"):
    """Sorted eigenvalues of a real symmetric matrix as a :class:`Spectrum`.

    Parameters
    ----------
    matrix : SymmetricMatrix or ndarray
    method : {"lapack", "householder_ql"}
    """
    A = _dense(matrix)
    if not np.all(np.isfinite(A)):
        raise NumericalFailure("matrix has non-finite entries")
    if method == "lapack":
        ev = np.linalg.eigvalsh(A)
    elif method == "householder_ql":
        ev = tridiagonal_ql(*tridiagonalize(A))
    else:
        raise ValueError(f"unknown eigenvalue method {method!r}")
    return Spectrum(ev, getattr(matrix, "spec", None))


def eigenpair_residuals(matrix, spectrum, iterations=3, seed=0):
    """``||H v - lambda v||_2`` for each eigenvalue, ``v`` from inverse iteration."""
    A = _dense(matrix)
    n = A.shape[0]
    scale = max(np.linalg.norm(A), 1.0)
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    for k, lam in enumerate(_values(spectrum)):
        shifted = A - (lam + 1e3 * _EPS * scale) * np.eye(n)
        v = rng.standard_normal(n)
        for _ in range(iterations):
            v = np.linalg.solve(shifted, v)
            v /= np.linalg.norm(v)
        out[k] = np.linalg.norm(A @ v - lam * v)
    return out


# -- Stieltjes transforms ---------------------------------------------------------
def empirical_stieltjes(spectrum, z):
    """``(1/N) sum_i 1 / (lambda_i - z)``; vectorized over ``z``."""
    z = np.asarray(as_complex(z), dtype=complex)
    lam = _values(spectrum)
    flat = z.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    step = max(1, 2 ** 22 // max(lam.size, 1))
    for start in range(0, flat.size, step):
        chunk = flat[start:start + step]
        out[start:start + step] = np.mean(1.0 / (lam[None, :] - chunk[:, None]), axis=1)
    return out.reshape(z.shape)[()]


def semicircle_stieltjes(z):
    """``m(z) = (-z + sqrt(z^2 - 4)) / 2`` on the branch with ``Im m > 0``.

    Evaluated as ``-2 / (z + sqrt(z - 2) sqrt(z + 2))``: the product of
    principal roots behaves like ``z`` at infinity and is continuous on the
    upper half-plane, and the reciprocal form avoids cancellation for large
    ``|z|``.
    """
    z = np.asarray(as_complex(z), dtype=complex)
    w = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    return (-2.0 / (z + w))[()]


def semicircle_density(E):
    E = np.asarray(E, dtype=float)
    return (np.sqrt(np.clip(4.0 - E * E, 0.0, None)) / (2.0 * np.pi))[()]


def semicircle_cdf(E):
    """Closed-form distribution function, clamped to [0, 1]."""
    E = np.asarray(E, dtype=float)
    x = np.clip(E, -2.0, 2.0)
    F = 0.5 + x * np.sqrt(4.0 - x * x) / (4.0 * np.pi) + np.arcsin(np.clip(x / 2.0, -1.0, 1.0)) / np.pi
    return np.clip(F, 0.0, 1.0)[()]


def semicircle_interval(a, b):
    """Semicircle mass of the interval with endpoints ``a <= b`` (may be infinite)."""
    return np.maximum(semicircle_cdf(b) - semicircle_cdf(a), 0.0)[()]


def semicircle_quantile(q, tol=1e-15):
    """Inverse CDF by vectorized bisection (the CDF is strictly increasing)."""
    q = np.asarray(q, dtype=float)
    lo = np.full(q.shape, -2.0)
    hi = np.full(q.shape, 2.0)
    while np.max(hi - lo, initial=0.0) > tol:
        mid = 0.5 * (lo + hi)
        below = semicircle_cdf(mid) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return (0.5 * (lo + hi))[()]


def cauchy_smoothed(spectrum, eta, E):
    """``(1/pi) Im s(E + i eta)``, the Cauchy kernel density estimate of the ESD."""
    if not eta > 0:
        raise DomainError("eta must be positive")
    E = np.asarray(E, dtype=float)
    return (np.imag(empirical_stieltjes(spectrum, E + 1j * eta)) / np.pi)[()]


def semicircle_smoothed(eta, E):
    """``(1/pi) Im m(E + i eta)``, the Cauchy smoothing of the semicircle itself."""
    E = np.asarray(E, dtype=float)
    return (np.imag(semicircle_stieltjes(E + 1j * eta)) / np.pi)[()]


# -- resolvents -------------------------------------------------------------------------
def _check_scale(n):
    if n > RESOLVENT_MAX_N:
        raise ScaleExceeded(f"dense resolvent capped at N = {RESOLVENT_MAX_N}, got {n}")


def resolvent(matrix, z, check=False):
    """``G(z) = (H - z)^{-1}`` by LU with partial pivoting.

    With ``check=True`` the residual ``max |(H - z) G - I|`` is verified
    against ``1e-10``.
    """
    A = _dense(matrix)
    n = A.shape[0]
    _check_scale(n)
    z = complex(as_complex(z))
    if not z.imag > 0:
        raise DomainError("resolvent requires Im z > 0")
    M = A - z * np.eye(n)
    G = np.linalg.solve(M, np.eye(n, dtype=complex))
    if check:
        res = np.max(np.abs(M @ G - np.eye(n)))
        if not res < 1e-10:
            raise NumericalFailure(f"resolvent residual {res:.3e}")
    return G


def minor_resolvent(matrix, exclude, z):
    """Resolvent of ``H`` with the rows and columns in ``exclude`` removed.

    Returns
    -------
    G_T : ndarray
        ``(N - |T|) x (N - |T|)`` resolvent of the minor.
    keep : ndarray of int
        Original indices of the rows of ``G_T``.
    """
    A = _dense(matrix)
    n = A.shape[0]
    exclude = np.atleast_1d(np.asarray(exclude, dtype=int))
    keep = np.setdiff1d(np.arange(n), exclude)
    return resolvent(A[np.ix_(keep, keep)], z), keep


def resolvent_trace(spectrum, z):
    """``tr (H - z)^{-1}`` from eigenvalues."""
    lam = _values(spectrum)
    return lam.size * empirical_stieltjes(lam, z)
