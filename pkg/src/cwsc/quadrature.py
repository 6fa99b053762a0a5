"""Adaptive composite Gauss-Legendre quadrature.

Small, dependency-free (numpy only) integrator used by the mixing measures.
Integrands are vectorized callables ``f(x) -> array`` evaluated on whole
panels at once.
"""
from functools import lru_cache

import numpy as np

from .errors import NumericalFailure

_ORDER = 20
_MAX_DEPTH = 40
_ROUNDOFF = 64 * np.finfo(float).eps


@lru_cache(maxsize=8)
def gauss_legendre(order):
    """Nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _panel(f, a, b, order=_ORDER):
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return half * np.dot(w, f(mid + half * x))


def _panels(f, a, b, order=_ORDER):
    """Vectorized panel sums for arrays of endpoints ``a``, ``b``."""
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = f(pts.ravel()).reshape(pts.shape)
    return half * (vals @ w)


def integrate(f, breakpoints, abs_tol=1e-14, rel_tol=1e-13, order=_ORDER,
              min_width=0.0, rel_floor=_ROUNDOFF):
    """Integrate ``f`` over ``[breakpoints[0], breakpoints[-1]]``.

    Every panel between consecutive breakpoints is refined by bisection until
    a panel estimate and the sum of its two halves agree within
    ``max(abs_tol, rel_tol * |total|)`` scaled by the panel's share of the
    interval, or within a few ulps of the panel's own value. Refinement is
    breadth-first and fully vectorized.

    Parameters
    ----------
    f : callable
        Vectorized integrand.
    breakpoints : array_like
        Increasing panel endpoints; place them where ``f`` has structure.
    min_width : float
        Panels narrower than this are accepted as they are.
    rel_floor : float
        Relative noise level of ``f`` itself; a panel whose two estimates
        agree to this level is accepted.
    """
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    if bp.size < 2:
        return 0.0
    a, b = bp[:-1], bp[1:]
    coarse = _panels(f, a, b, order)
    total_len = bp[-1] - bp[0]
    done = 0.0
    for _ in range(_MAX_DEPTH):
        m = 0.5 * (a + b)
        left = _panels(f, a, m, order)
        right = _panels(f, m, b, order)
        fine = left + right
        estimate = done + fine.sum()
        tol = max(abs_tol, rel_tol * abs(estimate))
        err = np.abs(fine - coarse)
        # roundoff floor: panels dominated by a sharp peak cannot do better
        floor = rel_floor * (np.abs(left) + np.abs(right))
        ok = (err <= np.maximum(tol * (b - a) / total_len, floor)) | (b - a <= min_width)
        done += fine[ok].sum()
        if ok.all():
            return float(done)
        keep = ~ok
        a = np.concatenate([a[keep], m[keep]])
        b = np.concatenate([m[keep], b[keep]])
        coarse = np.concatenate([left[keep], right[keep]])
    raise NumericalFailure("adaptive quadrature did not converge")


def cumulative(f, nodes, order=16):
    """Running integral of ``f`` from ``nodes[0]`` to each node.

    Each gap between nodes is integrated by a single fixed-order panel, so
    nodes must already resolve the integrand.
    """
    nodes = np.asarray(nodes, dtype=float)
    pieces = _panels(f, nodes[:-1], nodes[1:], order)
    return np.concatenate([[0.0], np.cumsum(pieces)])
