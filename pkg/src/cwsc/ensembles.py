"""Random symmetric matrix ensembles with exchangeable (de Finetti) entries.

Every builder follows the same pipeline: draw the mixing variable ``t``,
draw the ``N(N+1)/2`` upper-triangle spins conditionally i.i.d. given ``t``,
scale by ``1/sqrt(N)`` and symmetrize. Sampling only the upper triangle is
exact: a sub-family of a de Finetti vector is de Finetti with the same
mixing space, so the restriction from ``N**2`` spins loses nothing.
"""
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, SupercriticalRequired
from .harness.rng import make_rng
from .mixing import (MixingMeasure, SpinKernel, mixing_measure,
                     solve_spontaneous_magnetization)

VARIANTS = ("curie_weiss", "rademacher", "perturbed_supercritical", "custom")
MAX_DIMENSION = 4096


@dataclass(frozen=True)
class EnsembleSpec:
    """Recipe for one matrix draw."""

    variant: str = "curie_weiss"
    beta: float = 0.0
    N: int = 64
    seed: int = 0
    rescale: Optional[float] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown ensemble variant {self.variant!r}")
        if self.beta < 0 or not math.isfinite(self.beta):
            raise ConfigError("beta must be finite and >= 0")
        if self.variant == "rademacher" and self.beta != 0.0:
            raise ConfigError("the rademacher variant forces beta = 0")
        if self.variant == "perturbed_supercritical" and not self.beta > 1.0:
            raise SupercriticalRequired("perturbed ensemble requires beta > 1")
        if not 1 <= int(self.N) <= MAX_DIMENSION:
            raise ConfigError(f"N must lie in [1, {MAX_DIMENSION}], got {self.N}")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(eq=False)
class SymmetricMatrix:
    """A realized draw. ``entries`` is dense; the upper triangle is authoritative."""

    entries: np.ndarray
    t: float = 0.0
    spec: Optional[EnsembleSpec] = None
    spin_sum: float = 0.0

    @property
    def N(self):
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def rescale_factor(beta):
    """``(1 - c(beta)^2)^(-1/2)``, the supercritical rescaling constant."""
    c = solve_spontaneous_magnetization(beta)
    return 1.0 / math.sqrt(1.0 - c * c)


def _symmetric_from_upper(values, N):
    H = np.zeros((N, N))
    iu = np.triu_indices(N)
    H[iu] = values
    H.T[iu] = values
    return H


def _draw_t(beta, N, rng):
    return mixing_measure(float(beta), N * N).sample(rng)


def build(spec, rng=None):
    """Draw ``H_N`` for ``spec``; ``rng`` defaults to one seeded from ``spec.seed``."""
    if rng is None:
        rng = make_rng(spec.seed)
    if spec.variant == "perturbed_supercritical":
        return build_perturbed(spec, rng)
    if spec.variant == "custom":
        raise ConfigError("custom ensembles are built with custom_ensemble()")
    N = int(spec.N)
    t = _draw_t(spec.beta, N, rng)
    spins = SpinKernel.plain(spec.beta).sample(t, N * (N + 1) // 2, rng)
    H = _symmetric_from_upper(spins / math.sqrt(N), N)
    if spec.rescale is not None:
        H *= spec.rescale
    return SymmetricMatrix(H, t=t, spec=spec, spin_sum=float(spins.sum()))


def build_perturbed(spec, rng=None, path="shift"):
    """Draw ``Z_N / sqrt(N)`` for ``beta > 1``.

    ``path="shift"`` builds ``X_N`` and applies the sign-of-t rank-one shift
    followed by the ``1/sqrt(1-c^2)`` rescale; ``path="kernel"`` samples the
    perturbed kernel directly. Given the same stream both paths return the
    same matrix bit for bit.
    """
    if not spec.beta > 1.0:
        raise SupercriticalRequired("perturbed ensemble requires beta > 1")
    if rng is None:
        rng = make_rng(spec.seed)
    N = int(spec.N)
    t = _draw_t(spec.beta, N, rng)
    count = N * (N + 1) // 2
    if path == "shift":
        c = solve_spontaneous_magnetization(spec.beta)
        x = SpinKernel.plain(spec.beta).sample(t, count, rng)
        shift = -c if t > 0 else c
        values = (x + shift) / math.sqrt(1.0 - c * c)
        spin_sum = float(x.sum())
    elif path == "kernel":
        values = SpinKernel.perturbed(spec.beta).sample(t, count, rng)
        spin_sum = float("nan")
    else:
        raise ConfigError(f"unknown construction path {path!r}")
    H = _symmetric_from_upper(values / math.sqrt(N), N)
    return SymmetricMatrix(H, t=t, spec=spec, spin_sum=spin_sum)


def build_supercritical_pair(beta, N, rng):
    """One draw realized twice: rescaled ``(1-c^2)^(-1/2) H_N`` and ``Z_N/sqrt(N)``.

    The two differ by ``-+ c E_N / sqrt(N (1 - c^2))``, a rank-one matrix.
    """
    c = solve_spontaneous_magnetization(beta)
    N = int(N)
    t = _draw_t(beta, N, rng)
    x = SpinKernel.plain(beta).sample(t, N * (N + 1) // 2, rng)
    s = math.sqrt(1.0 - c * c)
    rescaled = _symmetric_from_upper(x / s / math.sqrt(N), N)
    shift = -c if t > 0 else c
    perturbed = _symmetric_from_upper((x + shift) / s / math.sqrt(N), N)
    spec = EnsembleSpec("curie_weiss", beta, N, rescale=1.0 / s)
    return (SymmetricMatrix(rescaled, t=t, spec=spec, spin_sum=float(x.sum())),
            SymmetricMatrix(perturbed, t=t, spec=spec.with_(variant="perturbed_supercritical",
                                                              rescale=None)))


# -- custom mixing spaces -----------------------------------------------------
@dataclass
class MixingSpace:
    """A user-supplied mixing space ``(T, mu_N, P_t)``.

    Parameters
    ----------
    sample_t : callable ``(N, rng) -> t``
        Draws the mixing variable for an ``N x N`` matrix.
    sample_spin_given_t : callable ``(t, count, rng) -> ndarray``
        Conditionally i.i.d. entries.
    m1, m2 : callable ``t -> float``
        First and second moments of ``P_t``.
    mixture : callable ``N -> measure``, optional
        Returns an object with ``expect(func)``; needed by the condition
        checker.
    support : callable ``t -> (values, probs)``, optional
        Finite support of ``P_t``; needed for the central-moment conditions.
    """

    sample_t: Optional[Callable] = None
    sample_spin_given_t: Optional[Callable] = None
    m1: Optional[Callable] = None
    m2: Optional[Callable] = None
    mixture: Optional[Callable] = None
    support: Optional[Callable] = None
    name: str = "custom"

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"mixing space {self.name!r} lacks callbacks: {', '.join(missing)}")


def curie_weiss_space(beta):
    """The plain Curie-Weiss(beta) mixing space with ``mu_N = mu^beta_{N^2}``."""
    kernel = SpinKernel.plain(beta)
    return MixingSpace(
        sample_t=lambda N, rng: _draw_t(beta, N, rng),
        sample_spin_given_t=kernel.sample,
        m1=kernel.m1, m2=kernel.m2,
        mixture=lambda N: mixing_measure(float(beta), int(N) ** 2),
        support=kernel.support,
        name=f"curie_weiss({beta})",
    )


def perturbed_space(beta):
    """The recentered kernel of the supercritical construction."""
    kernel = SpinKernel.perturbed(beta)
    return MixingSpace(
        sample_t=lambda N, rng: _draw_t(beta, N, rng),
        sample_spin_given_t=kernel.sample,
        m1=kernel.m1, m2=kernel.m2,
        mixture=lambda N: mixing_measure(float(beta), int(N) ** 2),
        support=kernel.support,
        name=f"perturbed({beta})",
    )


def custom_ensemble(mixing, N, rng):
    """Build an ``N x N`` matrix from an arbitrary mixing space."""
    mixing.require("sample_t", "sample_spin_given_t", "m1", "m2")
    N = int(N)
    if N < 1:
        raise ConfigError("N must be positive")
    t = mixing.sample_t(N, rng)
    values = np.asarray(mixing.sample_spin_given_t(t, N * (N + 1) // 2, rng), dtype=float)
    H = _symmetric_from_upper(values / math.sqrt(N), N)
    return SymmetricMatrix(H, t=float(t), spec=EnsembleSpec("custom", 0.0, N),
                           spin_sum=float(values.sum()))


# -- condition checker --------------------------------------------------------
CONDITIONS = ("first_moment", "second_moment", "central_first", "central_second")


@dataclass
class CWTypeReport:
    """Scaled condition statistics per ``(p, N)`` and a growth verdict.

    ``values[(p, condition)]`` is the list over ``N_grid``. The first two
    conditions are reported as ``N^(p/2) * integral``; the last two as the
    supremum over the t-grid.
    """

    N_grid: list
    p_list: list
    values: dict = field(default_factory=dict)
    growth_factor: float = 4.0

    def bounded(self, p, condition):
        v = np.asarray(self.values[(p, condition)])
        return bool(np.all(np.isfinite(v)) and v.max() <= self.growth_factor * max(v[0], 1e-300))

    def all_bounded(self):
        return all(self.bounded(p, c) for p in self.p_list for c in CONDITIONS)

    def rows(self):
        for (p, cond), vals in sorted(self.values.items()):
            for N, v in zip(self.N_grid, vals):
                yield p, N, cond, v


def check_cw_type_conditions(mixing, N_grid, p_list, t_grid=None, growth_factor=4.0):
    """Evaluate the four Curie-Weiss type moment conditions by quadrature.

    A condition is flagged unbounded when its statistic grows by more than
    ``growth_factor`` over the N-grid.
    """
    mixing.require("m1", "m2", "mixture", "support")
    if t_grid is None:
        t_grid = np.linspace(-0.999, 0.999, 1999)
    report = CWTypeReport(list(N_grid), list(p_list), growth_factor=growth_factor)
    m1 = np.vectorize(mixing.m1, otypes=[float])
    m2 = np.vectorize(mixing.m2, otypes=[float])
    for p in p_list:
        first, second = [], []
        for N in N_grid:
            mu = mixing.mixture(N)
            first.append(N ** (p / 2) * mu.expect(lambda t: np.abs(m1(t)) ** p))
            second.append(N ** (p / 2) * mu.expect(lambda t: np.abs(1.0 - m2(t)) ** p))
        c1 = max(_central(mixing, t, p, 1) for t in t_grid)
        c2 = max(_central(mixing, t, p, 2) for t in t_grid)
        report.values[(p, "first_moment")] = first
        report.values[(p, "second_moment")] = second
        report.values[(p, "central_first")] = [c1] * len(N_grid)
        report.values[(p, "central_second")] = [c2] * len(N_grid)
    return report


def _central(mixing, t, p, power):
    values, probs = mixing.support(t)
    values = np.asarray(values, dtype=float) ** power
    probs = np.asarray(probs, dtype=float)
    centre = np.dot(probs, values)
    return float(np.dot(probs, np.abs(values - centre) ** p))


# -- flat binary serialization --------------------------------------------------
MAGIC = b"CWSC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIB d q d")
_VARIANT_CODE = {v: i for i, v in enumerate(VARIANTS)}


def save_matrix(matrix, path):
    """Write header (magic, version, N, variant, beta, seed, t) + upper triangle."""
    spec = matrix.spec or EnsembleSpec(N=matrix.N)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, matrix.N, _VARIANT_CODE[spec.variant],
                          float(spec.beta), int(spec.seed), float(matrix.t))
    payload = matrix.entries[np.triu_indices(matrix.N)].astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_matrix(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    magic, version, N, code, beta, seed, t = _HEADER.unpack_from(blob)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise ConfigError(f"{path}: not a matrix file of version {FORMAT_VERSION}")
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    if values.size != N * (N + 1) // 2:
        raise ConfigError(f"{path}: truncated payload")
    variant = VARIANTS[code]
    spec = EnsembleSpec(variant, beta if variant != "rademacher" else 0.0, N, seed)
    return SymmetricMatrix(_symmetric_from_upper(values, N), t=t, spec=spec)
