# %% [markdown]
# # Curie-Weiss spins as a mixture
#
# A Curie-Weiss spin vector is a mixture of i.i.d. spins: draw a
# magnetization t from the mixing measure, then flip independent coins with
# mean t. This notebook looks at the measure across temperatures.

# %%
import numpy as np

from cwsc import mixing
from cwsc.harness.rng import make_rng

# %% [markdown]
# Below the critical point the measure concentrates at 0; above it, at
# the two roots of tanh(beta c) = c.

# %%
for beta in (0.5, 1.0, 1.5, 2.0):
    mu = mixing.mixing_measure(beta, 10_000)
    c = mixing.solve_spontaneous_magnetization(beta) if beta > 1 else 0.0
    print(f"beta={beta}: c={c:.6f}  E|t|={mu.expect(np.abs):.4f}  E t^2={mu.moment(2):.3e}")

# %% [markdown]
# The mixture reproduces the exact Boltzmann weights. Small systems can be
# enumerated, so compare one configuration per magnetization class.

# %%
beta, n = 0.7, 8
worst = 0.0
for k in range(n + 1):
    y = np.array([1.0] * k + [-1.0] * (n - k))
    worst = max(worst, abs(mixing.definetti_pmf_oracle(beta, n, y) - mixing.exact_cw_pmf(beta, n, y)))
print("max pmf gap:", worst)

# %% [markdown]
# Two-point correlations decay like 1/n at high temperature and like
# n^(-1/2) at the critical point; above it they tend to c^2.

# %%
sizes = np.array([10 ** 3, 10 ** 4, 10 ** 5])
for beta in (0.5, 1.0, 1.5):
    corr = np.array([mixing.correlation_exact(beta, n, 2) for n in sizes])
    slope = np.polyfit(np.log(sizes), np.log(corr), 1)[0]
    print(f"beta={beta}: corr={np.round(corr, 6)}  slope={slope:.3f}")
print("c(1.5)^2 =", mixing.solve_spontaneous_magnetization(1.5) ** 2)

# %% [markdown]
# Sampling t uses the inverse CDF of the tabulated measure, so samples are
# reproducible across platforms given the seed.

# %%
rng = make_rng(7)
t = mixing.mixing_measure(1.5, 400).sample(rng, 10_000)
hist, edges = np.histogram(t, bins=10, range=(-1, 1))
for lo, count in zip(edges[:-1], hist):
    print(f"{lo:+.1f} {'#' * (count // 100)}")
