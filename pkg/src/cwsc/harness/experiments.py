"""Experiment registry.

Every experiment is a set of independent cells ``(beta, N, replica)``. A
cell turns into CSV rows through :func:`run_cell`, which only depends on the
config and the cell, so the output never depends on scheduling. After all
cells finish, :func:`finalize` writes auxiliary files and a JSON summary.
"""
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from .. import ldp, locallaw, mixing, spectral
from ..ensembles import (EnsembleSpec, build, check_cw_type_conditions, curie_weiss_space,
                         perturbed_space, rescale_factor, build_supercritical_pair)
from ..errors import ConfigError
from .rng import derive_seed, make_rng
from .svg import emit_svg

NAN = float("nan")


def cells(cfg):
    """Ordered list of ``(beta, N, replica)`` cells."""
    if cfg.experiment in ("decay_correlations", "cwtype_check"):
        return [(b, N, 0) for b in cfg["beta"] for N in cfg["N_grid"]]
    return [(b, N, r) for b in cfg["beta"] for N in cfg["N_grid"] for r in range(cfg["replicas"])]


def cell_seed(cfg, cell):
    _, N, r = cell
    return derive_seed(cfg.master_seed, cfg.experiment, N, r)


def _matrix(cfg, beta, N, seed):
    kind = cfg["ensemble"]
    if kind == "plain":
        spec = EnsembleSpec("curie_weiss", beta, N, seed)
    elif kind == "rescaled":
        spec = EnsembleSpec("curie_weiss", beta, N, seed, rescale=rescale_factor(beta))
    else:
        spec = EnsembleSpec("perturbed_supercritical", beta, N, seed)
    return build(spec, make_rng(seed))


def _spectrum(cfg, beta, N, seed):
    return spectral.eigenvalues(_matrix(cfg, beta, N, seed))


def z_grid(cfg, N):
    kind = cfg["grid"]
    if kind == "bulk_line":
        return locallaw.bulk_line(N, cfg["tau"], cfg["n_E"])
    if kind == "point":
        return np.array([complex(cfg["z_real"], cfg["z_imag"])])
    return locallaw.Domain(cfg["tau"], N, kind).grid(cfg["n_E"], cfg["n_eta"])


def run_cell(cfg, cell):
    beta, N, r = cell
    seed = cell_seed(cfg, cell)
    exp = cfg.experiment
    rows = []

    def add(statistic, value, z=None):
        zr, zi = (NAN, NAN) if z is None else (float(np.real(z)), float(np.imag(z)))
        rows.append((exp, float(beta), int(N), int(r), zr, zi, statistic, float(value), seed))

    if exp == "figure1":
        spec = _spectrum(cfg, beta, N, seed)
        for eta in cfg["eta"]:
            add("kernel_distance", locallaw.kernel_distance(spec, eta, cfg["tau"]), complex(NAN, eta))
    elif exp == "decay_correlations":
        for ell in cfg["ell"]:
            add(f"corr_ell={ell}", mixing.correlation_exact(beta, N, ell))
    elif exp == "domination":
        z = z_grid(cfg, N)
        if cfg["statistic"] == "s":
            vals = locallaw.s_minus_m(_spectrum(cfg, beta, N, seed), z)
        else:
            vals = locallaw._stat_values(_matrix(cfg, beta, N, seed), z, cfg["statistic"])
        name = {"s": "s_minus_m", "lambda": "Lambda", "max": "max_Lambda_s"}[cfg["statistic"]]
        for zk, v in zip(z, vals):
            add(name, v, zk)
    elif exp == "simultaneous":
        dom = locallaw.Domain(cfg["tau"], N, cfg["domain"], cfg["lattice_exponent"])
        spec = _spectrum(cfg, beta, N, seed)
        add("sup_ratio", locallaw.simultaneous_sup_stat(spec, dom, "s", cfg["error"], cfg["max_points"]))
    elif exp == "intervals":
        spec = _spectrum(cfg, beta, N, seed)
        add("interval_sup_global", locallaw.interval_sup(spec, "global").sup_deviation)
        add("interval_sup_bulk", locallaw.interval_sup(spec, "bulk", cfg["tau"]).sup_deviation)
        add("relative_interval", locallaw.relative_interval_stat(spec, cfg["tau_relative"]))
    elif exp == "kernel":
        spec = _spectrum(cfg, beta, N, seed)
        eta = float(N) ** (cfg["tau"] - 1.0)
        add("kernel_distance", locallaw.kernel_distance(spec, eta, cfg["tau"]), complex(NAN, eta))
    elif exp == "ldp":
        z = complex(cfg["z_real"], cfg["z_imag"])
        H = _matrix(cfg, beta, N, seed).entries
        G = spectral.resolvent(H, z)
        res, r1, r2, z2 = 0.0, 0.0, 0.0, 0.0
        for i in range(min(cfg["indices"], N)):
            d = ldp.schur_decompose(H, z, i, G=G)
            Gi, keep = ldp.downdate_minor(G, i)
            res = max(res, d.residual, d.residual_raw)
            r1 = max(r1, abs(d.Z1_i) / math.sqrt(np.sum(np.abs(Gi) ** 2) / N ** 2))
            r2 = max(r2, abs(d.Z2_i) / math.sqrt(np.sum(np.abs(np.diag(Gi)) ** 2) / N ** 2))
            z2 = max(z2, abs(d.Z2_i))
        add("schur_residual_max", res, z)
        add("z1_ratio_max", r1, z)
        add("z2_ratio_max", r2, z)
        add("z2_abs_max", z2, z)
    elif exp == "perturbation":
        rng = make_rng(seed)
        if beta > 1.0:
            rescaled, perturbed = build_supercritical_pair(beta, N, rng)
            a = spectral.eigenvalues(rescaled)
            b = spectral.eigenvalues(perturbed)
            for eta in cfg["eta"]:
                z = complex(cfg["z_real"], eta)
                gap = abs(spectral.resolvent_trace(a, z) - spectral.resolvent_trace(b, z))
                add("gap_ratio_supercritical", gap / (2.0 / eta), z)
        else:
            rescaled = build(EnsembleSpec("curie_weiss", beta, N, seed), rng)
        for k in cfg["rank"]:
            E = ldp.random_low_rank(N, k, rng)
            for eta in cfg["eta"]:
                g = ldp.rank_perturbation_gap(rescaled, E, complex(cfg["z_real"], eta))
                add(f"gap_ratio_rank{k}", g.gap / g.bound if g.bound else 0.0, complex(cfg["z_real"], eta))
    elif exp == "cwtype_check":
        space = curie_weiss_space(beta) if cfg["kernel"] == "plain" else perturbed_space(beta)
        report = check_cw_type_conditions(space, [N], cfg["p"])
        for p, _, cond, v in report.rows():
            add(f"{cond}_p={p}", v)
    else:
        raise ConfigError(f"unknown experiment {exp!r}")
    return rows


# -- summaries and auxiliary files -------------------------------------------------
def _group(rows, statistic=None):
    out = defaultdict(list)
    for row in rows:
        if statistic is None or row[6] == statistic:
            out[(row[1], row[2])].append(row)
    return out


def _slope(Ns, values):
    if len(Ns) < 2 or any(v <= 0 for v in values):
        return None
    return float(np.polyfit(np.log(Ns), np.log(values), 1)[0])


def _median_series(rows, statistic, betas, Ns):
    groups = _group(rows, statistic)
    out = {}
    for b in betas:
        meds = [float(np.median([row[7] for row in groups[(b, N)]])) for N in Ns if groups[(b, N)]]
        out[b] = meds
    return out


def finalize(cfg, rows, outdir):
    """Write auxiliary files; return ``(extra_paths, summary)``."""
    exp = cfg.experiment
    betas, Ns = cfg["beta"], cfg["N_grid"]
    summary, extra = {}, []
    if exp == "figure1":
        groups = defaultdict(dict)
        for row in rows:
            groups[(row[1], row[2], row[3])][row[5]] = row[7]
        etas = sorted(cfg["eta"])
        if len(etas) >= 2 and groups:
            small, large = etas[0], etas[-1]
            wins = sum(1 for d in groups.values() if d[small] > d[large])
            summary["replicas_small_eta_worse"] = wins
            summary["replicas"] = len(groups)
        if Ns and cfg["replicas"] > 0:
            extra.extend(write_figure1_curves(cfg, outdir))
    elif exp == "decay_correlations":
        for ell in cfg["ell"]:
            series = _median_series(rows, f"corr_ell={ell}", betas, Ns)
            if ell % 2:
                # odd correlations vanish by symmetry; report the rounding level
                summary[f"max_abs_ell={ell}"] = {repr(b): max(map(abs, v)) for b, v in series.items()}
            else:
                summary[f"slope_ell={ell}"] = {repr(b): _slope(Ns, v) for b, v in series.items()}
    elif exp == "domination":
        by = _group(rows)
        freq, med = {}, {}
        for b in betas:
            freq[repr(b)], med[repr(b)] = [], []
            for N in Ns:
                cell_rows = by[(b, N)]
                if not cell_rows:
                    freq[repr(b)].append(0.0)
                    med[repr(b)].append(None)
                    continue
                z = np.array([complex(row[4], row[5]) for row in cell_rows])
                v = np.array([row[7] for row in cell_rows])
                psi = locallaw.error_term(cfg["error"], z, N)
                ratio = v / psi
                exceed = v > float(N) ** cfg["epsilon"] * psi
                per_z = defaultdict(list)
                for zk, e in zip(z, exceed):
                    per_z[zk].append(e)
                freq[repr(b)].append(max(float(np.mean(e)) for e in per_z.values()))
                med[repr(b)].append(float(np.median(ratio)))
        summary["max_tail_frequency"] = freq
        summary["median_scaled"] = med
    elif exp in ("intervals", "kernel", "simultaneous"):
        stats = {"intervals": ("interval_sup_global", "interval_sup_bulk", "relative_interval"),
                 "kernel": ("kernel_distance",), "simultaneous": ("sup_ratio",)}[exp]
        for st in stats:
            series = _median_series(rows, st, betas, Ns)
            summary[st] = {repr(b): {"medians": v, "slope": _slope(Ns[:len(v)], v)}
                           for b, v in series.items()}
    elif exp == "ldp":
        summary["schur_residual_max"] = max((row[7] for row in rows if row[6] == "schur_residual_max"),
                                            default=0.0)
        groups = _group(rows, "z1_ratio_max")
        summary["z1_tail_frequency"] = {
            repr(b): [float(np.mean([row[7] > float(N) ** cfg["epsilon"] for row in groups[(b, N)]]))
                      if groups[(b, N)] else 0.0 for N in Ns] for b in betas}
    elif exp == "perturbation":
        ratios = [row[7] for row in rows if row[6].startswith("gap_ratio")]
        summary["trials"] = len(ratios)
        summary["violations"] = int(sum(r > 1.0 for r in ratios))
    elif exp == "cwtype_check":
        by = _group(rows)
        flags = {}
        for b in betas:
            stats = defaultdict(list)
            for N in Ns:
                for row in by[(b, N)]:
                    stats[row[6]].append(row[7])
            flags[repr(b)] = {k: bool(max(v) <= 4.0 * max(v[0], 1e-300)) for k, v in stats.items()}
        summary["bounded"] = flags
    return extra, summary


def figure1_curves(cfg):
    """Smoothed densities of replica 0 on the plotting grid, one per ``eta``."""
    beta, N = cfg["beta"][0], cfg["N_grid"][0]
    seed = cell_seed(cfg, (beta, N, 0))
    spec = _spectrum(cfg, beta, N, seed)
    E = np.linspace(-cfg["E_max"], cfg["E_max"], cfg["n_points"])
    return spec, E, [(eta, spectral.cauchy_smoothed(spec, eta, E)) for eta in cfg["eta"]]


def write_figure1_curves(cfg, outdir):
    import csv
    spec, E, curves = figure1_curves(cfg)
    paths = []
    f = spectral.semicircle_density(E)
    for eta, y in curves:
        path = Path(outdir) / f"figure1_eta{eta!r}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["E", "smoothed", "semicircle"])
            for row in zip(E, y, f):
                w.writerow([repr(float(v)) for v in row])
        paths.append(path)
    svg = Path(outdir) / "figure1.svg"
    emit_svg([(f"eta = {eta:g}", E, y) for eta, y in curves], svg, reference_density=True,
             markers=spec.eigenvalues, title=f"Cauchy-smoothed ESD, N = {spec.N}")
    paths.append(svg)
    return paths
