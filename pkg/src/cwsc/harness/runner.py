"""Run experiments: fan out cells, persist rows, write the manifest.

Results are written in canonical cell order after all cells are done, so the
CSV bytes depend only on the config. Completed cells are appended to a
``.progress`` sidecar as they finish; ``resume=True`` reloads them instead of
recomputing.
"""
import csv
import hashlib
import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .. import __version__
from ..errors import IoError
from . import experiments

CSV_COLUMNS = ("experiment", "beta", "N", "replica", "z_real", "z_imag", "statistic", "value", "seed")


def _run_one(args):
    cfg, cell = args
    return cell, experiments.run_cell(cfg, cell)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def _format_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _load_progress(path, config_hash):
    done = {}
    if not path.exists():
        return done
    with open(path) as fh:
        for line in fh:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                break  # a torn last line from an interrupted run
            if rec.get("config_hash") != config_hash:
                return {}
            done[tuple(rec["cell"])] = [tuple(r) for r in rec["rows"]]
    return done


def run(cfg, workers=1, resume=False, outdir=None):
    """Execute ``cfg`` and return the manifest dictionary."""
    start = time.perf_counter()
    out = Path(outdir) if outdir is not None else cfg.resolved_output_dir()
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from None
    name = cfg.experiment
    csv_path = out / f"{name}.csv"
    progress_path = out / f"{name}.progress"
    manifest_path = out / f"{name}.manifest.json"
    config_hash = cfg.config_hash

    all_cells = experiments.cells(cfg)
    done = _load_progress(progress_path, config_hash) if resume else {}
    todo = [c for c in all_cells if c not in done]
    try:
        progress = open(progress_path, "a" if resume else "w")
    except OSError as exc:
        raise IoError(f"cannot write {progress_path}: {exc}") from None
    with progress:
        def record(cell, rows):
            done[cell] = rows
            progress.write(json.dumps({"config_hash": config_hash, "cell": list(cell),
                                       "rows": [list(r) for r in rows]}) + "\n")
            progress.flush()

        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                chunk = max(1, len(todo) // (4 * workers))
                for cell, rows in pool.map(_run_one, [(cfg, c) for c in todo], chunksize=chunk):
                    record(cell, rows)
        else:
            for c in todo:
                record(*_run_one((cfg, c)))

    rows = [row for c in all_cells for row in done[c]]
    try:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([_format_value(v) for v in row])
        extra, summary = experiments.finalize(cfg, rows, out)
    except OSError as exc:
        raise IoError(f"cannot write results to {out}: {exc}") from None

    files = [csv_path, *extra]
    manifest = {
        "experiment": name,
        "config_hash": config_hash,
        "master_seed": cfg.master_seed,
        "parameters": {k: cfg.params[k] for k in sorted(cfg.params)},
        "seeds": [{"beta": c[0], "N": c[1], "replica": c[2], "seed": experiments.cell_seed(cfg, c)}
                  for c in all_cells],
        "files": [{"path": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size} for p in files],
        "summary": summary,
        "workers": workers,
        "resumed_cells": len(all_cells) - len(todo),
        "wall_clock_seconds": round(time.perf_counter() - start, 3),
        "build": {"version": __version__, "git_describe": git_describe()},
    }
    try:
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {manifest_path}: {exc}") from None
    return manifest


def validate_manifest(manifest_path):
    """True when every listed file exists with the recorded checksum."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    for entry in manifest["files"]:
        path = manifest_path.parent / entry["path"]
        if not path.exists() or sha256_file(path) != entry["sha256"]:
            return False
    return True
