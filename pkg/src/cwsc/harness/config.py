"""Flat ``key = value`` experiment configuration files.

One experiment per file. Lines starting with ``#`` are comments; lists are
comma separated. Every parameter is typed and range checked at parse time.
"""
import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError, IoError

EXPERIMENTS = ("figure1", "decay_correlations", "domination", "simultaneous", "intervals",
               "kernel", "ldp", "perturbation", "cwtype_check")
DEFAULT_OUTPUT = "cwsc_output"
MAX_N = 4096
# experiments whose N is a spin count rather than a matrix dimension
SPIN_COUNT_EXPERIMENTS = ("decay_correlations", "cwtype_check")


def _float(lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise ConfigError(f"not a number: {text!r}") from None
        if not math.isfinite(v) or v < lo or v > hi or (lo_open and v == lo) or (hi_open and v == hi):
            raise ConfigError(f"{v} outside the allowed range")
        return v
    return parse


def _int(lo=0, hi=2 ** 63 - 1):
    def parse(text):
        try:
            v = int(text, 0)
        except ValueError:
            raise ConfigError(f"not an integer: {text!r}") from None
        if not lo <= v <= hi:
            raise ConfigError(f"{v} outside [{lo}, {hi}]")
        return v
    return parse


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ConfigError(f"{text!r} is not one of {', '.join(options)}")
        return text
    return parse


def _list(item):
    def parse(text):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ConfigError("empty list")
        return [item(p) for p in parts]
    return parse


# name -> (parser, default)
PARAMETERS = {
    "beta": (_list(_float(0.0, 50.0)), [0.0]),
    "N_grid": (_list(_int(1, 10 ** 12)), [64, 128, 256]),
    "replicas": (_int(0, 10 ** 7), 100),
    "tau": (_float(0.0, 1.0, lo_open=True, hi_open=True), 0.5),
    "tau_relative": (_float(0.0, 0.5, lo_open=True, hi_open=True), 0.2),
    "epsilon": (_float(0.0, 10.0, lo_open=True), 0.2),
    "n_E": (_int(1, 10 ** 5), 24),
    "n_eta": (_int(1, 10 ** 5), 16),
    "grid": (_choice("bulk_line", "bulk", "full", "point"), "bulk_line"),
    "z_real": (_float(-100.0, 100.0), 0.0),
    "z_imag": (_float(0.0, 100.0, lo_open=True), 1.0),
    "statistic": (_choice("s", "lambda", "max"), "s"),
    "error": (_choice("psi1", "psi2"), "psi2"),
    "ensemble": (_choice("plain", "rescaled", "perturbed"), "plain"),
    "kernel": (_choice("plain", "perturbed"), "plain"),
    "eta": (_list(_float(0.0, 100.0, lo_open=True)), [0.1, 0.01]),
    "E_max": (_float(0.0, 100.0, lo_open=True), 2.5),
    "n_points": (_int(2, 10 ** 6), 2001),
    "lattice_exponent": (_int(0, 8), 4),
    "domain": (_choice("full", "bulk", "encompassing"), "bulk"),
    "max_points": (_int(1, 10 ** 6), 100_000),
    "indices": (_int(1, MAX_N), 32),
    "rank": (_list(_int(0, 64)), [1, 2, 3]),
    "ell": (_list(_int(1, 64)), [1, 2]),
    "p": (_list(_int(1, 64)), [2, 4]),
}
RESERVED = ("experiment", "master_seed", "output_dir")


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    master_seed: int = 0
    output_dir: str = ""

    def __getitem__(self, key):
        if key in self.params:
            return self.params[key]
        return PARAMETERS[key][1]

    def get(self, key, default=None):
        return self.params.get(key, default)

    @property
    def config_hash(self):
        """sha256 over the canonical text of everything that affects results."""
        return hashlib.sha256(canonical_text(self, with_output=False).encode()).hexdigest()

    def resolved_output_dir(self):
        return Path(self.output_dir or os.environ.get("CWSC_OUTPUT_DIR") or DEFAULT_OUTPUT)


def _format(value):
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def canonical_text(config, with_output=True):
    lines = [f"experiment = {config.experiment}", f"master_seed = {config.master_seed}"]
    if with_output and config.output_dir:
        lines.append(f"output_dir = {config.output_dir}")
    for key in sorted(config.params):
        lines.append(f"{key} = {_format(config.params[key])}")
    return "\n".join(lines) + "\n"


def parse_config(text, source="<string>"):
    """Parse ``key = value`` text into an :class:`ExperimentConfig`."""
    raw = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        raw[key] = value
    if "experiment" not in raw:
        raise ConfigError(f"{source}: missing 'experiment'")
    experiment = raw.pop("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"{source}: unknown experiment {experiment!r}")
    seed = _int(0, 2 ** 64 - 1)(raw.pop("master_seed", "0"))
    output_dir = raw.pop("output_dir", "")
    params = {}
    for key, value in raw.items():
        if key not in PARAMETERS:
            raise ConfigError(f"{source}: unknown parameter {key!r}")
        try:
            params[key] = PARAMETERS[key][0](value)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {key}: {exc}") from None
    if experiment not in SPIN_COUNT_EXPERIMENTS and max(params.get("N_grid", [0])) > MAX_N:
        raise ConfigError(f"{source}: N_grid: matrix dimension above {MAX_N}")
    return ExperimentConfig(experiment, params, seed, output_dir)


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def make_config(experiment, master_seed=0, output_dir="", **params):
    """Build a config programmatically through the same parsers."""
    text = "\n".join([f"experiment = {experiment}", f"master_seed = {master_seed}"]
                     + ([f"output_dir = {output_dir}"] if output_dir else [])
                     + [f"{k} = {_format(v)}" for k, v in params.items()])
    return parse_config(text)
