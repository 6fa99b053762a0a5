"""Local semicircle law experiments for Curie-Weiss type random matrices."""
from . import ensembles, ldp, locallaw, mixing, spectral
from .errors import (CWSCError, ConfigError, DiracMeasure, DomainError,
                     IoError, NumericalFailure, OracleScaleExceeded,
                     ScaleExceeded, SupercriticalRequired)

__version__ = "0.1.0"
