"""Physical constants and overridable analysis defaults.

Defaults can be overridden by a JSON document whose path is given in the
``CAVCHAR_CONFIG`` environment variable. Keys absent from the document keep
their built-in values.
"""
import json
import os
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache

from scipy import constants as _sc

from .errors import ParseError

PLANCK = _sc.h
HBAR = _sc.hbar
BOLTZMANN = _sc.k

ENV_VAR = "CAVCHAR_CONFIG"

# Nb 3d5/2 reference binding energies (eV), used as initial guesses and
# bound centres by the XPS fitter.
DEFAULT_XPS_REFERENCES = {
    "Nb-metal": 202.2,
    "NbOx": 203.0,
    "NbO": 203.8,
    "NbO2": 206.1,
    "Nb2O5": 207.5,
}


@dataclass(frozen=True)
class Defaults:
    geometric_factor_ohm: float = 66.2
    niobium_density_kg_m3: float = 8570.0
    nominal_f_r_hz: float = 5.5e9
    base_temperature_k: float = 0.01
    xps_references_ev: dict = field(default_factory=lambda: dict(DEFAULT_XPS_REFERENCES))
    xps_position_window_ev: float = 0.5
    xps_splitting_ev: float = 2.75
    # Gaussian fraction of the pseudo-Voigt when not fitted
    xps_mixing: float = 0.7
    photon_number_systematic_factor: float = 2.0
    fit_tolerance: float = 1e-10
    fit_max_iterations: int = 200


def load_defaults(path=None):
    """Return :class:`Defaults`, merged with the JSON file at ``path``."""
    base = Defaults()
    if path is None:
        return base
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read config {path!r}: {exc}") from exc
    known = {f.name for f in fields(Defaults)}
    unknown = set(doc) - known
    if unknown:
        raise ParseError(f"unknown config keys in {path!r}: {sorted(unknown)}")
    if "xps_references_ev" in doc:
        refs = dict(base.xps_references_ev)
        refs.update(doc["xps_references_ev"])
        doc = {**doc, "xps_references_ev": refs}
    return replace(base, **doc)


@lru_cache(maxsize=None)
def _cached(path):
    return load_defaults(path)


def get_defaults():
    """Defaults for the current process, honouring ``CAVCHAR_CONFIG``."""
    return _cached(os.environ.get(ENV_VAR) or None)
