"""Cavity campaign bookkeeping: geometry, treatments, cooldowns and reports.

A campaign document stores only primitives (measured or fitted values with
the trace they came from). Derived columns such as surface resistance and
internal lifetime are recomputed on every report, never persisted.
"""
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from . import loss_models as lm
from .config import get_defaults
from .errors import DomainError, ParseError, ValidationError
from .ringdown import build_lifetime_budget

SCHEMA_VERSION = 1

TREATMENT_KINDS = ("bulk-BCP", "high-T-bake", "BCP-flush", "wBCP-flush", "mid-T-anneal",
                   "air-exposure", "none")
_REQUIRED = {
    "high-T-bake": ("temperature_c", "duration_h"),
    "mid-T-anneal": ("temperature_c", "duration_h"),
}
_SHORT = {"bulk-BCP": "BCP", "high-T-bake": "HT", "BCP-flush": "BCP-f", "wBCP-flush": "wBCP-f"}
RESULT_KINDS = ("q_int_base", "q_int_1p2k", "resonance", "ringdown", "tls_power", "tls_temp")


@dataclass(frozen=True)
class CavityGeometry:
    stub_height: float
    r_out: float
    r_in: float
    surface_area: float
    density: float = field(default_factory=lambda: get_defaults().niobium_density_kg_m3)
    nominal_f_r: float = field(default_factory=lambda: get_defaults().nominal_f_r_hz)

    def __post_init__(self):
        for name in ("stub_height", "r_out", "r_in", "surface_area", "density", "nominal_f_r"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"geometry {name} must be finite and > 0, got {v}")
        if not self.r_in < self.r_out:
            raise ValidationError("r_in must be smaller than r_out")

    def to_dict(self):
        return {"stub_height_m": self.stub_height, "r_out_m": self.r_out, "r_in_m": self.r_in,
                "surface_area_m2": self.surface_area, "density_kg_m3": self.density,
                "nominal_f_r_hz": self.nominal_f_r}

    @classmethod
    def from_dict(cls, d):
        return cls(d["stub_height_m"], d["r_out_m"], d["r_in_m"], d["surface_area_m2"],
                   d["density_kg_m3"], d["nominal_f_r_hz"])


def removal_depth(dw, geometry=None, surface_area=None, density=None):
    """Uniform-etch removal depth ``dw / (rho S)`` in metres.

    ``dw`` is the mass loss in kg. Either a :class:`CavityGeometry` or an
    explicit ``surface_area`` (m^2) must be given.
    """
    dw = float(dw)
    if not dw > 0:
        raise DomainError(f"mass loss must be > 0, got {dw}")
    if geometry is not None:
        area = geometry.surface_area
        rho = geometry.density if density is None else float(density)
    else:
        if surface_area is None:
            raise ValidationError("need a geometry or a surface area")
        area = float(surface_area)
        rho = get_defaults().niobium_density_kg_m3 if density is None else float(density)
    if not (area > 0 and rho > 0):
        raise DomainError("surface area and density must be > 0")
    return dw / (rho * area)


@dataclass(frozen=True)
class TreatmentRecord:
    step_id: str
    kind: str
    parameters: dict = field(default_factory=dict)
    timestamp: Optional[str] = None

    def __post_init__(self):
        if self.kind not in TREATMENT_KINDS:
            raise ValidationError(f"unknown treatment kind {self.kind!r}")
        missing = [k for k in _REQUIRED.get(self.kind, ()) if k not in self.parameters]
        if missing:
            raise ValidationError(f"treatment {self.step_id} ({self.kind}) lacks {missing}")

    def label(self):
        if self.kind == "mid-T-anneal":
            t = self.parameters["temperature_c"]
            h = self.parameters["duration_h"]
            return f"{t:g} C-{h:g}h"
        return _SHORT.get(self.kind, "")

    def to_dict(self):
        return {"step_id": self.step_id, "kind": self.kind,
                "parameters": dict(self.parameters), "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, d):
        return cls(d["step_id"], d["kind"], dict(d.get("parameters", {})), d.get("timestamp"))


@dataclass(frozen=True)
class Cooldown:
    """One cooldown after treatment ``after_step``.

    ``results`` maps a result kind (see ``RESULT_KINDS``) to
    ``{"source": trace_id, ...values}``; every source must be listed in
    ``traces``.
    """

    index: int
    after_step: Optional[str]
    traces: tuple = ()
    results: dict = field(default_factory=dict)
    base_temperature: Optional[float] = None
    f_r: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        for kind, res in self.results.items():
            if kind not in RESULT_KINDS:
                raise ValidationError(f"unknown result kind {kind!r}")
            if res.get("source") not in self.traces:
                raise ValidationError(
                    f"cooldown {self.index}: result {kind} references unknown trace "
                    f"{res.get('source')!r}")

    def to_dict(self):
        return {"index": self.index, "after_step": self.after_step, "traces": list(self.traces),
                "results": {k: dict(v) for k, v in self.results.items()},
                "base_temperature_k": self.base_temperature, "f_r_hz": self.f_r}

    @classmethod
    def from_dict(cls, d):
        return cls(d["index"], d.get("after_step"), tuple(d.get("traces", ())),
                   {k: dict(v) for k, v in d.get("results", {}).items()},
                   d.get("base_temperature_k"), d.get("f_r_hz"))


@dataclass(frozen=True)
class CampaignRecord:
    cavity_id: str
    geometry: CavityGeometry
    treatments: tuple = ()
    cooldowns: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "treatments", tuple(self.treatments))
        object.__setattr__(self, "cooldowns", tuple(self.cooldowns))
        ids = [t.step_id for t in self.treatments]
        if len(set(ids)) != len(ids):
            raise ValidationError("treatment step ids must be unique")
        order = [c.index for c in self.cooldowns]
        if any(b <= a for a, b in zip(order, order[1:])):
            raise ValidationError("cooldown indices must be strictly increasing")
        for c in self.cooldowns:
            if c.after_step is not None and c.after_step not in ids:
                raise ValidationError(f"cooldown {c.index} follows unknown step {c.after_step!r}")

    def treatments_before(self, cooldown):
        if cooldown.after_step is None:
            return ()
        out = []
        for t in self.treatments:
            out.append(t)
            if t.step_id == cooldown.after_step:
                break
        return tuple(out)

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "cavity_id": self.cavity_id,
                "geometry": self.geometry.to_dict(),
                "treatments": [t.to_dict() for t in self.treatments],
                "cooldowns": [c.to_dict() for c in self.cooldowns]}

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ParseError(f"unsupported campaign schema version {d.get('schema_version')!r}")
        try:
            return cls(d["cavity_id"], CavityGeometry.from_dict(d["geometry"]),
                       tuple(TreatmentRecord.from_dict(t) for t in d.get("treatments", ())),
                       tuple(Cooldown.from_dict(c) for c in d.get("cooldowns", ())))
        except KeyError as exc:
            raise ParseError(f"campaign document missing key {exc}") from exc


def dumps_canonical(obj):
    """Stable JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def save_campaign(record, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_canonical(record.to_dict()))


def load_campaign(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read campaign {path!r}: {exc}") from exc
    return CampaignRecord.from_dict(doc)


def treatment_label(treatments):
    """Cumulative label such as ``BCP + HT + wBCP-f x2``; air exposures are omitted."""
    parts = [t.label() for t in treatments if t.kind not in ("air-exposure", "none")]
    if not parts:
        return "No treatment"
    merged = []
    for p in parts:
        if merged and merged[-1][0] == p:
            merged[-1][1] += 1
        else:
            merged.append([p, 1])
    return " + ".join(p if n == 1 else f"{p} x{n}" for p, n in merged)


def _q_int_base(cd, f_r):
    res = cd.results
    if "q_int_base" in res:
        return float(res["q_int_base"]["q_int"])
    if "resonance" in res:
        return float(res["resonance"]["q_int"])
    if "ringdown" in res:
        r = res["ringdown"]
        return build_lifetime_budget(r["tau_tot"], r["q_ext"], f_r).q_int
    return None


REPORT_COLUMNS = ("cavity", "cooldown", "treatment", "q_int", "r_s_ohm", "tau_int_s",
                  "q_int_1p2k", "r_s_1p2k_ohm", "f_tls_loss", "q_res")


def build_report(records, g=None):
    """Per-cooldown rows with derived columns recomputed from primitives.

    Parameters
    ----------
    records : CampaignRecord or sequence of them
    g : float or GeometricFactor, optional
        Geometric factor in ohm; configured default when omitted.

    Returns
    -------
    dict with ``schema_version``, ``g_factor_ohm``, ``columns`` and ``rows``.
    Absent quantities are ``None``.
    """
    if isinstance(records, CampaignRecord):
        records = [records]
    g_val = get_defaults().geometric_factor_ohm if g is None else \
        (g.g if isinstance(g, lm.GeometricFactor) else float(g))
    if not g_val > 0:
        raise DomainError("geometric factor must be > 0")
    rows = []
    for rec in records:
        for cd in rec.cooldowns:
            f_r = cd.f_r or rec.geometry.nominal_f_r
            q = _q_int_base(cd, f_r)
            if q is None:
                continue
            q12 = cd.results.get("q_int_1p2k", {}).get("q_int")
            tls = cd.results.get("tls_power", {})
            rows.append({
                "cavity": rec.cavity_id,
                "cooldown": cd.index,
                "treatment": treatment_label(rec.treatments_before(cd)),
                "q_int": q,
                "r_s_ohm": lm.q_to_surface_resistance(q, g_val),
                "tau_int_s": lm.q_to_tau(q, f_r),
                "q_int_1p2k": None if q12 is None else float(q12),
                "r_s_1p2k_ohm": None if q12 is None else lm.q_to_surface_resistance(q12, g_val),
                "f_tls_loss": tls.get("f_tls_loss"),
                "q_res": tls.get("q_res"),
            })
    if not rows:
        raise ValidationError("campaign has no cooldown with a fitted internal Q")
    return {"schema_version": SCHEMA_VERSION, "g_factor_ohm": g_val,
            "columns": list(REPORT_COLUMNS), "rows": rows}


def fit_geometric_factor(q_values, r_s_values):
    """Robust (median) estimate of G from paired Q_int and R_s; returns (G, ratios)."""
    q = np.asarray(q_values, dtype=float)
    r = np.asarray(r_s_values, dtype=float)
    if q.size == 0 or q.size != r.size:
        raise ValidationError("need equal, non-empty Q and R_s lists")
    prod = q * r
    if np.any(~(prod > 0)):
        raise DomainError("Q and R_s must be > 0")
    g = float(np.median(prod))
    return g, prod / g


def load_published_table():
    """The bundled published table (rows, geometry, etch data) as a dict."""
    text = resources.files("cavchar").joinpath("data/published_cavities.json").read_text(encoding="utf-8")
    return json.loads(text)


_STEP_PARAMS = {
    "bulk-BCP": {"temperature_c": 20, "duration_min": 12},
    "high-T-bake": {"temperature_c": 900, "duration_h": 3},
    "BCP-flush": {"temperature_c": 20, "duration_s": 30},
    "wBCP-flush": {"temperature_c": 5},
}


def published_campaigns():
    """Campaign records rebuilt from the bundled table (primitives only)."""
    doc = load_published_table()
    out = {}
    for row in doc["rows"]:
        cav = row["cavity"]
        entry = out.setdefault(cav, {"treatments": [], "cooldowns": []})
        steps = row["treatment"]
        known = [t.step_id for t in entry["treatments"]]
        after = None
        for i, step in enumerate(steps):
            kind, _, temp = step.partition(":")
            sid = f"{i + 1}-{kind}" + (f"-{temp}" if temp else "")
            if kind == "none":
                after = None
                break
            if sid not in known:
                params = dict(_STEP_PARAMS.get(kind, {}))
                if temp:
                    params = {"temperature_c": float(temp), "duration_h": 3}
                entry["treatments"].append(TreatmentRecord(sid, kind, params))
                known.append(sid)
            after = sid
        trace = f"{cav}/{'+'.join(steps)}/cd{row['cooldown']}"
        results = {"q_int_base": {"source": trace, "q_int": row["q_int_base"]}}
        if row.get("q_int_1p2k") is not None:
            results["q_int_1p2k"] = {"source": trace, "q_int": row["q_int_1p2k"]}
        if row.get("f_tls_loss") is not None:
            results["tls_power"] = {"source": trace, "f_tls_loss": row["f_tls_loss"],
                                    "q_res": row["q_res"]}
        entry["cooldowns"].append((after, trace, results))
    records = {}
    for cav, entry in out.items():
        geom = CavityGeometry.from_dict(doc["geometry"][cav[0]])
        cds = [Cooldown(i + 1, after, (trace,), results, base_temperature=0.02)
               for i, (after, trace, results) in enumerate(entry["cooldowns"])]
        records[cav] = CampaignRecord(cav, geom, tuple(entry["treatments"]), tuple(cds))
    return records
