"""Deterministic synthetic datasets with known truth for every model.

Noise is counter-based: point ``i`` of channel ``c`` under seed ``s`` always
draws from Philox block ``i`` keyed by ``(s, c)``. A dataset truncated or
extended along its axis therefore keeps the noise on the shared points.
"""
from dataclasses import dataclass, field

import numpy as np

from . import loss_models as lm
from .errors import ValidationError
from .resonance import ResonanceParams, model_s11
from .traces import FrequencyTrace, PointSet, Spectrum, TimeTrace

SYNTH_MODELS = ("tls_power", "tls_temp", "freq_shift", "ringdown", "s11", "xps")

_CHANNEL = {name: i for i, name in enumerate(SYNTH_MODELS)}


@dataclass
class SynthSpec:
    """Recipe for one synthetic dataset.

    ``axis`` is either ``{"values": [...]}`` or ``{"start", "stop", "num",
    "scale"}`` with ``scale`` in {"linear", "log"}. For ``s11`` the axis may
    instead give ``{"span_linewidths", "num"}`` centred on the resonance.
    ``noise`` holds ``relative`` (multiplicative sigma) and/or ``snr_db``
    (additive, relative to the signal scale).
    """

    model_id: str
    truth: dict
    axis: dict
    noise: dict = field(default_factory=dict)
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model_id not in SYNTH_MODELS:
            raise ValidationError(
                f"unknown model id {self.model_id!r}; expected one of {SYNTH_MODELS}")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(doc["model_id"], dict(doc["truth"]), dict(doc["axis"]),
                       dict(doc.get("noise", {})), doc.get("seed", 0),
                       dict(doc.get("meta", {})))
        except KeyError as exc:
            raise ValidationError(f"synth spec missing key {exc}") from exc

    def to_dict(self):
        return {"model_id": self.model_id, "truth": self.truth, "axis": self.axis,
                "noise": self.noise, "seed": self.seed, "meta": self.meta}


def counter_normals(seed, n, channel=0, width=1):
    """Standard normals of shape ``(n, width)``; row ``i`` depends only on ``(seed, channel, i)``.

    ``width`` may be 1..4 (one Philox block of four 64-bit words per row,
    turned into normals by Box-Muller).
    """
    if not 1 <= width <= 4:
        raise ValueError("width must be between 1 and 4")
    bitgen = np.random.Philox(key=np.array([seed, channel], dtype=np.uint64))
    raw = bitgen.random_raw(4 * n).reshape(n, 4)
    # 53-bit uniforms in (0, 1]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)
    r1 = np.sqrt(-2.0 * np.log(u[:, 0]))
    r2 = np.sqrt(-2.0 * np.log(u[:, 2]))
    a1 = 2.0 * np.pi * u[:, 1]
    a2 = 2.0 * np.pi * u[:, 3]
    out = np.column_stack([r1 * np.cos(a1), r1 * np.sin(a1), r2 * np.cos(a2), r2 * np.sin(a2)])
    return out[:, :width]


def make_axis(axis):
    if "values" in axis:
        vals = np.asarray(axis["values"], dtype=float)
    else:
        try:
            start, stop, num = float(axis["start"]), float(axis["stop"]), int(axis["num"])
        except KeyError as exc:
            raise ValidationError(f"axis missing key {exc}") from exc
        if num < 1:
            raise ValidationError("axis needs at least one point")
        scale = axis.get("scale", "linear")
        if scale == "log":
            if not (start > 0 and stop > 0):
                raise ValidationError("log axis bounds must be > 0")
            vals = np.logspace(np.log10(start), np.log10(stop), num)
        elif scale == "linear":
            vals = np.linspace(start, stop, num)
        else:
            raise ValidationError(f"unknown axis scale {scale!r}")
    if vals.size == 0 or not np.all(np.isfinite(vals)):
        raise ValidationError("axis must be non-empty and finite")
    return vals


def _noisy(y, spec, scale, channel_offset=0):
    """Apply multiplicative ``relative`` then additive ``snr_db`` noise."""
    rel = float(spec.noise.get("relative", 0.0))
    snr = spec.noise.get("snr_db")
    ch = 2 * _CHANNEL[spec.model_id] + channel_offset
    eps = counter_normals(spec.seed, y.size, ch, width=2)
    out = y.copy()
    if rel:
        out = out * (1.0 + rel * eps[:, 0])
    if snr is not None:
        out = out + scale * 10.0 ** (-float(snr) / 20.0) * eps[:, 1]
    return out


def _require(truth, names, model_id):
    missing = [n for n in names if n not in truth]
    if missing:
        raise ValidationError(f"{model_id} truth missing {missing}")


def generate_synthetic(spec):
    """Forward-evaluate the model in ``spec`` and apply seeded noise.

    Returns ``(trace, sidecar)`` where ``sidecar`` records the truth, the
    full spec, and the noise model so any downstream fit can be scored.
    """
    if isinstance(spec, dict):
        spec = SynthSpec.from_dict(spec)
    t = spec.truth
    meta = spec.meta
    f_r = float(meta.get("f_r", 5.5e9))
    m = spec.model_id
    if m == "tls_power":
        _require(t, ("f_tls_loss", "n_c", "beta", "q_res"), m)
        n = make_axis(spec.axis)
        if np.any(n < 0):
            raise ValidationError("photon numbers must be >= 0")
        temp = float(meta.get("temperature", 0.01))
        p = lm.TlsPowerParams(t["f_tls_loss"], t["n_c"], t["beta"], t["q_res"])
        q = 1.0 / lm.eval_tls_power(p, lm.ModeParams(f_r, temp, n))
        trace = PointSet(n, _noisy(q, spec, np.max(q)), "qn", f_r=f_r, temperature=temp)
    elif m == "tls_temp":
        _require(t, ("f_tls_loss", "q_int0"), m)
        temps = make_axis(spec.axis)
        if np.any(temps <= 0):
            raise ValidationError("temperatures must be > 0")
        p = lm.TlsTempParams(t["f_tls_loss"], t["q_int0"])
        q = 1.0 / lm.eval_tls_temp(p, lm.ModeParams(f_r, temps))
        trace = PointSet(temps, _noisy(q, spec, np.max(q)), "qt", f_r=f_r)
    elif m == "freq_shift":
        _require(t, ("f_tls_loss",), m)
        temps = make_axis(spec.axis)
        if np.any(temps <= 0):
            raise ValidationError("temperatures must be > 0")
        y = lm.eval_freq_shift(t["f_tls_loss"], lm.ModeParams(f_r, temps))
        y = np.atleast_1d(y) + float(t.get("offset", 0.0))
        trace = PointSet(temps, _noisy(y, spec, np.max(np.abs(y))), "ft", f_r=f_r)
    elif m == "ringdown":
        _require(t, ("tau_tot",), m)
        times = make_axis(spec.axis)
        e0 = float(t.get("e0", 1.0))
        energy = e0 * np.exp(-times / float(t["tau_tot"])) + float(t.get("offset", 0.0))
        kind = meta.get("kind", "power")
        energy = _noisy(energy, spec, e0)
        values = np.sqrt(np.clip(energy, 0.0, None)) if kind == "amplitude" else energy
        trace = TimeTrace(times, values, kind, meta.get("amplifier_chain_gain_db"))
    elif m == "s11":
        _require(t, ("f_r", "q_int", "q_ext"), m)
        p = ResonanceParams.from_q(
            t["f_r"], t["q_int"], t["q_ext"], t.get("phi", 0.0),
            env_delay=t.get("env_delay", 0.0), env_amp=t.get("env_amp", 1.0),
            env_phase=t.get("env_phase", 0.0))
        if "span_linewidths" in spec.axis:
            lw = p.f_r / p.q_loaded
            half = 0.5 * float(spec.axis["span_linewidths"])
            freqs = p.f_r + np.linspace(-half, half, int(spec.axis.get("num", 401))) * lw
        else:
            freqs = make_axis(spec.axis)
        z = model_s11(p, freqs)
        snr = spec.noise.get("snr_db")
        if snr is not None:
            sigma = p.env_amp * 10.0 ** (-float(snr) / 20.0) / np.sqrt(2.0)
            eps = counter_normals(spec.seed, freqs.size, 2 * _CHANNEL[m], width=2)
            z = z + sigma * (eps[:, 0] + 1j * eps[:, 1])
        trace = FrequencyTrace(freqs, z, meta.get("drive_power"), meta.get("temperature"))
    else:  # xps
        from .xps import DoubletComponent, model_spectrum
        comps = [DoubletComponent(**c) for c in t.get("components", [])]
        if not comps:
            raise ValidationError("xps truth needs at least one component")
        bg = t.get("background", {})
        energy = make_axis(spec.axis)
        y = model_spectrum(comps, energy, bg.get("offset", 0.0), bg.get("slope", 0.0))
        trace = Spectrum(energy, _noisy(y, spec, np.max(y)), meta.get("note", ""))
    sidecar = {"model_id": m, "truth": spec.truth, "spec": spec.to_dict()}
    return trace, sidecar
