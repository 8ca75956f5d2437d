"""Command-line interface.

Exit codes: 0 success, 2 parse/validation error, 3 fit non-convergence,
4 domain error, 1 anything else.
"""
import argparse
import json
import re
import sys
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from . import loss_models as lm
from . import plotting
from .campaign import (build_report, dumps_canonical, load_campaign, published_campaigns,
                       removal_depth)
from .config import get_defaults
from .errors import CavcharError, FitError, ParseError, ValidationError
from .fileio import parse_csv_trace, parse_touchstone, write_csv_trace, write_touchstone
from .fitting import fit_freq_shift, fit_tls_power, fit_tls_temp
from .resonance import classify_coupling, extract_resonance, model_s11
from .ringdown import build_lifetime_budget, calibrate, fit_ringdown
from .synth import SynthSpec, generate_synthetic
from .traces import FrequencyTrace, PointSet, Spectrum, TimeTrace
from .xps import fit_nb3d, model_doublet, model_spectrum

RESULT_SCHEMA = 1


def _load_trace(path):
    if re.search(r"\.s\d+p$", str(path).lower()):
        return parse_touchstone(path)
    return parse_csv_trace(path)


def _expect(trace, cls, path):
    if not isinstance(trace, cls):
        raise ValidationError(f"{path}: expected {cls.__name__} data, got {type(trace).__name__}")
    return trace


def _fit_block(fit):
    return {
        "parameters": {k: float(v) for k, v in fit.values.items()},
        "stderr": {k: float(v) for k, v in fit.stderr.items()},
        "covariance": np.asarray(fit.covariance, dtype=float).tolist(),
        "reduced_chi_square": float(fit.reduced_chi_square),
        "iterations": int(fit.iterations),
        "converged": bool(fit.converged),
        "status": fit.status,
        "n_points": int(fit.n_points),
        "history": [float(h) for h in fit.history],
    }


def _doc(command, model, source, fit=None, **extra):
    doc = {"schema_version": RESULT_SCHEMA, "command": command, "model": model,
           "input": str(source)}
    if fit is not None:
        doc["fit"] = _fit_block(fit)
    doc.update(extra)
    return doc


def _fit_opts(args):
    return {"tolerance": args.tolerance, "max_iterations": args.max_iter}


# ---------------------------------------------------------------------------
# subcommand workers (one input each)
# ---------------------------------------------------------------------------

def _do_fit_s11(path, args):
    trace = _expect(_load_trace(path),
                    FrequencyTrace, path)
    opts = {"tolerance": args.tolerance or 1e-12, "max_iterations": args.max_iter or 200}
    ex = extract_resonance(trace, refine=args.refine, **opts)
    p = ex.params
    regime = classify_coupling(p)
    curve = model_s11(p, trace.frequencies)
    plot = plotting.plot_block(
        "S11 magnitude", "frequency (Hz)", "|S11|",
        [plotting.series("data", trace.frequencies, np.abs(trace.s11)),
         plotting.series("model", trace.frequencies, np.abs(curve), "line")])
    return _doc("fit-s11", "s11", path, ex.fit, resonance=p.as_dict(),
                coupling={"regime": regime.label, "q_ext_over_q_int": regime.ratio},
                flags=list(ex.flags), plot=plot)


def _points_plot(title, x_label, y_label, data, xfit, yfit, xscale="log", yscale="linear"):
    return plotting.plot_block(title, x_label, y_label,
                               [plotting.series("data", data.x, data.y),
                                plotting.series("model", xfit, yfit, "line")], xscale, yscale)


def _do_fit_tls_power(path, args):
    data = _expect(_load_trace(path), PointSet, path)
    if args.temperature is not None:
        data = replace(data, temperature=args.temperature)
    fit = fit_tls_power(data, **_fit_opts(args))
    temp = fit.info["temperature"]
    pos = data.x[data.x > 0]
    grid = np.geomspace(pos.min(), pos.max(), 200) if pos.size else data.x
    q = 1.0 / lm.eval_tls_power(lm.TlsPowerParams(*fit.parameters),
                                lm.ModeParams(data.f_r, temp, grid))
    return _doc("fit-tls-power", "tls_power", path, fit,
                operating_point={"f_r_hz": data.f_r, "temperature_k": temp},
                plot=_points_plot("Q_int vs photon number", "mean photon number", "Q_int",
                                  data, grid, q, "log", "log"))


def _do_fit_tls_temp(path, args):
    data = _expect(_load_trace(path), PointSet, path)
    fit = fit_tls_temp(data, **_fit_opts(args))
    grid = np.geomspace(data.x.min(), data.x.max(), 200)
    q = 1.0 / lm.eval_tls_temp(lm.TlsTempParams(*fit.parameters), lm.ModeParams(data.f_r, grid))
    return _doc("fit-tls-temp", "tls_temp", path, fit,
                operating_point={"f_r_hz": data.f_r},
                plot=_points_plot("Q_int vs temperature", "temperature (K)", "Q_int",
                                  data, grid, q, "log", "log"))


def _do_fit_fshift(path, args):
    data = _expect(_load_trace(path), PointSet, path)
    fit = fit_freq_shift(data, fit_offset=args.fit_offset, **_fit_opts(args))
    grid = np.geomspace(data.x.min(), data.x.max(), 200)
    y = fit.parameters[0] / np.pi * lm.freq_shift_bracket(data.f_r, grid)
    if args.fit_offset:
        y = y + fit.parameters[1]
    t_min = lm.freq_shift_minimum(data.f_r)
    return _doc("fit-fshift", "freq_shift", path, fit,
                operating_point={"f_r_hz": data.f_r},
                minimum={"temperature_k": t_min,
                         "df_over_f": float(fit.parameters[0] / np.pi
                                            * lm.freq_shift_bracket(data.f_r, t_min))},
                plot=_points_plot("frequency shift vs temperature", "temperature (K)",
                                  "df/f", data, grid, y, "log", "linear"))


def _do_fit_ringdown(path, args):
    trace = _expect(_load_trace(path), TimeTrace, path)
    rd = fit_ringdown(trace, fit_offset=not args.no_offset, **_fit_opts(args))
    extra = {}
    if args.qext is not None:
        f_r = args.fr or get_defaults().nominal_f_r_hz
        extra["budget"] = build_lifetime_budget(rd.tau_tot, args.qext, f_r).as_dict()
    t = trace.times
    model = rd.amplitude0 * np.exp(-(t - rd.t_ref) / rd.tau_tot) + rd.offset
    plot = plotting.plot_block(
        "ring-down", "time (s)", "energy (arb.)",
        [plotting.series("data", t, trace.energy), plotting.series("model", t, model, "line")])
    return _doc("fit-ringdown", "ringdown", path, rd.fit, **extra, plot=plot)


def _do_xps_fit(path, args):
    spec = _expect(_load_trace(path), Spectrum, path)
    res = fit_nb3d(spec, species=tuple(args.species), background=args.background,
                   fit_mixing=args.fit_mixing, **_fit_opts(args))
    sp = spec.ascending()
    e = sp.binding_energy
    bg = res.background
    if bg["model"] == "linear":
        base = model_spectrum([], e, bg["offset"], bg["slope"], bg["e_ref"])
    else:
        base = kernels.shirley(e, sp.counts)
    series_ = [plotting.series("data", e, sp.counts),
               plotting.series("model", e, base + sum(model_doublet(c, e) for c in res.components),
                               "line")]
    for c in res.components:
        series_.append(plotting.series(c.species, e, base + model_doublet(c, e), "line"))
    return _doc("xps-fit", "xps", path, res.fit,
                components=[c.as_dict() for c in res.components],
                background=bg, alignment_shift_ev=res.shift,
                composition=res.composition.as_dict()["fractions_percent"],
                plot=plotting.plot_block("Nb 3d", "binding energy (eV)", "counts", series_))


_WORKERS = {
    "fit-s11": _do_fit_s11,
    "fit-tls-power": _do_fit_tls_power,
    "fit-tls-temp": _do_fit_tls_temp,
    "fit-fshift": _do_fit_fshift,
    "fit-ringdown": _do_fit_ringdown,
    "xps-fit": _do_xps_fit,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, list) and obj and not isinstance(obj[0], (dict, list)) and len(obj) <= 8:
        out.append((prefix, " ".join(_txt(v) for v in obj)))
    elif isinstance(obj, list):
        return
    else:
        out.append((prefix, _txt(obj)))


def _num(v):
    # full round-trip precision for numbers, plain text otherwise
    return repr(float(v)) if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool) \
        else str(v)


def _txt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _render_text(doc):
    if "results" in doc:
        return "\n".join(_render_text(d) for d in doc["results"])
    if "rows" in doc:
        return _render_csv(doc).replace(",", "\t")
    lines = []
    shown = {k: v for k, v in doc.items() if k not in ("plot",)}
    if "fit" in shown:
        shown["fit"] = {k: v for k, v in shown["fit"].items() if k not in ("covariance", "history")}
    _flatten("", shown, lines)
    return "".join(f"{k}: {v}\n" for k, v in lines)


def _render_csv(doc):
    if "results" in doc:
        out = ["input,parameter,value,stderr"]
        for d in doc["results"]:
            for line in _render_csv(d).splitlines()[1:]:
                out.append(f"{d['input']},{line}")
        return "\n".join(out) + "\n"
    if "rows" in doc:
        cols = doc["columns"]
        out = [",".join(cols)]
        for r in doc["rows"]:
            out.append(",".join("" if r[c] is None else _txt(r[c]) for c in cols))
        return "\n".join(out) + "\n"
    if "fit" in doc:
        out = ["parameter,value,stderr"]
        for k, v in doc["fit"]["parameters"].items():
            out.append(f"{k},{_num(v)},{_num(doc['fit']['stderr'][k])}")
        # derived quantities carry no separate standard error column
        for block in ("resonance", "budget", "minimum", "composition"):
            for k, v in sorted(doc.get(block, {}).items()):
                out.append(f"{block}.{k},{_num(v)},")
        return "\n".join(out) + "\n"
    out = ["key,value"]
    for k, v in _flat_list(doc):
        out.append(f"{k},{v}")
    return "\n".join(out) + "\n"


def _flat_list(doc):
    lines = []
    _flatten("", {k: v for k, v in doc.items() if k != "plot"}, lines)
    return lines


def _emit(doc, args):
    fmt = args.format
    if fmt == "json":
        text = dumps_canonical(doc)
    elif fmt == "csv":
        text = _render_csv(doc)
    else:
        text = _render_text(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_fit(args):
    worker = _WORKERS[args.command]
    inputs = list(args.inputs)
    if args.jobs > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            # map preserves input order regardless of completion order
            docs = list(pool.map(lambda p: worker(p, args), inputs))
    else:
        docs = [worker(p, args) for p in inputs]
    doc = docs[0] if len(docs) == 1 else {"schema_version": RESULT_SCHEMA,
                                          "command": args.command, "results": docs}
    _emit(doc, args)
    if any("fit" in d and not d["fit"]["converged"] for d in docs):
        raise FitError("fit did not converge: " + "; ".join(
            f"{d['input']}: {d['fit']['status']}" for d in docs if not d["fit"]["converged"]))
    return 0


def _cmd_photon_cal(args):
    if args.ql is None:
        if args.qint is None:
            raise ValidationError("give --ql or --qint")
        from .ringdown import loaded_q
        ql = loaded_q(args.qint, args.qext)
    else:
        ql = args.ql
    p_in = args.p_in if args.p_in is not None else 1e-3 * 10.0 ** (args.p_in_dbm / 10.0)
    cal = calibrate(p_in, args.fr, ql, args.qext, args.systematic)
    _emit({"schema_version": RESULT_SCHEMA, "command": "photon-cal",
           "p_in_w": cal.p_in, "f_r_hz": cal.f_r, "q_loaded": cal.q_loaded, "q_ext": cal.q_ext,
           "n_bar": cal.n_bar, "n_bar_range": list(cal.n_bar_range),
           "systematic_factor": cal.systematic_factor, "metadata": cal.metadata}, args)
    return 0


def _cmd_etch_depth(args):
    dt = removal_depth(args.dw * 1e-3, surface_area=args.area * 1e-4,
                       density=None if args.density is None else args.density * 1e3)
    _emit({"schema_version": RESULT_SCHEMA, "command": "etch-depth", "dw_g": args.dw,
           "area_cm2": args.area, "depth_m": dt, "depth_um": dt * 1e6}, args)
    return 0


def _cmd_synth(args):
    try:
        with open(args.spec, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read synth spec {args.spec!r}: {exc}") from exc
    spec = SynthSpec.from_dict(doc)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    trace, sidecar = generate_synthetic(spec)
    out = args.out
    if out is None:
        sys.stdout.write(write_csv_trace(trace))
        return 0
    if out.lower().endswith(".s1p"):
        write_touchstone(trace, out)
    else:
        write_csv_trace(trace, out)
    with open(out + ".truth.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_canonical(sidecar))
    return 0


def _cmd_report(args):
    if args.published:
        records = list(published_campaigns().values())
    elif args.campaign:
        records = [load_campaign(p) for p in args.campaign]
    else:
        raise ValidationError("give one or more campaign files or --published")
    _emit(build_report(records, args.g_factor), args)
    return 0


def _cmd_plot(args):
    try:
        with open(args.result, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read result {args.result!r}: {exc}") from exc
    docs = doc.get("results", [doc])
    out = args.out or (str(args.result).rsplit(".", 1)[0] + ".svg")
    if len(docs) == 1:
        plotting.render_svg(docs[0].get("plot"), out)
    else:
        stem, _, ext = out.rpartition(".")
        for i, d in enumerate(docs):
            plotting.render_svg(d.get("plot"), f"{stem}-{i}.{ext or 'svg'}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("text", "json", "csv"), default="text")
    common.add_argument("--seed", type=int, help="u64 seed (synth)")
    common.add_argument("--tolerance", type=float, help="relative cost-decrease tolerance")
    common.add_argument("--max-iter", type=int, help="iteration cap")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for several inputs")

    p = argparse.ArgumentParser(prog="cavchar", description="Cavity loss characterisation tools")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fit-s11", parents=[common], help="extract resonance parameters")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--refine", action="store_true",
                   help="finish with a full complex least-squares refinement")

    s = sub.add_parser("fit-tls-power", parents=[common], help="fit Q_int vs photon number")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--temperature", type=float, help="bath temperature (K)")

    s = sub.add_parser("fit-tls-temp", parents=[common], help="fit Q_int vs temperature")
    s.add_argument("inputs", nargs="+")

    s = sub.add_parser("fit-fshift", parents=[common], help="fit frequency shift vs temperature")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--fit-offset", action="store_true", help="fit a constant reference offset")

    s = sub.add_parser("fit-ringdown", parents=[common], help="fit a ring-down decay")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--qext", type=float, help="external Q for the lifetime budget")
    s.add_argument("--fr", type=float, help="resonance frequency (Hz)")
    s.add_argument("--no-offset", action="store_true", help="pin the floor to zero")

    s = sub.add_parser("photon-cal", parents=[common], help="photon number from drive power")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--p-in", type=float, help="power at the cavity port (W)")
    g.add_argument("--p-in-dbm", type=float, help="power at the cavity port (dBm)")
    s.add_argument("--fr", type=float, required=True)
    s.add_argument("--qext", type=float, required=True)
    s.add_argument("--ql", type=float)
    s.add_argument("--qint", type=float)
    s.add_argument("--systematic", type=float, help="multiplicative systematic factor")

    s = sub.add_parser("xps-fit", parents=[common], help="Nb 3d doublet deconvolution")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--species", nargs="+", default=["Nb2O5", "NbO", "Nb-metal"])
    s.add_argument("--background", choices=("linear", "shirley"), default="linear")
    s.add_argument("--fit-mixing", action="store_true")

    s = sub.add_parser("etch-depth", parents=[common], help="removal depth from weight loss")
    s.add_argument("--dw", type=float, required=True, help="mass loss (g)")
    s.add_argument("--area", type=float, required=True, help="surface area (cm^2)")
    s.add_argument("--density", type=float, help="density (g/cm^3)")

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s.add_argument("spec")

    s = sub.add_parser("report", parents=[common], help="per-cooldown campaign report")
    s.add_argument("campaign", nargs="*")
    s.add_argument("--g-factor", type=float, help="geometric factor (ohm)")
    s.add_argument("--published", action="store_true", help="use the bundled published table")

    s = sub.add_parser("plot", parents=[common], help="SVG plot of a JSON result document")
    s.add_argument("result")
    return p


_COMMANDS = {
    "photon-cal": _cmd_photon_cal,
    "etch-depth": _cmd_etch_depth,
    "synth": _cmd_synth,
    "report": _cmd_report,
    "plot": _cmd_plot,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in _WORKERS:
            return _cmd_fit(args)
        return _COMMANDS[args.command](args)
    except CavcharError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
