"""Command-line interface: outputs, exit codes and determinism."""
import json

import pytest

from cavchar.cli import main

S11_SPEC = {"model_id": "s11", "truth": {"f_r": 5.5e9, "q_int": 3e9, "q_ext": 17e9, "phi": 0.05,
                                         "env_delay": 2e-8, "env_amp": 0.4, "env_phase": 0.5},
            "axis": {"span_linewidths": 20, "num": 401}, "noise": {"snr_db": 60}, "seed": 1}
TLS_SPEC = {"model_id": "tls_power",
            "truth": {"f_tls_loss": 3e-9, "n_c": 1e4, "beta": 0.5, "q_res": 5e9},
            "axis": {"start": 1, "stop": 1e10, "num": 30, "scale": "log"},
            "noise": {"relative": 0.01}, "seed": 2, "meta": {"f_r": 5.5e9, "temperature": 0.01}}


def _write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _synth(tmp_path, spec, out, *extra):
    assert main(["synth", _write(tmp_path, out + ".spec.json", spec), "--out",
                 str(tmp_path / out), *extra]) == 0
    return str(tmp_path / out)


def test_synth_writes_trace_and_truth(tmp_path):
    path = _synth(tmp_path, S11_SPEC, "a.s1p")
    side = json.loads(open(path + ".truth.json").read())
    assert side["truth"]["q_int"] == 3e9
    again = _synth(tmp_path, S11_SPEC, "b.s1p")
    assert open(path).read() == open(again).read()
    other = _synth(tmp_path, S11_SPEC, "c.s1p", "--seed", "99")
    assert open(path).read() != open(other).read()
    assert json.loads(open(other + ".truth.json").read())["spec"]["seed"] == 99


def test_fit_s11_json(tmp_path):
    trace = _synth(tmp_path, S11_SPEC, "t.s1p")
    out = tmp_path / "r.json"
    assert main(["fit-s11", trace, "--refine", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["resonance"]["q_int"] == pytest.approx(3e9, rel=0.01)
    assert doc["coupling"]["regime"] == "undercoupled"
    assert doc["fit"]["converged"] and doc["plot"]["series"]


def test_fit_outputs_are_byte_identical(tmp_path):
    trace = _synth(tmp_path, TLS_SPEC, "tp.csv")
    outs = []
    for i in range(2):
        out = tmp_path / f"fit{i}.json"
        assert main(["fit-tls-power", trace, "--format", "json", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    svgs = []
    for i in range(2):
        svg = tmp_path / f"p{i}.svg"
        assert main(["plot", str(tmp_path / "fit0.json"), "--out", str(svg)]) == 0
        svgs.append(svg.read_bytes())
    assert svgs[0] == svgs[1] and b"<svg" in svgs[0]


def test_jobs_merge_in_input_order(tmp_path):
    paths = [_synth(tmp_path, dict(TLS_SPEC, seed=s), f"tp{s}.csv") for s in range(4)]
    a, b = tmp_path / "serial.json", tmp_path / "threads.json"
    assert main(["fit-tls-power", *paths, "--format", "json", "--out", str(a)]) == 0
    assert main(["fit-tls-power", *paths, "--format", "json", "--jobs", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert [r["input"] for r in json.loads(a.read_text())["results"]] == paths


def test_ringdown_budget_and_domain_error(tmp_path, capsys):
    spec = {"model_id": "ringdown", "truth": {"tau_tot": 0.11, "e0": 1.0, "offset": 0.0},
            "axis": {"start": 0, "stop": 0.6, "num": 300}, "noise": {"snr_db": 50}, "seed": 3}
    trace = _synth(tmp_path, spec, "rd.csv")
    assert main(["fit-ringdown", trace, "--qext", "17e9", "--fr", "5.5e9", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["budget"]["tau_int"] * 1e3 == pytest.approx(141, abs=3)
    assert main(["fit-ringdown", trace, "--qext", "1e9", "--fr", "5.5e9"]) == 4


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("temperature_k,q_int\n0.01,abc\n")
    assert main(["fit-tls-temp", str(bad)]) == 2
    assert "row 2" in capsys.readouterr().err
    trace = _synth(tmp_path, TLS_SPEC, "tp.csv")
    assert main(["fit-tls-power", trace, "--max-iter", "1"]) == 3
    assert main(["etch-depth", "--dw", "-1", "--area", "100"]) == 4
    assert main(["fit-tls-temp", trace]) == 2


def test_etch_depth_photon_cal_and_fshift(tmp_path, capsys):
    assert main(["etch-depth", "--dw", "9.54", "--area", "110.591", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["depth_um"] == pytest.approx(101, abs=0.5)
    assert main(["photon-cal", "--p-in", "8.2315e-23", "--fr", "5.5e9", "--qint", "3e9",
                 "--qext", "17e9", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["n_bar"] == pytest.approx(1.0, rel=1e-3)
    spec = {"model_id": "freq_shift", "truth": {"f_tls_loss": 2e-9},
            "axis": {"start": 0.03, "stop": 1.0, "num": 20, "scale": "log"}, "seed": 1}
    trace = _synth(tmp_path, spec, "fs.csv")
    assert main(["fit-fshift", trace, "--format", "csv"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("parameter,value,stderr") and "minimum.temperature_k,0.1163" in out


def test_report_published_and_campaign(tmp_path, capsys):
    assert main(["report", "--published", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("cavity,cooldown,treatment,q_int,r_s_ohm")
    assert len(lines) == 23
    assert main(["report", "--published", "--g-factor", "70", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["g_factor_ohm"] == 70.0
    assert main(["report"]) == 2


def test_xps_fit_cli(tmp_path, capsys):
    spec = {"model_id": "xps", "truth": {"components": [
        {"species": "Nb2O5", "position_5_2": 207.5, "area_total": 60.0, "width": 1.4},
        {"species": "NbO", "position_5_2": 203.8, "area_total": 40.0, "width": 1.1}],
        "background": {"offset": 5.0, "slope": 0.0}},
        "axis": {"start": 198, "stop": 214, "num": 321}, "seed": 1}
    trace = _synth(tmp_path, spec, "x.csv")
    assert main(["xps-fit", trace, "--species", "Nb2O5", "NbO", "--format", "json"]) == 0
    comp = json.loads(capsys.readouterr().out)["composition"]
    assert comp["Nb2O5"] == pytest.approx(60.0, abs=1e-3)
