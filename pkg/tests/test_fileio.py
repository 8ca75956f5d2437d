"""Touchstone and schema-tagged CSV readers/writers."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavchar.errors import ParseError
from cavchar.fileio import (detect_schema, parse_csv_trace, parse_touchstone, write_csv_trace,
                            write_touchstone)
from cavchar.traces import FrequencyTrace, PointSet, Spectrum, TimeTrace


def test_touchstone_ri_and_db():
    tr = parse_touchstone("# GHz S RI R 50\n5.5 0.7 0.0\n")
    assert tr.frequencies[0] == 5.5e9 and tr.s11[0] == 0.7 + 0j
    tr = parse_touchstone("! comment\n# Hz S DB R 50\n5.5e9 -3.0103 90\n")
    assert abs(tr.s11[0].real) < 1e-15
    assert tr.s11[0].imag == pytest.approx(10 ** (-3.0103 / 20), rel=1e-15)


def test_touchstone_ma_and_defaults():
    tr = parse_touchstone("# MHz S MA R 50\n5500 0.5 -45\n5501 0.5 45 ! trailing\n")
    assert tr.s11[0] == pytest.approx(0.5 * np.exp(-1j * np.pi / 4), abs=1e-16)
    # an option line without format defaults to GHz / MA
    assert parse_touchstone("#\n5.5 0.5 0\n").frequencies[0] == 5.5e9


@pytest.mark.parametrize("text", [
    "# GHz S RI R 50\n5.5 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8\n",
    "# GHz Y RI R 50\n5.5 0.7 0\n",
    "# GHz S XX R 50\n5.5 0.7 0\n",
    "# GHz S RI R 50\n5.6 0.7 0\n5.5 0.7 0\n",
    "# GHz S RI R 50\n# GHz S RI R 50\n5.5 0.7 0\n",
    "[Version] 2.0\n# GHz S RI R 50\n5.5 0.7 0\n",
    "# GHz S RI R 50\n5.5 abc 0\n",
])
def test_touchstone_errors(text):
    with pytest.raises(ParseError):
        parse_touchstone(text)


def test_touchstone_wrong_extension(tmp_path):
    p = tmp_path / "x.s2p"
    p.write_text("# GHz S RI R 50\n5.5 0.7 0\n")
    with pytest.raises(ParseError):
        parse_touchstone(p)


@settings(max_examples=30, deadline=None)
@given(fmt=st.sampled_from(["RI", "MA", "DB"]), unit=st.sampled_from(["Hz", "kHz", "MHz", "GHz"]),
       seed=st.integers(0, 2 ** 32 - 1))
def test_touchstone_round_trip(fmt, unit, seed):
    rng = np.random.default_rng(seed)
    f = np.sort(rng.uniform(4e9, 8e9, 25))
    z = rng.uniform(0.05, 1.0, 25) * np.exp(1j * rng.uniform(-np.pi, np.pi, 25))
    back = parse_touchstone(write_touchstone(FrequencyTrace(f, z), fmt=fmt, unit=unit))
    np.testing.assert_allclose(back.frequencies, f, rtol=1e-12)
    np.testing.assert_allclose(back.s11, z, rtol=1e-12, atol=1e-15)


def test_csv_points_and_metadata():
    pts = parse_csv_trace("# f_r_hz: 5.2e9\n# temperature_k: 0.015\nn_bar,q_int\n1e2,2.6e9\n1e6,2.9e9\n")
    assert isinstance(pts, PointSet) and pts.kind == "qn" and len(pts) == 2
    assert pts.f_r == 5.2e9 and pts.temperature == 0.015
    assert detect_schema(["temperature_k", "df_over_f"]) == "ft-points"


def test_csv_error_names_row_and_column():
    with pytest.raises(ParseError, match=r"row 3.*q_int"):
        parse_csv_trace("temperature_k,q_int\n0.01,2e9\n0.1,oops\n")


def test_csv_rejects_descending_time_and_schema_mismatch():
    with pytest.raises(ParseError):
        parse_csv_trace("time_s,amplitude\n0.2,1\n0.1,0.5\n")
    with pytest.raises(ParseError):
        parse_csv_trace("n_bar,q_int\n1,2\n", schema="xps")


@pytest.mark.parametrize("trace", [
    FrequencyTrace(np.linspace(5e9, 5.1e9, 7), np.exp(1j * np.linspace(0, 3, 7)) * 0.3),
    TimeTrace(np.linspace(0, 1, 6), np.exp(-np.linspace(0, 1, 6)), "amplitude"),
    PointSet(np.geomspace(1, 1e6, 5), np.linspace(2e9, 3e9, 5), "qn", f_r=5.2e9, temperature=0.02),
    PointSet(np.geomspace(0.01, 1, 5), np.linspace(-1e-10, 2e-10, 5), "ft", sigma=np.full(5, 1e-12)),
    Spectrum(np.linspace(214, 198, 9), np.arange(9.0) + 10),
])
def test_csv_round_trip(trace):
    back = parse_csv_trace(write_csv_trace(trace))
    assert type(back) is type(trace)
    for a, b in zip(vars(trace).values(), vars(back).values()):
        if isinstance(a, np.ndarray):
            np.testing.assert_array_equal(a, b)
