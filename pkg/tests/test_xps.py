"""Nb 3d doublet line shapes, fits and composition."""
import numpy as np
import pytest
from scipy.integrate import quad

from cavchar.errors import ValidationError, WindowTooNarrowError
from cavchar.synth import SynthSpec, generate_synthetic
from cavchar.traces import Spectrum
from cavchar.xps import (DoubletComponent, asymmetric_pseudo_voigt, composition, fit_nb3d,
                         model_doublet, pseudo_voigt)

REFS = {"Nb2O5": 207.5, "NbO": 203.8, "Nb-metal": 202.2}


def _area(fun):
    # split at the peak so quad sees the sharp part
    return sum(quad(fun, a, b, limit=400, epsabs=1e-12, epsrel=1e-11)[0]
               for a, b in ((-np.inf, -5), (-5, 0), (0, 5), (5, np.inf)))


@pytest.mark.parametrize("width,mixing", [(0.8, 0.0), (1.2, 0.7), (2.0, 1.0)])
def test_pseudo_voigt_unit_area(width, mixing):
    assert _area(lambda x: float(pseudo_voigt(np.array([x]), width, mixing)[0])) \
        == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("asym", [0.02, 0.1, 0.5])
def test_asymmetric_shape_unit_area_and_tail(asym):
    f = lambda x: float(asymmetric_pseudo_voigt(np.array([x]), 0.7, 0.7, asym)[0])  # noqa: E731
    assert _area(f) == pytest.approx(1.0, abs=1e-7)
    # tail on the high-binding-energy side
    assert f(2.0) > f(-2.0)


def test_asymmetric_shape_convolution_oracle():
    # direct numerical convolution of the pseudo-Voigt with the one-sided exponential
    w, m, a = 1.0, 0.6, 0.3
    tau = a * w
    for x in (-1.5, 0.0, 0.4, 2.5):
        ref = quad(lambda s: float(pseudo_voigt(np.array([x - s]), w, m)[0]) * np.exp(-s / tau) / tau,
                   0, np.inf, limit=400, epsabs=1e-13)[0]
        assert float(asymmetric_pseudo_voigt(np.array([x]), w, m, a)[0]) == pytest.approx(ref, rel=1e-7)


def test_zero_asymmetry_is_symmetric_shape():
    x = np.linspace(-4, 4, 81)
    np.testing.assert_array_equal(asymmetric_pseudo_voigt(x, 1.1, 0.7, 0.0), pseudo_voigt(x, 1.1, 0.7))
    np.testing.assert_array_equal(asymmetric_pseudo_voigt(x, 1.1, 0.7, 1e-12), pseudo_voigt(x, 1.1, 0.7))


def test_doublet_constraints():
    c = DoubletComponent("NbO", 203.8, 10.0, width=1.0)
    assert c.position_3_2 - c.position_5_2 == 2.75
    assert c.area_5_2 / c.area_3_2 == pytest.approx(1.5, rel=1e-15)
    total = _area(lambda x: float(model_doublet(c, np.array([x + 205.0]))[0]))
    assert total == pytest.approx(10.0, rel=1e-8)
    with pytest.raises(ValidationError):
        DoubletComponent("Nb2O5", 207.5, 1.0, asymmetry=0.1)
    with pytest.raises(ValidationError):
        DoubletComponent("NbN", 207.5, 1.0)


def test_composition_sums_to_100():
    rep = composition({"Nb2O5": 3.0, "NbO": 1.0, "Nb-metal": 1.0})
    assert rep.fractions == pytest.approx({"Nb2O5": 60.0, "NbO": 20.0, "Nb-metal": 20.0})
    assert sum(rep.fractions.values()) == pytest.approx(100.0, abs=1e-12)
    with pytest.raises(ValidationError):
        composition({"Nb2O5": 0.0})


def _spectrum(fractions, noise=None, seed=0, shift=0.0):
    comps = [dict(species=s, position_5_2=REFS[s] + shift, area_total=1000 * f,
                  width={"Nb2O5": 1.4, "NbO": 1.1, "Nb-metal": 0.7}[s],
                  asymmetry=0.1 if s == "Nb-metal" else 0.0)
             for s, f in fractions.items()]
    spec = SynthSpec("xps", {"components": comps, "background": {"offset": 20.0, "slope": 0.5}},
                     {"start": 198, "stop": 214, "num": 321}, noise or {}, seed)
    return generate_synthetic(spec)[0]


def test_noise_free_three_species():
    truth = {"Nb2O5": 0.6, "NbO": 0.3, "Nb-metal": 0.1}
    fit = fit_nb3d(_spectrum(truth))
    for s, f in truth.items():
        assert fit.composition.fractions[s] == pytest.approx(100 * f, abs=1e-4)
    for c in fit.components:
        assert c.position_3_2 - c.position_5_2 == 2.75
        assert c.area_5_2 / c.area_3_2 == pytest.approx(1.5, rel=1e-15)


def test_charging_shift_is_reported():
    fit = fit_nb3d(_spectrum({"Nb2O5": 0.7, "NbO": 0.3}, shift=1.2), species=("Nb2O5", "NbO"))
    assert fit.shift == pytest.approx(-1.2, abs=1e-6)
    assert fit.aligned()[0].position_5_2 == pytest.approx(207.5, abs=1e-6)


def test_scale_invariance_and_order():
    sp = _spectrum({"Nb2O5": 0.5, "NbO": 0.5}, {"snr_db": 40}, 1)
    a = fit_nb3d(sp, species=("Nb2O5", "NbO"))
    b = fit_nb3d(Spectrum(sp.binding_energy[::-1], 1e4 * sp.counts[::-1]), species=("Nb2O5", "NbO"))
    for s in ("Nb2O5", "NbO"):
        assert a.composition.fractions[s] == pytest.approx(b.composition.fractions[s], abs=1e-6)


def test_shirley_background_option():
    fit = fit_nb3d(_spectrum({"Nb2O5": 0.6, "NbO": 0.3, "Nb-metal": 0.1}), background="shirley")
    assert fit.background["model"] == "shirley"
    assert sum(fit.composition.fractions.values()) == pytest.approx(100.0)


def test_window_too_narrow():
    e = np.linspace(205, 207, 100)
    with pytest.raises(WindowTooNarrowError):
        fit_nb3d(Spectrum(e, np.ones_like(e)))
    e = np.linspace(198, 214, 20)
    with pytest.raises(WindowTooNarrowError):
        fit_nb3d(Spectrum(e, np.ones_like(e)))
