"""Nb 3d core-level deconvolution into constrained spin-orbit doublets.

Each species contributes a 3d5/2 line at ``position_5_2`` and a 3d3/2 line
exactly ``splitting`` eV higher, with areas fixed at 3:2 by construction
(the 3d5/2 line carries 3/5 of ``area_total``). Oxide lines are symmetric
pseudo-Voigts; the metal line is the same profile convolved with a one-sided
exponential tail toward higher binding energy.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special

from . import kernels
from .config import get_defaults
from .errors import FitError, ValidationError, WindowTooNarrowError
from .fitting.engine import FitProblem, solve_least_squares
from .traces import Spectrum

SPECIES = ("Nb2O5", "NbO2", "NbO", "NbOx", "Nb-metal")
METAL = "Nb-metal"
MIN_POINTS = 50
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
# 3d5/2 : 3d3/2 = (2j+1) = 6 : 4
FRAC_5_2 = 3.0 / 5.0
FRAC_3_2 = 2.0 / 5.0
# tails shorter than this fraction of the FWHM are indistinguishable from none
MIN_ASYMMETRY = 1e-8
# per-peak FWHM seeds (eV) tried by the heuristic start
START_WIDTHS = (0.7, 1.2, 1.8)
# grid step (eV) of the rigid charging-shift scan used to seed the anchor
SHIFT_STEP = 0.1


def gaussian(x, width):
    s = width * FWHM_TO_SIGMA
    return np.exp(-0.5 * (x / s) ** 2) / (s * np.sqrt(2.0 * np.pi))


def lorentzian(x, width):
    g = 0.5 * width
    return g / (np.pi * (x * x + g * g))


def pseudo_voigt(x, width, mixing):
    """Unit-area pseudo-Voigt; ``mixing`` is the Gaussian fraction."""
    return mixing * gaussian(x, width) + (1.0 - mixing) * lorentzian(x, width)


def _exp_gaussian(x, width, tau):
    s = width * FWHM_TO_SIGMA
    z = (s / tau - x / s) / np.sqrt(2.0)
    out = np.empty_like(x)
    pos = z >= 0
    # erfcx form avoids overflow of exp() on the peak side
    out[pos] = np.exp(-0.5 * (x[pos] / s) ** 2) * special.erfcx(z[pos])
    xn = x[~pos]
    out[~pos] = np.exp(0.5 * (s / tau) ** 2 - xn / tau) * special.erfc(z[~pos])
    return out / (2.0 * tau)


def _exp_lorentzian(x, width, tau):
    # (L * h)(x) = Im[-exp(a) E1(a) / tau] / pi with a = (i gamma - x) / tau
    a = (-x + 0.5j * width) / tau
    return np.imag(-kernels.expe1(a) / tau) / np.pi


def asymmetric_pseudo_voigt(x, width, mixing, asymmetry):
    """Pseudo-Voigt convolved with ``exp(-s / tau) / tau`` (s >= 0), ``tau = asymmetry * width``.

    The tail extends toward positive ``x`` (higher binding energy). Zero
    asymmetry returns :func:`pseudo_voigt` exactly; so does any asymmetry
    below ``MIN_ASYMMETRY``, where the tail is narrower than rounding.
    Area stays one.
    """
    x = np.asarray(x, dtype=float)
    if asymmetry < MIN_ASYMMETRY:
        return pseudo_voigt(x, width, mixing)
    tau = asymmetry * width
    return mixing * _exp_gaussian(x, width, tau) + (1.0 - mixing) * _exp_lorentzian(x, width, tau)


@dataclass(frozen=True)
class DoubletComponent:
    species: str
    position_5_2: float
    area_total: float
    width: float = 1.2
    mixing: float = field(default_factory=lambda: get_defaults().xps_mixing)
    asymmetry: float = 0.0
    splitting: float = field(default_factory=lambda: get_defaults().xps_splitting_ev)

    def __post_init__(self):
        if self.species not in SPECIES:
            raise ValidationError(f"unknown species {self.species!r}; expected one of {SPECIES}")
        if not np.isfinite(self.position_5_2):
            raise ValidationError("position must be finite")
        if not self.area_total >= 0:
            raise ValidationError("area_total must be >= 0")
        if not self.width > 0:
            raise ValidationError("width must be > 0")
        if not 0.0 <= self.mixing <= 1.0:
            raise ValidationError("mixing must lie in [0, 1]")
        if not self.asymmetry >= 0:
            raise ValidationError("asymmetry must be >= 0")
        if self.species != METAL and self.asymmetry != 0:
            raise ValidationError(f"oxide species {self.species} must have zero asymmetry")
        if not self.splitting > 0:
            raise ValidationError("splitting must be > 0")

    @property
    def position_3_2(self):
        return self.position_5_2 + self.splitting

    @property
    def area_5_2(self):
        return FRAC_5_2 * self.area_total

    @property
    def area_3_2(self):
        return FRAC_3_2 * self.area_total

    def line(self, energy, which="5/2"):
        e = np.asarray(energy, dtype=float)
        if which == "5/2":
            x, a = e - self.position_5_2, self.area_5_2
        elif which == "3/2":
            x, a = e - self.position_3_2, self.area_3_2
        else:
            raise ValueError(which)
        return a * asymmetric_pseudo_voigt(x, self.width, self.mixing, self.asymmetry)

    def as_dict(self):
        return {"species": self.species, "position_5_2": self.position_5_2,
                "position_3_2": self.position_3_2, "area_total": self.area_total,
                "area_5_2": self.area_5_2, "area_3_2": self.area_3_2,
                "width": self.width, "mixing": self.mixing,
                "asymmetry": self.asymmetry, "splitting": self.splitting}


def model_doublet(c, energy):
    """Counts from one doublet on ``energy`` (eV)."""
    return c.line(energy, "5/2") + c.line(energy, "3/2")


def linear_background(energy, offset=0.0, slope=0.0, e_ref=None):
    """``offset + slope * (E - e_ref)``; ``e_ref`` defaults to the window midpoint."""
    e = np.asarray(energy, dtype=float)
    if e_ref is None:
        e_ref = 0.5 * (e.min() + e.max())
    return offset + slope * (e - e_ref)


def model_spectrum(components, energy, offset=0.0, slope=0.0, e_ref=None):
    y = linear_background(energy, offset, slope, e_ref)
    for c in components:
        y = y + model_doublet(c, energy)
    return y


@dataclass
class CompositionReport:
    fractions: dict
    background: dict = field(default_factory=dict)

    def as_dict(self):
        return {"fractions_percent": dict(self.fractions), "background": dict(self.background)}


def composition(components, background=None):
    """Area fractions (%) per species.

    Accepts doublet components or a ``{species: area}`` mapping. Several
    components of one species are summed.
    """
    if isinstance(components, dict):
        items = list(components.items())
    else:
        items = [(c.species, c.area_total) for c in components]
    if not items:
        raise ValidationError("composition needs at least one component")
    areas = {}
    for sp, a in items:
        a = float(a)
        if not a >= 0:
            raise ValidationError(f"area for {sp} must be >= 0")
        areas[sp] = areas.get(sp, 0.0) + a
    total = sum(areas.values())
    if not total > 0:
        raise ValidationError("all component areas are zero")
    return CompositionReport({sp: 100.0 * a / total for sp, a in areas.items()},
                             dict(background or {}))


@dataclass
class XpsFit:
    components: list
    background: dict
    fit: object
    shift: float
    composition: CompositionReport

    def aligned(self):
        """Components with positions moved by the alignment shift."""
        return [replace(c, position_5_2=c.position_5_2 + self.shift) for c in self.components]


def _check_window(e, refs, splitting, species):
    lo = min(refs[s] for s in species)
    hi = max(refs[s] for s in species) + splitting
    if e.size < MIN_POINTS:
        raise WindowTooNarrowError(f"spectrum has {e.size} points; need at least {MIN_POINTS}")
    if e[0] > lo or e[-1] < hi:
        raise WindowTooNarrowError(
            f"spectrum covers {e[0]:.2f}-{e[-1]:.2f} eV but the fit needs at least "
            f"{lo:.2f}-{hi:.2f} eV")
    inside = np.count_nonzero((e >= lo) & (e <= hi))
    if inside < MIN_POINTS // 2:
        raise WindowTooNarrowError("too few samples between the outermost reference lines")


def fit_nb3d(spectrum, species=("Nb2O5", "NbO", "Nb-metal"), background="linear",
             references=None, width_bounds=(0.5, 3.0), anchor="Nb2O5",
             anchor_window=2.0, fit_mixing=False, mixing=None, seed_policy="heuristic",
             tolerance=None, max_iterations=None):
    """Fit constrained Nb 3d doublets plus background to a spectrum.

    Parameters
    ----------
    spectrum : Spectrum
    species : sequence of str
        Species to include; each appears once.
    background : {"linear", "shirley"}
        Linear offset+slope fitted jointly, or a Shirley background computed
        from the data and subtracted before fitting.
    references : mapping, optional
        3d5/2 reference energies; defaults to the configured table.
    anchor : str or None
        Species whose position floats within ``anchor_window`` eV of its
        reference; the others keep their reference offset from it, each free
        within the configured position window. The returned ``shift`` moves
        the anchor onto its reference.
    fit_mixing : bool
        Fit a Gaussian fraction per species. By default the line-shape family
        is fixed at ``mixing`` (configured default when ``None``); freeing it
        trades Lorentzian tail area against the background and loosens the
        area fractions considerably.
    seed_policy : "heuristic" or mapping
        Mapping of parameter name (e.g. ``"area:NbO"``, ``"width:Nb2O5"``)
        to a starting value overriding the heuristic. Areas and background
        terms are in counts, as in the returned components.

    Returns
    -------
    XpsFit
    """
    d = get_defaults()
    refs = dict(d.xps_references_ev)
    if references:
        refs.update(references)
    species = tuple(species)
    if not species:
        raise ValidationError("species set must be non-empty")
    if len(set(species)) != len(species):
        raise ValidationError("species listed twice")
    for s in species:
        if s not in SPECIES:
            raise ValidationError(f"unknown species {s!r}")
        if s not in refs:
            raise ValidationError(f"no reference energy for {s}")
    if background not in ("linear", "shirley"):
        raise ValidationError(f"unknown background model {background!r}")
    if anchor is not None and anchor not in species:
        anchor = None
    if not isinstance(spectrum, Spectrum):
        raise ValidationError("fit_nb3d expects a Spectrum")
    sp = spectrum.ascending()
    e = sp.binding_energy
    split = d.xps_splitting_ev
    _check_window(e, refs, split, species)
    scale = float(np.max(np.abs(sp.counts)))
    if not scale > 0:
        raise ValidationError("spectrum counts are all zero")
    y = sp.counts / scale
    e_ref = 0.5 * (e[0] + e[-1])
    if background == "shirley":
        bg_fixed = kernels.shirley(e, y)
        target = y - bg_fixed
    else:
        bg_fixed = None
        target = y

    win = d.xps_position_window_ev
    w_lo, w_hi = width_bounds
    k = len(species)
    i_metal = species.index(METAL) if METAL in species else None
    i_anchor = species.index(anchor) if anchor is not None else None
    mix_fixed = d.xps_mixing if mixing is None else float(mixing)
    if not 0.0 <= mix_fixed <= 1.0:
        raise ValidationError("mixing must lie in [0, 1]")
    n_mix = k if fit_mixing else 0
    j_asym = 3 * k + n_mix

    # parameter layout: [positions(k), areas(k), widths(k), (mixings(k)), (asym), (b0, b1)]
    def unpack(p):
        pos = np.array(p[:k])
        if i_anchor is not None:
            base = pos[i_anchor]
            pos = np.array([base if i == i_anchor else
                            base + refs[s] - refs[anchor] + pos[i]
                            for i, s in enumerate(species)])
        areas, widths = p[k:2 * k], p[2 * k:3 * k]
        mix = p[3 * k:4 * k] if fit_mixing else np.full(k, mix_fixed)
        j = j_asym
        asym = 0.0
        if i_metal is not None:
            asym = p[j]
            j += 1
        b = (p[j], p[j + 1]) if background == "linear" else (0.0, 0.0)
        return pos, areas, widths, mix, asym, b

    def build(p):
        pos, areas, widths, mix, asym, b = unpack(p)
        return [DoubletComponent(s, float(pos[i]), float(max(areas[i], 0.0)), float(widths[i]),
                                 float(min(max(mix[i], 0.0), 1.0)),
                                 float(asym) if i == i_metal else 0.0, split)
                for i, s in enumerate(species)], b

    def shapes(i, pos, width, asym):
        # unit-area doublet, Gaussian and Lorentzian parts separately
        g = np.zeros_like(e)
        lor = np.zeros_like(e)
        for frac, centre in ((FRAC_5_2, pos), (FRAC_3_2, pos + split)):
            x = e - centre
            if i == i_metal and asym >= MIN_ASYMMETRY:
                tau = asym * width
                g += frac * _exp_gaussian(x, width, tau)
                lor += frac * _exp_lorentzian(x, width, tau)
            else:
                g += frac * gaussian(x, width)
                lor += frac * lorentzian(x, width)
        return g, lor

    def residual(p):
        pos, areas, widths, mix, asym, b = unpack(p)
        out = linear_background(e, b[0], b[1], e_ref) - target
        for i in range(k):
            g, lor = shapes(i, pos[i], widths[i], asym)
            out += areas[i] * (mix[i] * g + (1.0 - mix[i]) * lor)
        return out

    def jacobian(p):
        pos, areas, widths, mix, asym, b = unpack(p)
        J = np.zeros((e.size, len(p)))
        for i in range(k):
            a_i, m_i = areas[i], mix[i]

            def prof(q, i=i):
                g, lor = shapes(i, q[0], q[1], q[2])
                return a_i * (m_i * g + (1.0 - m_i) * lor)

            q0 = [pos[i], widths[i], asym if i == i_metal else 0.0]
            steps = [1e-5, 1e-6 * widths[i], 1e-6]
            g, lor = shapes(i, *q0)
            J[:, k + i] = m_i * g + (1.0 - m_i) * lor
            if fit_mixing:
                J[:, 3 * k + i] = a_i * (g - lor)
            derivs = []
            for n in range(3 if i == i_metal else 2):
                hi = list(q0)
                lo = list(q0)
                hi[n] += steps[n]
                if n == 2 and q0[2] - steps[2] < MIN_ASYMMETRY:
                    derivs.append((prof(hi) - a_i * J[:, k + i]) / steps[n])
                    continue
                lo[n] -= steps[n]
                derivs.append((prof(hi) - prof(lo)) / (2.0 * steps[n]))
            J[:, 2 * k + i] = derivs[1]
            if i == i_metal:
                J[:, j_asym] = derivs[2]
            if i_anchor is None or i == i_anchor:
                J[:, i] += derivs[0]
            else:
                J[:, i] = derivs[0]
                J[:, i_anchor] += derivs[0]
        if background == "linear":
            j = j_asym + (1 if i_metal is not None else 0)
            J[:, j] = 1.0
            J[:, j + 1] = e - e_ref
        return J

    lower, upper, names = [], [], []
    for i, s in enumerate(species):
        if i_anchor is not None and i == i_anchor:
            lower.append(refs[s] - anchor_window)
            upper.append(refs[s] + anchor_window)
        elif i_anchor is not None:
            lower.append(-win)
            upper.append(win)
        else:
            lower.append(refs[s] - win)
            upper.append(refs[s] + win)
        names.append(f"position:{s}" if (i_anchor is None or i == i_anchor) else f"offset:{s}")
    lower += [0.0] * k + [w_lo] * k + [0.0] * n_mix
    upper += [np.inf] * k + [w_hi] * k + [1.0] * n_mix
    names += [f"area:{s}" for s in species] + [f"width:{s}" for s in species]
    names += [f"mixing:{s}" for s in species[:n_mix]]
    if i_metal is not None:
        lower.append(0.0)
        upper.append(2.0)
        names.append("asymmetry:Nb-metal")
    if background == "linear":
        lower += [-np.inf, -np.inf]
        upper += [np.inf, np.inf]
        names += ["background:offset", "background:slope"]
    pos0 = [0.0 if (i_anchor is not None and i != i_anchor) else refs[s]
            for i, s in enumerate(species)]

    def linear_start(width, shift):
        # reference positions moved by ``shift``, areas by non-negative linear solve
        cols = [model_doublet(DoubletComponent(s, refs[s] + shift, 1.0, width, mix_fixed,
                                               0.1 if i == i_metal else 0.0, split), e)
                for i, s in enumerate(species)]
        if background == "linear":
            # signed slope as two non-negative columns
            cols += [np.ones_like(e), e - e_ref, -(e - e_ref)]
        return optimize.nnls(np.column_stack(cols), target)

    shifts = [0.0]
    if i_anchor is not None:
        # a charging shift moves every line together; pick the best rigid
        # shift on a coarse grid so the solve starts in the right basin
        grid = np.arange(-anchor_window, anchor_window + 1e-9, SHIFT_STEP)
        rnorm = [linear_start(min(max(START_WIDTHS[1], w_lo), w_hi), sh)[1] for sh in grid]
        best = float(grid[int(np.argmin(rnorm))])
        # the unshifted start is kept as well; it wins when species move independently
        shifts = [best, 0.0] if abs(best) > 1e-9 else [0.0]

    def heuristic_start(width, shift=0.0):
        w0 = min(max(width, w_lo), w_hi)
        coef = linear_start(w0, shift)[0]
        areas0 = coef[:k]
        areas0 = np.maximum(areas0, 1e-3 * max(float(np.sum(areas0)), 1e-12))
        start_pos = list(pos0)
        if i_anchor is not None:
            start_pos[i_anchor] = refs[anchor] + shift
        guess = start_pos + list(areas0) + [w0] * k + [0.5] * n_mix
        if i_metal is not None:
            guess.append(0.1)
        if background == "linear":
            guess += [coef[k], coef[k + 1] - coef[k + 2]]
        return guess

    if isinstance(seed_policy, dict):
        unknown = set(seed_policy) - set(names)
        if unknown:
            raise ValidationError(f"seed policy names unknown parameters {sorted(unknown)}")
        guess = heuristic_start(START_WIDTHS[1], shifts[0])
        for j, name in enumerate(names):
            if name in seed_policy:
                v = float(seed_policy[name])
                scaled = name.startswith(("area:", "background:"))
                guess[j] = v / scale if scaled else v
        starts = [guess]
    elif seed_policy in (None, "heuristic"):
        # overlapping doublets have competing minima; a few deterministic
        # width seeds are enough to land in the right basin
        starts = [heuristic_start(w, sh) for sh in shifts for w in START_WIDTHS]
    else:
        raise ValidationError(f"unknown seed policy {seed_policy!r}")
    res = None
    for guess in starts:
        problem = FitProblem(
            residual, guess, lower=lower, upper=upper, jacobian=jacobian,
            max_iterations=max_iterations or d.fit_max_iterations,
            tolerance=tolerance or d.fit_tolerance, param_names=tuple(names),
        )
        trial = solve_least_squares(problem)
        if trial.status.startswith("singular"):
            continue
        if res is None or trial.history[-1] < res.history[-1]:
            res = trial
    if res is None:
        raise FitError("XPS fit failed from every start: damping could not restore descent")
    comps, b = build(res.parameters)
    comps = [replace(c, area_total=c.area_total * scale) for c in comps]
    if background == "linear":
        bg = {"model": "linear", "offset": float(b[0]) * scale, "slope": float(b[1]) * scale,
              "e_ref": float(e_ref)}
    else:
        bg = {"model": "shirley", "low_end": float(bg_fixed[0]) * scale,
              "high_end": float(bg_fixed[-1]) * scale}
    shift = 0.0
    if i_anchor is not None:
        shift = refs[anchor] - comps[i_anchor].position_5_2
    res.info.update(model="xps", scale=scale, converged_status=res.status)
    return XpsFit(comps, bg, res, float(shift), composition(comps, bg))
