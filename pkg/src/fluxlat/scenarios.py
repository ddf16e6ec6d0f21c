"""Scenario runners: each maps a validated config to a SweepResult and a summary."""

from __future__ import annotations

import math
from dataclasses import replace
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .circuit import ElementParams, build_element, tune_to_frequency
from .composite import CompositeSpec, diagonalize
from .config import coupler_type, element_params, grid, representative
from .dynamics import parasitic_gate_error
from .errors import FluxlatError, ValidationError
from .leakage import DEFAULT_SOURCES, czz_resonance_margin, leakage_map
from .metrics import (
    coupler_pair_labels,
    hybridization,
    hybridization_detail,
    hybridization_error,
    hybridization_nnn_detail,
    zz_cc,
    zz_cs_cqcq,
    zz_cs_cqcqc,
    zz_qq,
)
from .perturbation import analytic_inputs, zz_cs_analytic
from .pulseopt import spectator_sweep
from .sweep import SweepResult, parallel_map

CQCQ_KEEP = {"fluxonium": 10, "transmon": 5, "oscillator": 3}
MAGNITUDE_FACTOR = 2.0
RESONANCE_MARGIN = 0.2  # GHz
EXTREMUM_FRACTION = 0.1


@lru_cache(maxsize=256)
def _spectrum(params: ElementParams):
    return build_element(params)


def detuned_pair(params: ElementParams, df: float) -> Tuple[ElementParams, ElementParams]:
    """Two copies with EJ -/+ dEJ so that f01(first) - f01(second) = df."""
    if df == 0:
        return params, params
    ej = params.EJ

    def gap(d):
        a = _spectrum(replace(params, EJ=ej - d)).frequencies[1]
        b = _spectrum(replace(params, EJ=ej + d)).frequencies[1]
        return a - b - df

    d = brentq(gap, -0.3 * ej, 0.3 * ej, xtol=1e-13, rtol=1e-13)
    return replace(params, EJ=ej - d), replace(params, EJ=ej + d)


def tuned_coupler(params: ElementParams, f01: float) -> ElementParams:
    """Coupler with EJ set for the requested f01 (tuned on two levels to allow a wide bracket)."""
    tuned = tune_to_frequency(replace(params, keep_levels=2), f01, "EJ", bracket=(1e-3, 400.0))
    return replace(tuned, keep_levels=params.keep_levels)


def _cqcq_params(p, keep=CQCQ_KEEP):
    out = {}
    for key, default in (("c_alpha", "C0_U"), ("q1", "Q_A"), ("c_beta", "C0_L"), ("q2", "Q_B")):
        spec = p.get(key, default)
        ep = element_params(spec)
        if isinstance(spec, str) or "keep_levels" not in spec:
            ep = replace(ep, keep_levels=keep[ep.kind])
        out[key] = ep
    couplings = representative()["couplings"]
    ta, tb = coupler_type(p.get("c_alpha", "C0_U")), coupler_type(p.get("c_beta", "C0_L"))
    out["type_alpha"] = int(ta[1])
    out["g1"] = p.get("g1_ghz", couplings[ta]["g_qc_ghz"])
    out["g2"] = p.get("g2_ghz", couplings[tb]["g_qc_ghz"])
    out["g3"] = p.get("g3_ghz", couplings[tb]["g_qc_ghz"])
    out["gff"] = p.get("g_ff_ghz", couplings[tb]["g_ff_ghz"])
    out["sign"] = p.get("connection_sign", 1)
    if "oscillator" in p:
        osc = element_params(p["oscillator"]["element"])
        out["osc"] = osc
        out["g_o"] = p["oscillator"]["g_o_ghz"]
    return out


def cqcq_spec(c_alpha, q1, c_beta, q2, g, g1, g2, g3, gff, sign=1, oscillator=None, g_o=0.0):
    """C_alpha, Q1, C_beta, Q2 [, O] with O coupled to both couplers."""
    elements = [_spectrum(c_alpha), _spectrum(q1), _spectrum(c_beta), _spectrum(q2)]
    couplings = [(0, 1, g1), (1, 2, sign * g2), (2, 3, g3), (0, 2, g), (1, 3, gff)]
    if oscillator is not None:
        elements.append(_spectrum(oscillator))
        couplings += [(0, 4, g_o), (2, 4, sign * g_o)]
    return CompositeSpec(elements, couplings, name="CQCQ")


def cqcq_zeta(c, g, c_beta=None) -> Tuple[float, float, dict]:
    """Numeric and analytic coupler-spectator ZZ for one CQCQ parameter point."""
    cb = c["c_beta"] if c_beta is None else c_beta
    osc = c.get("osc")
    spec = cqcq_spec(c["c_alpha"], c["q1"], cb, c["q2"], g, c["g1"], c["g2"], c["g3"], c["gff"],
                     c["sign"], osc, c.get("g_o", 0.0))
    numeric = zz_cs_cqcq(diagonalize(spec), c["type_alpha"], chain=(0, 1, 2, 3))
    inp = analytic_inputs(
        _spectrum(c["c_alpha"]), _spectrum(c["q1"]), _spectrum(cb), _spectrum(c["q2"]),
        c["type_alpha"], g, c["g1"], c["g2"], c["g3"], c["sign"],
        oscillator=_spectrum(osc) if osc is not None else None, g_O=c.get("g_o", 0.0),
    )
    return numeric, zz_cs_analytic(inp), inp


def bracket_root(inp) -> float:
    """Coupler-coupler coupling g at which the closed form vanishes."""
    from .perturbation import path_bracket

    return inp.g - path_bracket(inp)


def compare_analytic_numeric(g, numeric, analytic, denominators, g_root, coupler_type_alpha):
    """Sign, extremum-location and factor-of-two magnitude agreement on a g grid."""
    g = np.asarray(g, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    analytic = np.asarray(analytic, dtype=float)
    span = float(g.max() - g.min())
    sign_ok = np.sign(numeric) == np.sign(analytic)
    i_num = int(np.nanargmin(np.abs(numeric)))
    i_an = int(np.nanargmin(np.abs(analytic)))
    extremum_shift = abs(g[i_num] - g[i_an])
    # the closed-form denominators do not depend on g, so either every point is checked or none
    far = min(abs(v) for v in denominators.values()) >= RESONANCE_MARGIN
    checked = np.full(g.shape, far)
    ratio = np.divide(analytic, numeric, out=np.full(g.shape, np.nan), where=numeric != 0)
    mag_ok = (ratio >= 1 / MAGNITUDE_FACTOR) & (ratio <= MAGNITUDE_FACTOR)
    return {
        "sign_agree_all": bool(np.all(sign_ok)),
        "sign_disagree_g_ghz": [float(v) for v in g[~sign_ok]],
        "extremum_numeric_g_ghz": float(g[i_num]),
        "extremum_analytic_g_ghz": float(g[i_an]),
        "extremum_shift_ghz": float(extremum_shift),
        "extremum_tolerance_ghz": EXTREMUM_FRACTION * span,
        "extremum_ok": bool(extremum_shift <= EXTREMUM_FRACTION * span) if coupler_type_alpha == 0 else None,
        "bracket_root_g_ghz": float(g_root),
        "magnitude_points_checked": int(np.sum(checked)),
        "magnitude_ok_all": bool(np.all(mag_ok[checked])),
        "magnitude_fail_g_ghz": [float(v) for v in g[checked & ~mag_ok]],
        "sign_ok": sign_ok,
        "ratio": ratio,
    }


def _points(fn, pts, threads):
    out = parallel_map(fn, pts, threads)
    failures = [(pt, r) for pt, r in zip(pts, out) if isinstance(r, Exception)]
    for _, r in failures:
        if not isinstance(r, FluxlatError) and not isinstance(r, (ArithmeticError, ValueError)):
            raise r
    return out, failures


def _failure_records(failures, names):
    return [dict(zip(names, map(float, np.atleast_1d(pt))), error=f"{type(r).__name__}: {r}") for pt, r in failures]


def run_ftf_sweep(p, threads=None):
    qubit = element_params(p.get("qubit", "Q_A"))
    coupler = element_params(p.get("coupler", "C0_L"))
    g_qc = p.get("g_qc_ghz", representative()["couplings"]["C0"]["g_qc_ghz"])
    gffs, dfs = grid(p["g_ff_ghz"]), grid(p["df_qq_ghz"])
    pairs = {float(df): detuned_pair(qubit, float(df)) for df in dfs}
    pts = [(float(gf), float(df)) for gf in gffs for df in dfs]
    degenerate = []

    def one(pt):
        gf, df = pt
        qa, qb = pairs[df]
        spec = CompositeSpec([_spectrum(qa), _spectrum(coupler), _spectrum(qb)],
                             [(0, 1, g_qc), (1, 2, g_qc), (0, 2, gf)], name="FTF")
        d = diagonalize(spec)
        hyb = hybridization_detail(d, (1, 0, 0), (0, 0, 1))
        if hyb.degenerate:
            degenerate.append({"g_ff_ghz": gf, "df_qq_ghz": df})
        try:
            zeta = zz_qq(d, 0, 2)
        except FluxlatError:
            zeta = math.nan
        return hyb.value, zeta

    out, failures = _points(one, pts, threads)
    shape = (len(gffs), len(dfs))
    vals = {"d_hybridization": np.full(len(pts), np.nan), "zeta_qq_ghz": np.full(len(pts), np.nan)}
    for i, r in enumerate(out):
        if not isinstance(r, Exception):
            vals["d_hybridization"][i], vals["zeta_qq_ghz"][i] = r
    res = SweepResult({"g_ff_ghz": gffs, "df_qq_ghz": dfs}, {k: v.reshape(shape) for k, v in vals.items()},
                      {"failures": _failure_records(failures, ("g_ff_ghz", "df_qq_ghz")),
                       "degenerate_points": sorted(degenerate, key=lambda r: (r["g_ff_ghz"], r["df_qq_ghz"]))})
    return res, {}


def run_nnn_sweep(p, threads=None):
    couplings = representative()["couplings"]
    left, right = p["couplers"]
    cl, cr = element_params(left), element_params(right)
    tl, tr = coupler_type(left), coupler_type(right)
    qubit = element_params(p.get("qubit", "Q_A"))
    middle = element_params(p.get("middle_qubit", "Q_B"))
    dfs = grid(p["df_qq_ghz"])

    def one(df):
        qa, qb = detuned_pair(qubit, float(df))
        elements = [_spectrum(qa), _spectrum(cl), _spectrum(middle), _spectrum(cr), _spectrum(qb)]
        gl, gr = couplings[tl]["g_qc_ghz"], couplings[tr]["g_qc_ghz"]
        spec = CompositeSpec(elements, [(0, 1, gl), (1, 2, gl), (2, 3, gr), (3, 4, gr),
                                        (0, 2, couplings[tl]["g_ff_ghz"]), (2, 4, couplings[tr]["g_ff_ghz"])],
                             name="QCQCQ")
        d = diagonalize(spec)
        hyb = hybridization_nnn_detail(d, (0, 2, 4))
        try:
            zeta = zz_qq(d, 0, 4)
        except FluxlatError:
            zeta = math.nan
        return hyb.value, zeta, float(hyb.degenerate)

    out, failures = _points(one, list(dfs), threads)
    vals = {k: np.full(len(dfs), np.nan) for k in ("d_nnn", "zeta_qq_ghz", "degenerate")}
    for i, r in enumerate(out):
        if not isinstance(r, Exception):
            vals["d_nnn"][i], vals["zeta_qq_ghz"][i], vals["degenerate"][i] = r
    res = SweepResult({"df_qq_ghz": dfs}, vals,
                      {"configuration": f"{_name(left)}|{_name(right)}",
                       "failures": _failure_records(failures, ("df_qq_ghz",))})
    return res, {}


def _name(spec):
    return spec if isinstance(spec, str) else spec.get("ref", spec.get("type", "custom"))


def run_cqcq_zz(p, threads=None):
    c = _cqcq_params(p)
    g = p["g_ghz"]
    dccs = grid(p["dcc_ghz"])
    f_alpha = _spectrum(c["c_alpha"]).transition(0, 1)

    def one(dcc):
        cb = tuned_coupler(c["c_beta"], f_alpha - float(dcc))
        num, an, _ = cqcq_zeta(c, g, cb)
        return num, an

    out, failures = _points(one, list(dccs), threads)
    vals = {"zeta_cs_numeric_ghz": np.full(len(dccs), np.nan), "zeta_cs_analytic_ghz": np.full(len(dccs), np.nan)}
    for i, r in enumerate(out):
        if not isinstance(r, Exception):
            vals["zeta_cs_numeric_ghz"][i], vals["zeta_cs_analytic_ghz"][i] = r
    res = SweepResult({"dcc_ghz": dccs}, vals,
                      {"g_ghz": g, "failures": _failure_records(failures, ("dcc_ghz",))})
    return res, {}


def analytic_vs_numeric(p, threads=None):
    """Numeric and closed-form zeta_CS over the coupler-coupler coupling grid."""
    c = _cqcq_params(p)
    gs = grid(p["g_ghz"])
    out, failures = _points(lambda g: cqcq_zeta(c, float(g))[:2], list(gs), threads)
    num = np.array([np.nan if isinstance(r, Exception) else r[0] for r in out])
    an = np.array([np.nan if isinstance(r, Exception) else r[1] for r in out])
    inp = analytic_inputs(_spectrum(c["c_alpha"]), _spectrum(c["q1"]), _spectrum(c["c_beta"]),
                          _spectrum(c["q2"]), c["type_alpha"], 0.0, c["g1"], c["g2"], c["g3"], c["sign"],
                          oscillator=_spectrum(c["osc"]) if "osc" in c else None, g_O=c.get("g_o", 0.0))
    cmp = compare_analytic_numeric(gs, num, an, inp.denominators(), bracket_root(inp), c["type_alpha"])
    res = SweepResult(
        {"g_ghz": gs},
        {"zeta_cs_numeric_ghz": num, "zeta_cs_analytic_ghz": an, "ratio": cmp.pop("ratio"),
         "sign_agree": cmp.pop("sign_ok").astype(float)},
        {"denominators_ghz": {k: float(v) for k, v in inp.denominators().items()},
         "failures": _failure_records(failures, ("g_ghz",))},
    )
    return res, cmp


def run_analytic_vs_numeric(p, threads=None):
    return analytic_vs_numeric(p, threads)


def squares_spec(left, middle, right, q1, q2, types, g_cc=0.0, g_adjacent=0.0, oscillator=None, g_o=0.0,
                 extra=()):
    """C-Q-C-Q-C subcircuit of an interconnected square.

    ``g_cc`` couples the opposite (edge) couplers directly and ``g_adjacent``
    couples each edge coupler to the middle one. The optional oscillator
    couples to both edge couplers with g_o; an oscillator above the coupler
    frequencies then adds a negative effective edge-edge coupling. ``extra``
    holds further ``(a, b, g)`` terms on chain positions 0..4 (5 is the
    oscillator); they add to any built-in coupling of the same pair.
    """
    couplings = representative()["couplings"]
    te, tm = types
    ge, gm = couplings[te]["g_qc_ghz"], couplings[tm]["g_qc_ghz"]
    elements = [_spectrum(left), _spectrum(q1), _spectrum(middle), _spectrum(q2), _spectrum(right)]
    pairs = [(0, 1, ge), (1, 2, gm), (2, 3, gm), (3, 4, ge), (1, 3, couplings[tm]["g_ff_ghz"]),
             (0, 4, g_cc), (0, 2, g_adjacent), (2, 4, g_adjacent)]
    if oscillator is not None:
        elements.append(_spectrum(oscillator))
        pairs += [(0, 5, g_o), (4, 5, g_o)]
    for a, b, g in extra:
        if a == b or max(a, b) >= len(elements):
            raise ValidationError(f"extra coupling ({a}, {b}) must join two distinct existing elements")
        pairs.append((a, b, g))
    return CompositeSpec(elements, pairs, name="CQCQC")


SQUARE_METRICS = ("zeta_cs_left_ghz", "zeta_cs_right_ghz", "zeta_cc_ghz", "d_target_target", "d_target_side",
                  "d_side_target")


def squares_metrics(d, x):
    """All six square metrics; a metric whose labels are ambiguous is NaN."""
    chain = (0, 1, 2, 3, 4)
    pad = lambda lab: tuple(lab) + (0,) * (len(d.dims) - 5)
    jobs = {
        "zeta_cs_left_ghz": lambda: zz_cs_cqcqc(d, "left", x, chain),
        "zeta_cs_right_ghz": lambda: zz_cs_cqcqc(d, "right", x, chain),
        "zeta_cc_ghz": lambda: zz_cc(d, x, chain),
    }
    for name, (a, b) in coupler_pair_labels(x).items():
        jobs[f"d_{name}"] = lambda a=a, b=b: hybridization(d, pad(a), pad(b))
    out = {}
    for name in SQUARE_METRICS:
        try:
            out[name] = jobs[name]()
        except FluxlatError:
            out[name] = math.nan
    return out


def run_squares_sweep(p, threads=None):
    edge_spec = p.get("edge_coupler", "C1_U")
    middle_spec = p.get("middle_coupler", "C0_L")
    edge, middle = element_params(edge_spec), element_params(middle_spec)
    types = (coupler_type(edge_spec), coupler_type(middle_spec))
    x = int(types[0][1])
    q1 = element_params(p.get("q1", "Q_A"))
    q2 = element_params(p.get("q2", "Q_B"))
    g_cc = p.get("g_cc_ghz", 0.0)
    g_adj = p.get("g_adjacent_ghz", 0.0)
    extra = [(c["a"], c["b"], c["g_ghz"]) for c in p.get("extra_couplings", [])]
    dccs = grid(p["dcc_ghz"])
    osc = element_params(p["oscillator"]["element"]) if "oscillator" in p else None
    g_o = p["oscillator"]["g_o_ghz"] if osc is not None else 0.0
    with_osc = [0.0, 1.0] if osc is not None else [0.0]
    f_edge = _spectrum(edge).transition(0, 1)
    pts = [(float(dcc), w) for dcc in dccs for w in with_osc]
    right = {float(dcc): tuned_coupler(edge, f_edge - float(dcc)) for dcc in dccs}

    def one(pt):
        dcc, w = pt
        spec = squares_spec(edge, middle, right[dcc], q1, q2, types, g_cc, g_adj, osc if w else None, g_o,
                            [c for c in extra if w or 5 not in c[:2]])
        m = squares_metrics(diagonalize(spec), x)
        return [m[k] for k in SQUARE_METRICS]

    out, failures = _points(one, pts, threads)
    shape = (len(dccs), len(with_osc))
    vals = {k: np.full(len(pts), np.nan) for k in SQUARE_METRICS}
    for i, r in enumerate(out):
        if not isinstance(r, Exception):
            for k, v in zip(SQUARE_METRICS, r):
                vals[k][i] = v
    res = SweepResult({"dcc_ghz": dccs, "with_oscillator": np.array(with_osc)},
                      {k: v.reshape(shape) for k, v in vals.items()},
                      {"failures": _failure_records(failures, ("dcc_ghz", "with_oscillator"))})
    return res, {}


def run_spectator_error(p, threads=None):
    res = spectator_sweep(p.get("gap_ghz", 0.1), list(grid(p["zeta_cs_ghz"])), list(grid(p["tau_ns"])),
                          threads=threads)
    return res, {}


def run_leakage_map(p, threads=None):
    res = leakage_map(p.get("gap_ghz", 0.1), list(grid(p["k"])), list(grid(p["delta_ghz"])),
                      tuple(p.get("sources", DEFAULT_SOURCES)), tau=p.get("tau_ns", 66.0), threads=threads)
    return res, {}


def run_parasitic_drive(p, threads=None):
    ds = grid(p["d"])
    theta = p.get("theta_rad", math.pi / 2)
    tau = p.get("tau_ns", 20.0)
    pts = [(float(D), which) for D in ds for which in ("A", "B")]
    out, failures = _points(lambda pt: parasitic_gate_error(pt[0], pt[1], theta, tau), pts, threads)
    vals = {}
    for which in ("a", "b"):
        for k in ("eps_total", "eps_ph", "eps_leak"):
            vals[f"{k}_{which}"] = np.full(len(ds), np.nan)
    for (D, which), r in zip(pts, out):
        if isinstance(r, Exception):
            continue
        i = int(np.flatnonzero(ds == D)[0])
        for k, v in r.as_dict().items():
            vals[f"{k}_{which.lower()}"][i] = v
    vals["eps_estimate"] = np.array([hybridization_error(D) for D in ds])
    failures = [({"d": pt[0], "which": pt[1]}, r) for pt, r in failures]
    res = SweepResult({"d": ds}, vals, {"theta_rad": theta, "tau_ns": tau,
                                        "failures": [dict(pt, error=str(r)) for pt, r in failures]})
    return res, {}


def run_czz_margin(p, threads=None):
    q = _spectrum(element_params(p.get("qubit", "Q_A")))
    c1u = _spectrum(element_params(p.get("c1u", "C1_U")))
    c0l = element_params(p.get("c0l", "C0_L"))
    if "c0l_f01_ghz" in p:
        targets = grid(p["c0l_f01_ghz"])
    else:
        targets = np.array([_spectrum(c0l).transition(0, 1)])
    rows = {k: np.full(len(targets), np.nan) for k in ("f_c1u_01_ghz", "f_q_03_ghz", "f_q_12_ghz", "margin_ghz")}
    for i, f in enumerate(targets):
        rows["f_c1u_01_ghz"][i] = c1u.transition(0, 1)
        rows["f_q_03_ghz"][i] = q.transition(0, 3)
        rows["f_q_12_ghz"][i] = q.transition(1, 2)
        rows["margin_ghz"][i] = czz_resonance_margin(c1u.transition(0, 1), q.transition(0, 3), float(f),
                                                     q.transition(1, 2))
    zero = None
    m = rows["margin_ghz"]
    if len(m) > 1 and np.any(np.sign(m[:-1]) != np.sign(m[1:])):
        zero = float(q.transition(1, 2) - (c1u.transition(0, 1) - q.transition(0, 3)))
    return SweepResult({"c0l_f01_ghz": targets}, rows, {}), {"resonant_c0l_f01_ghz": zero}


RUNNERS: Dict[str, Callable] = {
    "ftf-sweep": run_ftf_sweep,
    "nnn-sweep": run_nnn_sweep,
    "cqcq-zz": run_cqcq_zz,
    "analytic-vs-numeric": run_analytic_vs_numeric,
    "squares-sweep": run_squares_sweep,
    "spectator-error": run_spectator_error,
    "leakage-map": run_leakage_map,
    "parasitic-drive": run_parasitic_drive,
    "czz-margin": run_czz_margin,
}


def run_scenario(config: dict, threads: Optional[int] = None):
    if config["scenario"] not in RUNNERS:
        raise ValidationError(f"unknown scenario {config['scenario']!r}")
    return RUNNERS[config["scenario"]](config["parameters"], threads)
