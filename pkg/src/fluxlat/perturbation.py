"""Perturbative coupler-spectator ZZ: closed form and virtual-transition diagrams.

Energy denominators always use bare element frequencies; these are terms of
a bare-basis perturbation series, not dressed-state quantities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .circuit import ElementSpectrum
from .composite import CompositeSpec, diagonalize
from .errors import ForbiddenTransition, SingularDenominator, ValidationError

RESONANCE_GUARD = 1e-6  # GHz
FORBIDDEN_TOL = 1e-8

# (Q2 transition p, Q1 transition t) per coupler type of C_alpha
TRANSITIONS = {0: ((1, 2), (0, 3)), 1: ((0, 3), (1, 2))}


@dataclass(frozen=True)
class AnalyticZZInputs:
    """Ingredients of the closed-form coupler-spectator ZZ rate.

    Frequencies in GHz, matrix elements as magnitudes. ``f_p`` and ``n_p``
    belong to the spectator Q2, ``f_t`` and ``n_t`` to the middle qubit Q1.
    ``connection_sign`` multiplies the qubit-mediated term;
    ``oscillator_sign`` multiplies the oscillator term and defaults to
    ``connection_sign``. The oscillator term is dropped when ``f_O`` is None.
    """

    coupler_type: int
    f_alpha: float
    f_beta: float
    f_p: float
    f_t: float
    n_alpha: float
    n_beta: float
    n_p: float
    n_t: float
    g: float
    g1: float
    g2: float
    g3: float
    connection_sign: int = 1
    n_O: float = 0.0
    g_O: float = 0.0
    f_O: Optional[float] = None
    oscillator_sign: Optional[int] = None

    def __post_init__(self):
        if self.coupler_type not in (0, 1):
            raise ValidationError(f"coupler_type must be 0 or 1, got {self.coupler_type}")
        if self.connection_sign not in (1, -1):
            raise ValidationError("connection_sign must be +1 or -1")
        if self.oscillator_sign not in (None, 1, -1):
            raise ValidationError("oscillator_sign must be +1, -1 or None")
        freqs = [self.f_alpha, self.f_beta, self.f_p, self.f_t]
        if self.f_O is not None:
            freqs.append(self.f_O)
        if any(not f > 0 for f in freqs):
            raise ValidationError(f"all frequencies must be positive, got {freqs}")

    def denominators(self):
        out = {
            "C_alpha - Q2": self.f_alpha - self.f_p,
            "C_alpha - C_beta": self.f_alpha - self.f_beta,
            "C_alpha - Q1": self.f_alpha - self.f_t,
        }
        if self.f_O is not None:
            out["C_alpha - O"] = self.f_alpha - self.f_O
        return out


def _guard(denoms):
    for pair, value in denoms.items():
        if abs(value) <= RESONANCE_GUARD:
            raise SingularDenominator(f"denominator {pair} = {value:.3e} GHz is within the resonance guard")


def path_bracket(inp: AnalyticZZInputs) -> float:
    """g +- qubit-mediated term +- oscillator term (the coupler-coupler amplitude)."""
    dn = inp.denominators()
    _guard(dn)
    out = inp.g + inp.connection_sign * inp.g1 * inp.g2 * inp.n_t**2 / dn["C_alpha - Q1"]
    if inp.f_O is not None:
        sign = inp.connection_sign if inp.oscillator_sign is None else inp.oscillator_sign
        out += sign * inp.g_O**2 * inp.n_O**2 / dn["C_alpha - O"]
    return out


def zz_cs_analytic(inp: AnalyticZZInputs) -> float:
    """Closed-form coupler-spectator ZZ rate in GHz."""
    dn = inp.denominators()
    _guard(dn)
    spectator = (inp.g3 * inp.n_p * inp.n_beta) ** 2 / dn["C_alpha - Q2"]
    couplers = (inp.n_alpha * inp.n_beta / dn["C_alpha - C_beta"]) ** 2
    return (-1) ** inp.coupler_type * spectator * couplers * path_bracket(inp) ** 2


def analytic_inputs(
    c_alpha: ElementSpectrum,
    q1: ElementSpectrum,
    c_beta: ElementSpectrum,
    q2: ElementSpectrum,
    coupler_type: int,
    g: float,
    g1: float,
    g2: float,
    g3: float,
    connection_sign: int = 1,
    oscillator: Optional[ElementSpectrum] = None,
    g_O: float = 0.0,
    oscillator_sign: Optional[int] = None,
) -> AnalyticZZInputs:
    """Read the transition frequencies and charge matrix elements off element spectra."""
    p, t = TRANSITIONS[coupler_type]
    kw = {}
    if oscillator is not None:
        kw = dict(f_O=oscillator.transition(0, 1), n_O=abs(oscillator.n(0, 1)), g_O=g_O,
                  oscillator_sign=oscillator_sign)
    return AnalyticZZInputs(
        coupler_type=coupler_type,
        f_alpha=c_alpha.transition(0, 1),
        f_beta=c_beta.transition(0, 1),
        f_p=q2.transition(*p),
        f_t=q1.transition(*t),
        n_alpha=abs(c_alpha.n(0, 1)),
        n_beta=abs(c_beta.n(0, 1)),
        n_p=abs(q2.n(*p)),
        n_t=abs(q1.n(*t)),
        g=g,
        g1=g1,
        g2=g2,
        g3=g3,
        connection_sign=connection_sign,
        **kw,
    )


Hop = Tuple[int, int, Tuple[int, int], Tuple[int, int], float]


@dataclass(frozen=True)
class DiagramPath:
    """Closed chain of virtual photon transfers starting and ending at ``base_state``.

    Each hop is ``(element_from, element_to, (from_before, from_after),
    (to_before, to_after), g)``: both elements change level at once through
    the coupling g * n_from * n_to.
    """

    hops: Sequence[Hop]
    base_state: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "hops", tuple(self.hops))
        object.__setattr__(self, "base_state", tuple(int(v) for v in self.base_state))
        state = list(self.base_state)
        for k, (ea, eb, (a0, a1), (b0, b1), _) in enumerate(self.hops):
            if ea == eb:
                raise ValidationError(f"hop {k} couples element {ea} to itself")
            if state[ea] != a0 or state[eb] != b0:
                raise ValidationError(
                    f"hop {k} starts from levels ({a0}, {b0}) but the path is at "
                    f"({state[ea]}, {state[eb]}) on elements ({ea}, {eb})"
                )
            state[ea], state[eb] = a1, b1
        if tuple(state) != self.base_state:
            raise ValidationError(f"path ends in {tuple(state)}, not in base state {self.base_state}")

    def states(self):
        """Intermediate states visited after each hop except the last."""
        state = list(self.base_state)
        out = []
        for ea, eb, (_, a1), (_, b1), _ in self.hops[:-1]:
            state[ea], state[eb] = a1, b1
            out.append(tuple(state))
        return out


def eval_diagram(path: DiagramPath, spectra: Sequence[ElementSpectrum]) -> float:
    """Product of hop amplitudes over the product of (E_base - E_intermediate).

    Direction multiplicity is left to the caller.
    """
    energy = lambda s: sum(spectra[i].frequencies[v] for i, v in enumerate(s))
    e_base = energy(path.base_state)
    amp = 1.0 + 0.0j
    for k, (ea, eb, (a0, a1), (b0, b1), g) in enumerate(path.hops):
        na = spectra[ea].n_elems[a1, a0]
        nb = spectra[eb].n_elems[b1, b0]
        for elem, (i, j), n in ((ea, (a0, a1), na), (eb, (b0, b1), nb)):
            if abs(n) < FORBIDDEN_TOL:
                raise ForbiddenTransition(f"hop {k}: <{j}|n|{i}> of element {elem} vanishes ({abs(n):.1e})")
        amp *= g * na * nb
    denom = 1.0
    for state in path.states():
        gap = e_base - energy(state)
        if abs(gap) <= RESONANCE_GUARD:
            raise SingularDenominator(f"intermediate state {state} is resonant with the base state")
        denom *= gap
    return float((amp / denom).real)


def flip_couplings(spec: CompositeSpec, element_index: int, only: Optional[Sequence[int]] = None):
    """Copy of ``spec`` with the couplings touching ``element_index`` negated.

    ``only`` restricts the flip to those positions in ``spec.couplings``.
    """
    out = []
    for k, (a, b, g) in enumerate(spec.couplings):
        touches = element_index in (a, b)
        if touches and (only is None or k in only):
            g = -g
        out.append((a, b, g))
    return spec.with_couplings(out)


def spectra_match(spec_a: CompositeSpec, spec_b: CompositeSpec, tol: float = 1e-9) -> bool:
    fa = diagonalize(spec_a).frequencies
    fb = diagonalize(spec_b).frequencies
    return fa.shape == fb.shape and bool(np.max(np.abs(fa - fb)) < tol)


def sign_transform_check(spec: CompositeSpec, element_index: int, only: Optional[Sequence[int]] = None) -> bool:
    """True when negating the couplings of one element (n -> -n) leaves the spectrum unchanged."""
    if not 0 <= element_index < len(spec.elements):
        raise ValidationError(f"element index {element_index} out of range")
    return spectra_match(spec, flip_couplings(spec, element_index, only))
