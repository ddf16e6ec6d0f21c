"""Single circuit elements: fluxonium, transmon and linear oscillator.

All energies are H/h in GHz. Each builder diagonalizes one element in its own
basis, keeps the lowest ``keep_levels`` states and returns their frequencies
relative to the ground state together with charge and phase matrix elements.

Oscillator-basis elements (fluxonium, oscillator) use the phase convention
|k> -> i^k |k>, in which the charge operator is real. Combined with the
real-positive gauge of each eigenvector this makes every charge matrix
element real at the flux sweet spot, so coupled Hamiltonians stay real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .errors import ConvergenceError, ValidationError

KINDS = ("fluxonium", "transmon", "oscillator")

DEFAULT_BASIS_DIM = {"fluxonium": 120, "transmon": 61}
DEFAULT_KEEP = {"fluxonium": 10, "transmon": 5, "oscillator": 3}

CONVERGENCE_TOL = 1e-8  # GHz
DEGENERACY_TOL = 1e-9  # GHz


@dataclass(frozen=True)
class ElementParams:
    """Parameters of one circuit element.

    ``phi_ext`` defaults to pi (flux sweet spot) for fluxonium and is ignored
    by the other kinds. ``basis_dim`` is the internal basis size before
    truncation; for the transmon it is ``2*n_cut + 1``.
    """

    kind: str
    EC: float
    EJ: float = 0.0
    EL: float = 0.0
    phi_ext: Optional[float] = None
    basis_dim: Optional[int] = None
    keep_levels: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown element kind {self.kind!r}; expected one of {KINDS}")
        if self.phi_ext is None:
            object.__setattr__(self, "phi_ext", math.pi if self.kind == "fluxonium" else 0.0)
        if self.keep_levels is None:
            object.__setattr__(self, "keep_levels", DEFAULT_KEEP[self.kind])
        if self.basis_dim is None:
            default = DEFAULT_BASIS_DIM.get(self.kind, self.keep_levels)
            object.__setattr__(self, "basis_dim", max(default, self.keep_levels))
        self.validate()

    def validate(self):
        if not self.EC > 0:
            raise ValidationError(f"{self.kind}: EC must be positive, got {self.EC}")
        if int(self.keep_levels) != self.keep_levels or int(self.basis_dim) != self.basis_dim:
            raise ValidationError("basis_dim and keep_levels must be integers")
        if not self.basis_dim >= self.keep_levels >= 2:
            raise ValidationError(
                f"{self.kind}: need basis_dim >= keep_levels >= 2, "
                f"got basis_dim={self.basis_dim}, keep_levels={self.keep_levels}"
            )
        if self.kind == "fluxonium":
            if not self.EL > 0:
                raise ValidationError("fluxonium requires EL > 0")
            if self.EJ < 0:
                raise ValidationError("fluxonium requires EJ >= 0")
        elif self.kind == "transmon":
            # EJ = 0 is accepted as the free-rotor limit.
            if self.EJ < 0:
                raise ValidationError("transmon requires EJ >= 0")
            if self.basis_dim < 3:
                raise ValidationError("transmon basis_dim must be at least 3")
        else:
            if not self.EL > 0:
                raise ValidationError("oscillator requires EL > 0")
            if self.EJ != 0:
                raise ValidationError("oscillator requires EJ = 0")

    @property
    def plasma_frequency(self):
        """sqrt(8 EC EL) for inductive elements, sqrt(8 EC EJ) for the transmon."""
        if self.kind == "transmon":
            return math.sqrt(8 * self.EC * self.EJ)
        return math.sqrt(8 * self.EC * self.EL)


@dataclass(frozen=True)
class ElementSpectrum:
    frequencies: np.ndarray
    n_elems: np.ndarray
    phi_elems: np.ndarray
    params: ElementParams
    basis_dim_used: int = field(default=0)

    def __post_init__(self):
        for arr in (self.frequencies, self.n_elems, self.phi_elems):
            arr.setflags(write=False)

    @property
    def levels(self):
        return len(self.frequencies)

    def transition(self, i, j):
        """Frequency of the |i> -> |j> transition in GHz."""
        return float(self.frequencies[j] - self.frequencies[i])

    def n(self, i, j):
        return self.n_elems[i, j]

    @property
    def is_real(self):
        return not np.any(self.n_elems.imag)


def _ladder(dim):
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


def _gauge(vecs):
    """Make the largest-magnitude component of every column real-positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    lead = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(lead) / lead)[np.newaxis, :]


def _matrix_elements(vecs, op):
    return vecs.conj().T @ op @ vecs


def _fluxonium_eig(params, dim, keep):
    omega = math.sqrt(8 * params.EC * params.EL)
    phi_zpf = (2 * params.EC / params.EL) ** 0.25
    n_zpf = (params.EL / (32 * params.EC)) ** 0.25

    a = _ladder(dim)
    phi = phi_zpf * (a + a.T)
    # Eigenbasis of the truncated phase operator = Gauss-Hermite nodes, so the
    # cosine is evaluated without expanding a matrix exponential.
    x, w = eigh_tridiagonal(np.zeros(dim), phi_zpf * np.sqrt(np.arange(1, dim)))
    cos_phi = (w * np.cos(x)) @ w.T
    sin_phi = (w * np.sin(x)) @ w.T
    ham = np.diag(omega * np.arange(dim, dtype=float))
    ham -= params.EJ * (math.cos(params.phi_ext) * cos_phi - math.sin(params.phi_ext) * sin_phi)

    evals, evecs = eigh(ham, subset_by_index=[0, keep - 1])
    # rotate into the i^k basis where the charge operator is real
    rot = (1j) ** (-np.arange(dim) % 4)
    vecs = _gauge(evecs * rot[:, np.newaxis])
    n_op = n_zpf * (a + a.T)
    phi_op = 1j * phi_zpf * (a - a.T)
    return evals, vecs, n_op, phi_op


def _transmon_eig(params, dim, keep):
    n_cut = (dim - 1) // 2
    charges = np.arange(-n_cut, n_cut + 1, dtype=float)
    diag = 4 * params.EC * charges**2
    off = np.full(2 * n_cut, -params.EJ / 2)
    evals, evecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, keep - 1))
    vecs = _gauge(evecs.astype(complex))
    n_op = np.diag(charges)
    diff = charges[np.newaxis, :] - charges[:, np.newaxis]
    with np.errstate(divide="ignore", invalid="ignore"):
        phi_op = np.where(diff != 0, -1j * (-1.0) ** np.abs(diff) / diff, 0.0)
    return evals, vecs, n_op, phi_op


def _spectrum(params, dim, eig):
    keep = params.keep_levels
    evals, vecs, n_op, phi_op = eig(params, dim, keep)
    if np.max(np.abs(vecs.imag)) < 1e-12:
        vecs = vecs.real.astype(complex)
    return ElementSpectrum(
        frequencies=evals - evals[0],
        n_elems=_matrix_elements(vecs, n_op),
        phi_elems=_matrix_elements(vecs, phi_op),
        params=params,
        basis_dim_used=dim,
    )


def _converged(params, eig, doubler):
    dim = params.basis_dim
    current = _spectrum(params, dim, eig)
    delta = None
    for _ in range(2):
        bigger_dim = doubler(dim)
        bigger = _spectrum(params, bigger_dim, eig)
        delta = float(np.max(np.abs(bigger.frequencies - current.frequencies)))
        if delta < CONVERGENCE_TOL:
            return current
        dim, current = bigger_dim, bigger
    raise ConvergenceError(
        f"{params.kind} spectrum not converged after two basis doublings "
        f"(basis_dim up to {dim}); last change {delta:.3e} GHz",
        delta=delta,
    )


def _check_nondegenerate(spec):
    gaps = np.diff(spec.frequencies)
    if np.any(gaps < DEGENERACY_TOL):
        k = int(np.argmin(gaps))
        raise ValidationError(
            f"{spec.params.kind}: levels {k} and {k + 1} are degenerate (gap {gaps[k]:.2e} GHz)"
        )


def build_fluxonium(params: ElementParams) -> ElementSpectrum:
    """Diagonalize H = 4 EC n^2 + EL phi^2 / 2 - EJ cos(phi + phi_ext).

    The basis is the eigenbasis of the quadratic part. The result is checked
    for convergence by doubling ``basis_dim``.
    """
    if params.kind != "fluxonium":
        raise ValidationError(f"build_fluxonium got kind={params.kind!r}")
    spec = _converged(params, _fluxonium_eig, lambda d: 2 * d)
    _check_nondegenerate(spec)
    return spec


def build_transmon(params: ElementParams) -> ElementSpectrum:
    """Diagonalize H = 4 EC n^2 - EJ cos(phi) in the charge basis."""
    if params.kind != "transmon":
        raise ValidationError(f"build_transmon got kind={params.kind!r}")
    spec = _converged(params, _transmon_eig, lambda d: 4 * ((d - 1) // 2) + 1)
    if params.EJ > 0:
        _check_nondegenerate(spec)
    return spec


def build_oscillator(params: ElementParams) -> ElementSpectrum:
    """Harmonic mode with frequency sqrt(8 EC EL); ladder matrix elements are exact."""
    if params.kind != "oscillator":
        raise ValidationError(f"build_oscillator got kind={params.kind!r}")
    keep = params.keep_levels
    omega = math.sqrt(8 * params.EC * params.EL)
    a = _ladder(keep)
    n_zpf = (params.EL / (32 * params.EC)) ** 0.25
    phi_zpf = (2 * params.EC / params.EL) ** 0.25
    return ElementSpectrum(
        frequencies=omega * np.arange(keep, dtype=float),
        n_elems=(n_zpf * (a + a.T)).astype(complex),
        phi_elems=1j * phi_zpf * (a - a.T),
        params=params,
        basis_dim_used=keep,
    )


_BUILDERS = {
    "fluxonium": build_fluxonium,
    "transmon": build_transmon,
    "oscillator": build_oscillator,
}


def build_element(params: ElementParams) -> ElementSpectrum:
    return _BUILDERS[params.kind](params)


def tune_to_frequency(params: ElementParams, target_f01: float, field_name="EJ", bracket=None):
    """Return a copy of ``params`` with ``field_name`` adjusted so f01 hits ``target_f01``.

    Used for detuning sweeps (qubit detuning through EJ, coupler-coupler
    detuning through the coupler EJ).
    """
    from dataclasses import replace
    from scipy.optimize import brentq

    base = getattr(params, field_name)

    def f01(value):
        return build_element(replace(params, **{field_name: value})).frequencies[1] - target_f01

    lo, hi = bracket if bracket is not None else (0.5 * base, 1.5 * base)
    value = brentq(f01, lo, hi, xtol=1e-13, rtol=1e-13)
    return replace(params, **{field_name: value})
