"""Time-dependent reduced models, propagation and gate-error decomposition.

Hamiltonians are H/h in GHz and time is in ns; the propagator solves
i dU/dt = 2 pi H(t) U. Reduced models are written in the rotating frame of
the driven target transition, so only the drive detuning appears as an
explicit oscillation:

    H(t) = H_static + eps(t)/2 * (L exp(-2 pi i Delta t) + L^dag exp(+2 pi i Delta t))

with L the model's lowering-type drive operator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, polar
from scipy.optimize import minimize
from scipy.special import erf

from .errors import IntegrationError, ValidationError

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|
P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.diag([1.0, -1.0])
I2 = np.eye(2)

UNITARITY_TOL = 1e-8


@dataclass(frozen=True)
class PulseSpec:
    """Truncated Gaussian drive: peak ``amplitude`` (GHz), ``duration`` (ns),
    ``detuning`` (GHz) and ``width`` sigma (ns, default duration/4)."""

    amplitude: float
    duration: float
    detuning: float = 0.0
    width: Optional[float] = None

    def __post_init__(self):
        if self.width is None:
            object.__setattr__(self, "width", self.duration / 4)
        if not self.duration > 0:
            raise ValidationError(f"pulse duration must be positive, got {self.duration}")
        if not self.width > 0:
            raise ValidationError(f"pulse width must be positive, got {self.width}")
        if not self.amplitude >= 0:
            raise ValidationError(f"pulse amplitude must be non-negative, got {self.amplitude}")


def _offset(p: PulseSpec):
    return math.exp(-p.duration**2 / (8 * p.width**2))


def envelope(p: PulseSpec, t):
    """Peak-normalized truncated Gaussian; zero at both ends and outside [0, duration]."""
    t = np.asarray(t, dtype=float)
    c = _offset(p)
    shape = (np.exp(-((t - p.duration / 2) ** 2) / (2 * p.width**2)) - c) / (1 - c)
    out = np.where((t >= 0) & (t <= p.duration), p.amplitude * shape, 0.0)
    return out if out.ndim else float(out)


def envelope_area(p: PulseSpec) -> float:
    """Closed-form integral of the envelope over the pulse, GHz ns."""
    c = _offset(p)
    gauss = p.width * math.sqrt(2 * math.pi) * erf(p.duration / (2 * math.sqrt(2) * p.width))
    return p.amplitude * (gauss - p.duration * c) / (1 - c)


def rabi_amplitude(duration: float, angle: float, width: Optional[float] = None) -> float:
    """Peak amplitude giving rotation ``angle`` = 2 pi * integral(eps) on a resonant transition."""
    unit = envelope_area(PulseSpec(1.0, duration, 0.0, width))
    return angle / (2 * math.pi * unit)


@dataclass(frozen=True)
class ReducedModel:
    kind: str
    static: np.ndarray
    drive: np.ndarray
    labels: Tuple[Tuple[int, ...], ...]
    comp_labels: Tuple[Tuple[int, ...], ...]
    ideal: np.ndarray
    params: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if np.max(np.abs(self.static - self.static.conj().T)) > 1e-12:
            raise ValidationError("static Hamiltonian is not Hermitian")
        if self.drive.shape != self.static.shape:
            raise ValidationError("drive and static operators differ in shape")

    @property
    def dimension(self):
        return self.static.shape[0]

    @property
    def drive_pair(self):
        """Operators multiplying exp(-2 pi i Delta t) and exp(+2 pi i Delta t)."""
        return self.drive, self.drive.conj().T

    @property
    def comp_indices(self):
        return [self.labels.index(lab) for lab in self.comp_labels]

    def hamiltonian(self, p: PulseSpec, t: float) -> np.ndarray:
        phase = np.exp(-2j * np.pi * p.detuning * t)
        lower = 0.5 * envelope(p, t) * phase * self.drive
        return self.static + lower + lower.conj().T


def kron(*ops):
    out = np.ones((1, 1))
    for op in ops:
        out = np.kron(out, op)
    return out


def cz_diagonal(comp_labels, control=0, target=1):
    return np.diag([-1.0 if (lab[control] and lab[target]) else 1.0 for lab in comp_labels]).astype(complex)


def _parse_label(label, length):
    if isinstance(label, str):
        label = label.strip("|>").replace(",", "")
        label = tuple(int(ch) for ch in label)
    label = tuple(int(v) for v in label)
    if len(label) != length or any(v not in (0, 1) for v in label):
        raise ValidationError(f"invalid {length}-qubit label {label}")
    return label


def build_zz_simple(G: float, zeta: float) -> ReducedModel:
    """CZ model on A x B x C x S with coupler gap G and coupler-spectator ZZ zeta.

    sigma^- sigma^+ = |0><0| on each data qubit, so the coupler transition is
    resonant only for |11>_AB and is pushed up by G per data qubit in |0>.
    """
    if not G > 0:
        raise ValidationError(f"gap must be positive, got {G}")
    static = G * (kron(P0, I2, P1, I2) + kron(I2, P0, P1, I2)) + zeta * kron(I2, I2, P1, P1)
    drive = kron(I2, I2, SIGMA_MINUS, I2)
    labels = tuple(itertools.product((0, 1), repeat=4))
    comp = tuple(lab for lab in labels if lab[2] == 0)
    ideal = cz_diagonal(comp, 0, 1)
    return ReducedModel("zz_simple", static, drive, labels, comp, ideal, {"G": G, "zeta_cs": zeta})


def build_leakage_model(G: float, delta: float, k: float, source) -> ReducedModel:
    """Q-C-Q model A x B x C extended by one leakage level |l> at detuning delta.

    The source state couples to |l> through the same drive scaled by k.
    """
    if k < 0:
        raise ValidationError(f"k must be non-negative, got {k}")
    if not G > 0:
        raise ValidationError(f"gap must be positive, got {G}")
    source = _parse_label(source, 3)
    base = G * (kron(P0, I2, P1) + kron(I2, P0, P1))
    static = np.zeros((9, 9))
    static[:8, :8] = base
    static[8, 8] = delta
    drive = np.zeros((9, 9))
    drive[:8, :8] = kron(I2, I2, SIGMA_MINUS)
    labels = tuple(itertools.product((0, 1), repeat=3)) + ((9, 9, 9),)
    drive[labels.index(source), 8] = k
    comp = tuple(lab for lab in labels[:8] if lab[2] == 0)
    ideal = cz_diagonal(comp, 0, 1)
    return ReducedModel(
        "leakage", static, drive, labels, comp, ideal,
        {"G": G, "delta": delta, "k": k, "source": source},
    )


LEAK_LABEL = (9, 9, 9)


def build_parasitic_drive(D: float, which: str = "A", theta_target: float = math.pi / 2) -> ReducedModel:
    """Resonant single-qubit drive whose operator carries a parasitic ZX part.

    V_A = sqrt(1-D) X_A + sqrt(D) Z_A X_B, V_B = sqrt(1-D) X_B - sqrt(D) X_A Z_B.
    Qubit detuning is neglected, so the static part is zero.
    """
    if not 0 <= D <= 1:
        raise ValidationError(f"D must lie in [0, 1], got {D}")
    a, b = math.sqrt(1 - D), math.sqrt(D)
    if which == "A":
        drive = a * kron(SIGMA_MINUS, I2) + b * kron(SZ, SIGMA_MINUS)
        gen = kron(SX, I2)
    elif which == "B":
        drive = a * kron(I2, SIGMA_MINUS) - b * kron(SIGMA_MINUS, SZ)
        gen = kron(I2, SX)
    else:
        raise ValidationError(f"which must be 'A' or 'B', got {which!r}")
    labels = tuple(itertools.product((0, 1), repeat=2))
    ideal = expm(-0.5j * theta_target * gen)
    return ReducedModel(
        "parasitic_drive", np.zeros((4, 4)), drive, labels, labels, ideal,
        {"D": D, "which": which, "theta_target": theta_target},
    )


def drive_operator(model: ReducedModel) -> np.ndarray:
    """Hermitian drive operator L + L^dag (V for the parasitic-drive model)."""
    return model.drive + model.drive.conj().T


def propagate(m: ReducedModel, p: PulseSpec, rtol: float = 1e-10, atol: float = 1e-10) -> np.ndarray:
    """Full propagator over [0, duration]; columns evolve from basis states."""
    n = m.dimension
    static = np.asarray(m.static, dtype=complex)
    drive = np.asarray(m.drive, dtype=complex)
    drive_h = drive.conj().T
    two_pi = 2 * np.pi

    if not np.any(static) and (not np.any(drive) or p.amplitude == 0):
        return np.eye(n, dtype=complex)

    def rhs(t, y):
        u = y.reshape(n, n)
        half = 0.5 * envelope(p, t)
        phase = np.exp(-1j * two_pi * p.detuning * t)
        ham = static + (half * phase) * drive + (half * np.conj(phase)) * drive_h
        return (-1j * two_pi) * (ham @ u).ravel()

    y0 = np.eye(n, dtype=complex).ravel()
    for attempt_rtol, attempt_atol in ((rtol, atol), (rtol / 100, atol / 100)):
        sol = solve_ivp(rhs, (0.0, p.duration), y0, method="DOP853", rtol=attempt_rtol, atol=attempt_atol)
        if not sol.success:
            raise IntegrationError(f"propagation failed: {sol.message}")
        u = sol.y[:, -1].reshape(n, n)
        defect = unitarity_defect(u)
        if defect < UNITARITY_TOL:
            return u
    raise IntegrationError(f"propagator not unitary: max |U^dag U - I| = {defect:.2e}")


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


@dataclass(frozen=True)
class GateReport:
    eps_total: float
    eps_ph: float
    eps_leak: float
    U_reduced: np.ndarray
    pulse: Optional[PulseSpec] = None
    z_phases: Tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("eps_total", "eps_ph", "eps_leak"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ValidationError(f"{name} = {v} outside [0, 1]")
        if self.eps_leak > self.eps_total + 1e-9:
            raise ValidationError(f"leakage {self.eps_leak} exceeds total error {self.eps_total}")

    def as_dict(self):
        return {"eps_total": self.eps_total, "eps_ph": self.eps_ph, "eps_leak": self.eps_leak}


def qubit_bits(d: int) -> np.ndarray:
    """Bit pattern of each computational state for binary-ordered qubits."""
    nq = int(round(math.log2(d)))
    if 2**nq != d:
        return np.zeros((d, 0), dtype=int)
    return np.array([[(s >> (nq - 1 - q)) & 1 for q in range(nq)] for s in range(d)], dtype=int)


def best_local_phases(c: np.ndarray, bits: np.ndarray):
    """Maximize |sum_s c_s exp(i phi . bits_s)| over single-qubit Z phases phi."""
    if bits.shape[1] == 0:
        return np.zeros(0), abs(c.sum())
    ref = c[0] if abs(c[0]) > 0 else 1.0
    phi0 = np.zeros(bits.shape[1])
    for q in range(bits.shape[1]):
        single = np.flatnonzero((bits.sum(axis=1) == 1) & (bits[:, q] == 1))
        if single.size and abs(c[single[0]]) > 0:
            phi0[q] = np.angle(ref) - np.angle(c[single[0]])

    def cost(phi):
        w = c * np.exp(1j * (bits @ phi))
        s = w.sum()
        grad = -2 * np.real(np.conj(s) * 1j * (bits.T @ w))
        return -abs(s) ** 2, grad

    res = minimize(cost, phi0, jac=True, method="BFGS", options={"gtol": 1e-14, "maxiter": 200})
    phi = np.mod(res.x + np.pi, 2 * np.pi) - np.pi
    return phi, abs((c * np.exp(1j * (bits @ res.x))).sum())


def _infidelity(trace_abs, norm, d):
    return max(0.0, 1.0 - (norm + trace_abs**2) / (d * (d + 1)))


def gate_error(
    U: np.ndarray,
    U_ideal: np.ndarray,
    comp: Sequence[int],
    virtual_z: bool = False,
    bits: Optional[np.ndarray] = None,
    pulse: Optional[PulseSpec] = None,
) -> GateReport:
    """Average-gate infidelity of the projected propagator and its decomposition.

    With M = U_ideal^dag P U P on the d-dim computational subspace:
    eps_total = 1 - (Tr(M^dag M) + |Tr M|^2) / (d (d+1)),
    eps_leak = 1 - Tr(M^dag M) / d, and eps_ph is eps_total of the closest
    unitary to P U P after removing single-qubit Z phases. ``virtual_z``
    applies the same Z-phase removal to eps_total.
    """
    comp = list(comp)
    d = len(comp)
    if d < 2:
        raise ValidationError("computational subspace must have dimension >= 2")
    if U_ideal.shape != (d, d):
        raise ValidationError(f"ideal unitary has shape {U_ideal.shape}, expected {(d, d)}")
    if bits is None:
        bits = qubit_bits(d)

    block = U[np.ix_(comp, comp)]
    norm = float(np.real(np.trace(block.conj().T @ block)))
    eps_leak = min(1.0, max(0.0, 1.0 - norm / d))

    diag = np.diag(block @ U_ideal.conj().T)
    if virtual_z:
        phases, trace_abs = best_local_phases(diag, bits)
    else:
        phases, trace_abs = (), abs(diag.sum())
    eps_total = _infidelity(trace_abs, norm, d)

    unitary, _ = polar(block)
    phases_ph, trace_ph = best_local_phases(np.diag(unitary @ U_ideal.conj().T), bits)
    eps_ph = _infidelity(trace_ph, d, d)

    return GateReport(
        eps_total=eps_total,
        eps_ph=eps_ph,
        eps_leak=eps_leak,
        U_reduced=block,
        pulse=pulse,
        z_phases=tuple(float(v) for v in (phases if virtual_z else phases_ph)),
    )


def model_gate_error(m: ReducedModel, p: PulseSpec, virtual_z: bool = False, rtol=1e-10, atol=1e-10):
    u = propagate(m, p, rtol=rtol, atol=atol)
    return gate_error(u, m.ideal, m.comp_indices, virtual_z=virtual_z, pulse=p)


def parasitic_gate_error(
    D: float, which: str = "A", theta: float = math.pi / 2, duration: float = 20.0
) -> GateReport:
    """Error of a resonant R_X(theta) pulse whose drive has hybridization D."""
    m = build_parasitic_drive(D, which, theta)
    p = PulseSpec(rabi_amplitude(duration, theta), duration)
    return model_gate_error(m, p)
