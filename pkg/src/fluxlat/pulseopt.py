"""Pulse calibration over (amplitude, detuning) and the spectator-error sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .dynamics import GateReport, PulseSpec, ReducedModel, build_zz_simple, gate_error, propagate, rabi_amplitude
from .errors import FluxlatError, IntegrationError, ValidationError
from .sweep import SweepResult, parallel_map

SIMPLEX_AMPLITUDE_STEP = 0.1  # fraction of A0
SIMPLEX_DETUNING_STEP = 1e-3  # GHz
XATOL = 1e-6
MAXFEV = 500


@dataclass(frozen=True)
class OptResult:
    pulse: PulseSpec
    report: Optional[GateReport]
    evaluations: int
    converged: bool
    initial_error: float = math.nan

    @property
    def error(self):
        return self.report.eps_total if self.report is not None else math.nan


def initial_amplitude(tau: float, width: Optional[float] = None) -> float:
    """Amplitude completing a full 2 pi cycle of the driven transition."""
    return rabi_amplitude(tau, 2 * math.pi, width)


def nelder_mead(fun: Callable, x0, steps, xatol=XATOL, maxfev=MAXFEV):
    """Deterministic Nelder-Mead with a fixed axis-aligned initial simplex."""
    x0 = np.asarray(x0, dtype=float)
    simplex = [x0]
    for i, step in enumerate(steps):
        v = x0.copy()
        v[i] += step
        simplex.append(v)
    return minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={"initial_simplex": np.array(simplex), "xatol": xatol, "fatol": math.inf, "maxfev": maxfev},
    )


def calibrate(
    m: ReducedModel,
    tau: float,
    A0: Optional[float] = None,
    Delta0: float = 0.0,
    U_ideal=None,
    comp_labels=None,
    objective: Optional[Callable] = None,
    width: Optional[float] = None,
    virtual_z: bool = True,
    maxfev: int = MAXFEV,
) -> OptResult:
    """Minimize eps_total(A, Delta) for model ``m`` at fixed duration ``tau``.

    ``objective(A, Delta)`` replaces the gate-error evaluation when given
    (used to test the optimizer on known functions). Single-qubit Z phases
    are treated as free (virtual) corrections by default.
    """
    if not 10 <= tau <= 500:
        raise ValidationError(f"tau must lie in [10, 500] ns, got {tau}")
    if A0 is None:
        A0 = initial_amplitude(tau, width)
    if not A0 > 0:
        raise ValidationError(f"A0 must be positive, got {A0}")
    U_ideal = m.ideal if U_ideal is None else U_ideal
    comp = m.comp_indices if comp_labels is None else [
        m.labels.index(tuple(lab)) if not isinstance(lab, (int, np.integer)) else int(lab) for lab in comp_labels
    ]

    failures = []

    def report_at(A, Delta):
        p = PulseSpec(A, tau, Delta, width)
        return gate_error(propagate(m, p), U_ideal, comp, virtual_z=virtual_z, pulse=p)

    def fun(x):
        A, Delta = float(x[0]), float(x[1])
        if objective is not None:
            return float(objective(A, Delta))
        if A < 0:
            return 1.0 + abs(A)
        try:
            return report_at(A, Delta).eps_total
        except IntegrationError as exc:
            failures.append(str(exc))
            return math.inf

    x0 = np.array([A0, Delta0])
    f0 = fun(x0)
    res = nelder_mead(fun, x0, (SIMPLEX_AMPLITUDE_STEP * A0, SIMPLEX_DETUNING_STEP), maxfev=maxfev)
    evaluations = int(res.nfev) + 1
    if not np.isfinite(res.fun) and failures:
        raise IntegrationError(f"all {evaluations} calibration evaluations failed; last: {failures[-1]}")

    best = res.x if res.fun <= f0 else x0
    pulse = PulseSpec(max(float(best[0]), 0.0), tau, float(best[1]), width)
    report = None if objective is not None else report_at(pulse.amplitude, pulse.detuning)
    return OptResult(pulse, report, evaluations, bool(res.success), float(f0))


def _calibrate_point(G, zeta, tau):
    m = build_zz_simple(G, zeta)
    return calibrate(m, tau)


def spectator_sweep(
    G: float = 0.1,
    zeta_list: Sequence[float] = (0.0, 1e-4, 2e-4, 3e-4, 4e-4),
    tau_list: Sequence[float] = (30.0, 50.0, 66.0, 100.0),
    threads: Optional[int] = None,
) -> SweepResult:
    """Calibrated CZ errors on the (zeta_CS, tau) grid; failed points become NaN."""
    if not len(zeta_list) or not len(tau_list):
        raise ValidationError("zeta_list and tau_list must be nonempty")
    if not G > 0:
        raise ValidationError(f"gap must be positive, got {G}")
    zetas = np.asarray(zeta_list, dtype=float)
    taus = np.asarray(tau_list, dtype=float)
    points = [(float(z), float(t)) for z in zetas for t in taus]
    results = parallel_map(lambda zt: _calibrate_point(G, *zt), points, threads=threads)

    names = ("eps_total", "eps_ph", "eps_leak", "amplitude_ghz", "detuning_ghz", "evaluations")
    values = {k: np.full(len(points), np.nan) for k in names}
    failures = []
    for i, (pt, out) in enumerate(zip(points, results)):
        if isinstance(out, FluxlatError) or isinstance(out, Exception):
            failures.append({"zeta_cs_ghz": pt[0], "tau_ns": pt[1], "error": f"{type(out).__name__}: {out}"})
            continue
        values["eps_total"][i] = out.report.eps_total
        values["eps_ph"][i] = out.report.eps_ph
        values["eps_leak"][i] = out.report.eps_leak
        values["amplitude_ghz"][i] = out.pulse.amplitude
        values["detuning_ghz"][i] = out.pulse.detuning
        values["evaluations"][i] = out.evaluations
    shape = (len(zetas), len(taus))
    return SweepResult(
        axes={"zeta_cs_ghz": zetas, "tau_ns": taus},
        values={k: v.reshape(shape) for k, v in values.items()},
        metadata={"gap_ghz": G, "failures": failures},
    )
