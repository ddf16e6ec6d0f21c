"""Drive-induced leakage from the baseline-subtracted 9-level model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .dynamics import PulseSpec, build_leakage_model, model_gate_error
from .errors import ValidationError
from .pulseopt import calibrate
from .sweep import SweepResult, parallel_map

CLIP_TOL = 1e-12
DEFAULT_SOURCES = ("110", "111", "000")
NEGLIGIBLE = 1e-5
# Bucket edges for plotting: < 1e-5, [1e-5, 1e-4), [1e-4, 1e-3), >= 1e-3
BUCKET_EDGES = (1e-5, 1e-4, 1e-3)


@dataclass(frozen=True)
class LeakageChannel:
    source: Tuple[int, ...]
    k: float
    delta: float
    rate: float
    negative: bool = False

    def __post_init__(self):
        if self.rate < -CLIP_TOL and not self.negative:
            raise ValidationError(f"negative rate {self.rate} must be flagged")


def _label(source) -> Tuple[int, ...]:
    if isinstance(source, str):
        return tuple(int(c) for c in source.strip("|>").replace(",", ""))
    return tuple(int(v) for v in source)


def source_name(source) -> str:
    return "".join(str(v) for v in _label(source))


def _eps_leak(G, delta, k, source, pulse):
    return model_gate_error(build_leakage_model(G, delta, k, source), pulse).eps_leak


def _clip(raw: float):
    if raw < 0 and raw >= -CLIP_TOL:
        return 0.0, False
    return raw, raw < 0


def leakage_channel(G: float, delta: float, k: float, source, pulse: PulseSpec, baseline: Optional[float] = None):
    """Leakage rate eps_leak(k) - eps_leak(k=0) with identical pulses."""
    if k < 0:
        raise ValidationError(f"k must be non-negative, got {k}")
    if baseline is None:
        baseline = _eps_leak(G, delta, 0.0, source, pulse)
    raw = baseline if k == 0 else _eps_leak(G, delta, k, source, pulse)
    rate, negative = _clip(raw - baseline)
    return LeakageChannel(_label(source), float(k), float(delta), float(rate), negative)


def leakage_rate(G: float, delta: float, k: float, source, pulse: PulseSpec) -> float:
    return leakage_channel(G, delta, k, source, pulse).rate


def calibrated_pulse(G: float, tau: float = 66.0) -> PulseSpec:
    """CZ pulse calibrated on the leakage model with the leakage level decoupled."""
    return calibrate(build_leakage_model(G, 0.0, 0.0, (0, 0, 0)), tau).pulse


def bucket(rate: float) -> float:
    """Order-of-magnitude region index 0..3 (NaN stays NaN)."""
    if math.isnan(rate):
        return math.nan
    return float(np.searchsorted(BUCKET_EDGES, rate, side="right"))


def leakage_map(
    G: float = 0.1,
    k_values: Sequence[float] = tuple(np.logspace(-3, -1, 9)),
    delta_values: Sequence[float] = tuple(np.linspace(-0.1, 0.1, 9)),
    sources: Sequence = DEFAULT_SOURCES,
    pulse: Optional[PulseSpec] = None,
    tau: float = 66.0,
    threads: Optional[int] = None,
) -> SweepResult:
    """Rates on the (k, delta) grid for each source, with a frozen k=0 pulse."""
    ks = np.asarray(k_values, dtype=float)
    deltas = np.asarray(delta_values, dtype=float)
    if ks.size == 0 or deltas.size == 0 or np.any(ks < 0):
        raise ValidationError("k and delta grids must be nonempty with k >= 0")
    if not sources:
        raise ValidationError("at least one source state is required")
    if pulse is None:
        pulse = calibrated_pulse(G, tau)
    names = [source_name(s) for s in sources]

    # k = 0 decouples the leakage level, so the baseline depends only on delta.
    baselines = parallel_map(lambda d: _eps_leak(G, d, 0.0, (0, 0, 0), pulse), list(deltas), threads)
    points = [(s, i, j) for s in range(len(sources)) for i in range(len(ks)) for j in range(len(deltas))]

    def run(pt):
        s, i, j = pt
        base = baselines[j]
        if isinstance(base, Exception):
            raise base
        return leakage_channel(G, deltas[j], ks[i], sources[s], pulse, baseline=base)

    out = parallel_map(run, points, threads)
    shape = (len(ks), len(deltas))
    values = {}
    for name in names:
        values[f"rate_{name}"] = np.full(shape, np.nan)
    for name in names:
        values[f"bucket_{name}"] = np.full(shape, np.nan)
    failures, flagged = [], []
    for (s, i, j), ch in zip(points, out):
        name = names[s]
        if isinstance(ch, Exception):
            failures.append({"source": name, "k": float(ks[i]), "delta_ghz": float(deltas[j]),
                             "error": f"{type(ch).__name__}: {ch}"})
            continue
        values[f"rate_{name}"][i, j] = ch.rate
        values[f"bucket_{name}"][i, j] = bucket(max(ch.rate, 0.0))
        if ch.negative:
            flagged.append({"source": name, "k": float(ks[i]), "delta_ghz": float(deltas[j]), "rate": ch.rate})
    return SweepResult(
        axes={"k": ks, "delta_ghz": deltas},
        values=values,
        metadata={
            "gap_ghz": G,
            "pulse": {"amplitude_ghz": pulse.amplitude, "duration_ns": pulse.duration,
                      "detuning_ghz": pulse.detuning, "width_ns": pulse.width},
            "sources": names,
            "negative_rates": flagged,
            "failures": failures,
        },
    )


def czz_resonance_margin(f_C1U_01: float, f_Q_03: float, f_C0L_01: float, f_Q_12: float) -> float:
    """(f_C1U_01 - f_Q_03) + (f_C0L_01 - f_Q_12); zero means the leakage resonance is hit."""
    for name, v in (("f_C1U_01", f_C1U_01), ("f_Q_03", f_Q_03), ("f_C0L_01", f_C0L_01), ("f_Q_12", f_Q_12)):
        if not v > 0:
            raise ValidationError(f"{name} must be positive, got {v}")
    return (f_C1U_01 - f_Q_03) + (f_C0L_01 - f_Q_12)
