"""Static parasitic-interaction metrics evaluated on a dressed spectrum.

Every ZZ rate is an alternating four-point combination of dressed
frequencies; label templates are fixed per metric. Elements not named by a
template sit in |0>. The ``chain`` arguments give the element indices that
the template positions refer to, so the same metric works when extra
elements (oscillators) are appended to a chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .composite import DressedSpectrum, assign_labels, bare_index
from .errors import ValidationError

ZZ_KINDS = ("zz_qq", "zz_cs", "zz_cc")
HYBRIDIZATION_KINDS = ("hybridization", "hybridization_nnn")


@dataclass(frozen=True)
class MetricValue:
    kind: str
    value: float
    labels_used: Tuple[Tuple[int, ...], ...] = ()
    degenerate: bool = False

    def __post_init__(self):
        if self.kind not in ZZ_KINDS + HYBRIDIZATION_KINDS:
            raise ValidationError(f"unknown metric kind {self.kind!r}")
        if self.kind in HYBRIDIZATION_KINDS and not -1e-12 <= self.value <= 1 + 1e-12:
            raise ValidationError(f"{self.kind} out of [0, 1]: {self.value}")

    def __float__(self):
        return self.value


def embed_label(dims, chain, template):
    """Full label with ``template`` placed on ``chain`` positions and |0> elsewhere."""
    if len(chain) != len(template):
        raise ValidationError(f"template {template} does not match chain {tuple(chain)}")
    label = [0] * len(dims)
    for pos, v in zip(chain, template):
        label[pos] = int(v)
    return tuple(label)


def _default_chain(d, length):
    if len(d.dims) < length:
        raise ValidationError(f"metric needs at least {length} elements, spectrum has {len(d.dims)}")
    return tuple(range(length))


def four_point(d: DressedSpectrum, labels) -> MetricValue:
    """f[l11] - f[l01] - f[l10] + f[l00] for labels given in that order."""
    d = assign_labels(d, labels)
    f11, f01, f10, f00 = (d.freq(lab) for lab in labels)
    return (f11 - f01) - (f10 - f00), tuple(labels)


def zz_qq(d: DressedSpectrum, qubit_a: int, qubit_b: int) -> float:
    """Qubit-qubit ZZ rate in GHz between elements ``qubit_a`` and ``qubit_b``."""
    return zz_qq_detail(d, qubit_a, qubit_b).value


def zz_qq_detail(d, qubit_a, qubit_b):
    if qubit_a == qubit_b:
        raise ValidationError("zz_qq needs two distinct elements")
    chain = (qubit_a, qubit_b)
    labels = [embed_label(d.dims, chain, t) for t in ((1, 1), (0, 1), (1, 0), (0, 0))]
    value, used = four_point(d, labels)
    return MetricValue("zz_qq", value, used)


def _check_x(coupler_type):
    if coupler_type in ("C0", 0):
        return 0
    if coupler_type in ("C1", 1):
        return 1
    raise ValidationError(f"coupler_type must be C0 or C1, got {coupler_type!r}")


def zz_cs_cqcq(d: DressedSpectrum, coupler_type, chain: Sequence[int] = None) -> float:
    """Coupler-spectator ZZ in a C_alpha, Q1, C_beta, Q2 chain."""
    x = _check_x(coupler_type)
    chain = chain or _default_chain(d, 4)
    templates = ((1, x, 0, 1), (0, x, 0, 1), (1, x, 0, 0), (0, x, 0, 0))
    labels = [embed_label(d.dims, chain, t) for t in templates]
    return four_point(d, labels)[0]


def cqcqc_templates(side, x):
    if side == "left":
        return ((1, x, 0, 1, 0), (0, x, 0, 1, 0), (1, x, 0, 0, 0), (0, x, 0, 0, 0))
    if side == "right":
        return ((0, 1, 0, x, 1), (0, 1, 0, x, 0), (0, 0, 0, x, 1), (0, 0, 0, x, 0))
    raise ValidationError(f"side must be 'left' or 'right', got {side!r}")


def zz_cs_cqcqc(d: DressedSpectrum, side: str, coupler_type, chain: Sequence[int] = None) -> float:
    """Coupler-spectator ZZ of the left or right edge coupler in C-Q-C-Q-C."""
    x = _check_x(coupler_type)
    chain = chain or _default_chain(d, 5)
    labels = [embed_label(d.dims, chain, t) for t in cqcqc_templates(side, x)]
    return four_point(d, labels)[0]


def zz_cc(d: DressedSpectrum, coupler_type, chain: Sequence[int] = None) -> float:
    """ZZ between the target transitions of the two edge couplers of C-Q-C-Q-C."""
    x = _check_x(coupler_type)
    chain = chain or _default_chain(d, 5)
    templates = ((1, x, 0, x, 1), (0, x, 0, x, 1), (1, x, 0, x, 0), (0, x, 0, x, 0))
    labels = [embed_label(d.dims, chain, t) for t in templates]
    return four_point(d, labels)[0]


def hybridization_detail(d: DressedSpectrum, bare_1, bare_2) -> MetricValue:
    """D = |<1|2'>|^2 / 2 + |<2|1'>|^2 / 2, primes denoting labeled dressed states.

    Ambiguous assignments do not raise; the best-overlap assignment is used
    and ``degenerate`` is set.
    """
    bare_1 = tuple(int(v) for v in bare_1)
    bare_2 = tuple(int(v) for v in bare_2)
    if bare_1 == bare_2:
        raise ValidationError("hybridization needs two distinct bare labels")
    i1 = bare_index(d.dims, bare_1)
    i2 = bare_index(d.dims, bare_2)
    d = assign_labels(d, [bare_1, bare_2], strict=False)
    v1 = d.dressed_state(bare_1)
    v2 = d.dressed_state(bare_2)
    value = 0.5 * abs(v2[i1]) ** 2 + 0.5 * abs(v1[i2]) ** 2
    degenerate = bare_1 in d.ambiguous or bare_2 in d.ambiguous
    return MetricValue("hybridization", float(value), (bare_1, bare_2), degenerate)


def hybridization(d: DressedSpectrum, bare_1, bare_2) -> float:
    return hybridization_detail(d, bare_1, bare_2).value


def hybridization_nnn_detail(d: DressedSpectrum, qubits: Sequence[int] = (0, 2, 4)) -> MetricValue:
    """D' = D(|100>,|001>)/2 + D(|110>,|011>)/2 over the three qubits of Q-C-Q-C-Q."""
    if len(qubits) != 3:
        raise ValidationError("hybridization_nnn needs exactly three qubit positions")
    lab = lambda t: embed_label(d.dims, qubits, t)
    low = hybridization_detail(d, lab((1, 0, 0)), lab((0, 0, 1)))
    high = hybridization_detail(d, lab((1, 1, 0)), lab((0, 1, 1)))
    return MetricValue(
        "hybridization_nnn",
        0.5 * low.value + 0.5 * high.value,
        low.labels_used + high.labels_used,
        low.degenerate or high.degenerate,
    )


def hybridization_nnn(d: DressedSpectrum, qubits: Sequence[int] = (0, 2, 4)) -> float:
    return hybridization_nnn_detail(d, qubits).value


def hybridization_error(D: float) -> float:
    """Two-qubit error induced by a parasitic ZX drive component, 2D/5."""
    if not 0 <= D <= 1:
        raise ValidationError(f"hybridization must lie in [0, 1], got {D}")
    return 0.4 * D


def coupler_pair_labels(x: int):
    """Target-target, target-side and side-target label pairs in Cx-Q-C-Q-Cx."""
    xb = (x + 1) % 2
    return {
        "target_target": ((1, x, 0, x, 0), (0, x, 0, x, 1)),
        "target_side": ((1, x, 0, xb, 0), (0, x, 0, xb, 1)),
        "side_target": ((1, xb, 0, x, 0), (0, xb, 0, x, 1)),
    }
