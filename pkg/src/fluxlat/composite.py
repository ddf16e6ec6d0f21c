"""Capacitively coupled circuits in the truncated product basis.

H = sum_i H_i + sum_(i,j) g_ij n_i n_j, where every H_i is already diagonal
(element-local truncation happens first) and n_i are the element charge
matrices in that eigenbasis.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh

from .circuit import ElementSpectrum
from .errors import AmbiguousLabel, SizingError, ValidationError, format_label

DEFAULT_DIM_CAP = 200_000
TIE_TOL = 1e-12

Label = Tuple[int, ...]


@dataclass(frozen=True)
class CompositeSpec:
    """Elements plus pairwise charge couplings ``(index_a, index_b, g_GHz)``.

    Duplicate pairs (in either order) are summed on construction.
    """

    elements: Sequence[ElementSpectrum]
    couplings: Sequence[Tuple[int, int, float]] = ()
    name: str = ""
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        n = len(self.elements)
        merged: Dict[Tuple[int, int], float] = {}
        for a, b, g in self.couplings:
            a, b = int(a), int(b)
            if not (0 <= a < n and 0 <= b < n):
                raise ValidationError(f"coupling ({a}, {b}) refers to a missing element (have {n})")
            if a == b:
                raise ValidationError(f"coupling ({a}, {b}) couples an element to itself")
            key = (min(a, b), max(a, b))
            merged[key] = merged.get(key, 0.0) + float(g)
        object.__setattr__(self, "couplings", tuple((a, b, g) for (a, b), g in sorted(merged.items())))
        if self.dimension > self.dim_cap:
            sizes = ", ".join(f"{e.params.kind}[{i}]={e.levels}" for i, e in enumerate(self.elements))
            raise SizingError(
                f"product dimension {self.dimension} exceeds cap {self.dim_cap} ({sizes})"
            )

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(e.levels for e in self.elements)

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims)) if self.elements else 0

    def with_couplings(self, couplings) -> "CompositeSpec":
        return replace(self, couplings=tuple(couplings))

    def scaled(self, s: float) -> "CompositeSpec":
        return self.with_couplings((a, b, s * g) for a, b, g in self.couplings)

    def bare_index(self, label: Label) -> int:
        return bare_index(self.dims, label)

    def bare_energy(self, label: Label) -> float:
        return float(sum(e.frequencies[k] for e, k in zip(self.elements, label)))


def bare_index(dims, label) -> int:
    label = tuple(int(v) for v in label)
    if len(label) != len(dims) or any(not 0 <= v < d for v, d in zip(label, dims)):
        raise ValidationError(f"label {format_label(label)} is outside the basis with dims {tuple(dims)}")
    return int(np.ravel_multi_index(label, dims))


def all_labels(dims) -> list:
    return [tuple(lab) for lab in itertools.product(*(range(d) for d in dims))]


def _embed(op, index, dims):
    out = np.ones((1, 1), dtype=op.dtype)
    for i, d in enumerate(dims):
        out = np.kron(out, op if i == index else np.eye(d, dtype=op.dtype))
    return out


def _pair_operator(na, a, nb, b, dims):
    out = np.ones((1, 1), dtype=np.result_type(na, nb))
    for i, d in enumerate(dims):
        if i == a:
            factor = na
        elif i == b:
            factor = nb
        else:
            factor = np.eye(d)
        out = np.kron(out, factor)
    return out


def compose(spec: CompositeSpec) -> np.ndarray:
    """Dense Hermitian Hamiltonian in GHz, real whenever every charge matrix is real."""
    dims = spec.dims
    real = all(e.is_real for e in spec.elements)
    dtype = float if real else complex

    diag = np.zeros(1)
    for e in spec.elements:
        diag = np.add.outer(diag, e.frequencies).ravel()
    ham = np.diag(diag).astype(dtype)

    for a, b, g in spec.couplings:
        if g == 0.0:
            continue
        na = spec.elements[a].n_elems
        nb = spec.elements[b].n_elems
        if real:
            na, nb = na.real, nb.real
        ham += g * _pair_operator(na, a, nb, b, dims)
    return ham


@dataclass(frozen=True)
class DressedSpectrum:
    """Exact eigensystem of a composite circuit.

    ``frequencies`` are relative to the dressed ground state; ``eigvecs``
    columns are dressed states in the bare product basis. ``label_of`` and
    ``overlap_of`` hold the bare -> dressed assignment made so far.
    """

    frequencies: np.ndarray
    eigvecs: np.ndarray
    dims: Tuple[int, ...]
    ground_energy: float = 0.0
    label_of: Dict[Label, int] = field(default_factory=dict)
    overlap_of: Dict[Label, float] = field(default_factory=dict)
    ambiguous: frozenset = frozenset()

    def index(self, label) -> int:
        label = tuple(int(v) for v in label)
        if label not in self.label_of:
            raise KeyError(f"label {format_label(label)} has not been assigned")
        return self.label_of[label]

    def freq(self, label) -> float:
        return float(self.frequencies[self.index(label)])

    def dressed_state(self, label) -> np.ndarray:
        return self.eigvecs[:, self.index(label)]

    def bare_index(self, label) -> int:
        return bare_index(self.dims, label)


def diagonalize(spec: CompositeSpec, n_eig: Optional[int] = None) -> DressedSpectrum:
    """Full dense eigendecomposition (or the lowest ``n_eig`` pairs).

    Frequencies are offset so that the dressed ground state sits at zero.
    """
    ham = compose(spec)
    if n_eig is None or n_eig >= ham.shape[0]:
        evals, evecs = eigh(ham, driver="evd")
    else:
        evals, evecs = eigh(ham, subset_by_index=[0, n_eig - 1], driver="evr")
    return DressedSpectrum(
        frequencies=evals - evals[0],
        eigvecs=evecs,
        dims=spec.dims,
        ground_energy=float(evals[0]),
    )


def assign_labels(
    d: DressedSpectrum,
    labels: Optional[Iterable[Label]] = None,
    min_overlap: float = 0.5,
    strict: bool = True,
) -> DressedSpectrum:
    """Map bare product labels to dressed eigenindices.

    Pairs (label, dressed) are taken greedily in order of decreasing overlap
    |<bare|dressed>|^2, each label and each dressed state used once; overlap
    ties within 1e-12 go to the lower dressed index. Labels already assigned
    in ``d`` keep their dressed state. With ``strict`` an assignment below
    ``min_overlap`` raises ``AmbiguousLabel``; otherwise the label is recorded
    in ``ambiguous``.
    """
    if labels is None:
        labels = all_labels(d.dims)
    wanted = []
    for lab in labels:
        lab = tuple(int(v) for v in lab)
        if lab not in d.label_of and lab not in wanted:
            wanted.append(lab)
    if not wanted:
        return d

    used = set(d.label_of.values())
    rows = np.array([bare_index(d.dims, lab) for lab in wanted])
    overlaps = np.abs(d.eigvecs[rows, :]) ** 2
    n_dressed = overlaps.shape[1]

    quantized = np.round(overlaps / TIE_TOL)
    cols = np.broadcast_to(np.arange(n_dressed), overlaps.shape)
    order = np.lexsort((cols.ravel(), -quantized.ravel()))

    label_of = dict(d.label_of)
    overlap_of = dict(d.overlap_of)
    done = np.zeros(len(wanted), dtype=bool)
    remaining = len(wanted)
    for flat in order:
        r, j = divmod(int(flat), n_dressed)
        if done[r] or j in used:
            continue
        done[r] = True
        used.add(j)
        label_of[wanted[r]] = j
        overlap_of[wanted[r]] = float(overlaps[r, j])
        remaining -= 1
        if remaining == 0:
            break
    if remaining:
        missing = [format_label(lab) for lab, ok in zip(wanted, done) if not ok]
        raise ValidationError(f"not enough dressed states computed for labels {missing}")

    ambiguous = set(d.ambiguous)
    for r, lab in enumerate(wanted):
        if overlap_of[lab] < min_overlap:
            if strict:
                top = np.sort(overlaps[r])[::-1][:2]
                raise AmbiguousLabel(lab, top)
            ambiguous.add(lab)
    return replace(d, label_of=label_of, overlap_of=overlap_of, ambiguous=frozenset(ambiguous))


def dressed_frequencies(d: DressedSpectrum, labels, min_overlap=0.5):
    """Assign ``labels`` and return their dressed frequencies in order."""
    d = assign_labels(d, labels, min_overlap=min_overlap)
    return [d.freq(lab) for lab in labels]
