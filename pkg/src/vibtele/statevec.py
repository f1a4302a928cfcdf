"""Dense state vectors over ordered spin/mode registers.

Basis ordering is fixed: the last subsystem varies fastest, so the flat
amplitude index of ``(i_0, i_1, ..., i_k)`` is the C-order ravel of the
per-subsystem indices.  Spin index 0 is ``g`` and index 1 is ``e``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
PURITY_TOL = 1e-9

SPIN_LEVELS = ("g", "e")


class StateError(ValueError):
    """Raised when an operation's precondition on a state is violated."""


class Kind(str, Enum):
    SPIN = "spin"
    MODE = "mode"


@dataclass(frozen=True)
class SubsystemDescriptor:
    label: str
    kind: Kind
    dimension: int

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.dimension < 1:
            raise ValueError(f"{self.label}: dimension must be positive")
        if (kind is Kind.SPIN) != (self.dimension == 2):
            raise ValueError(f"{self.label}: spins have dimension 2, modes are Fock ladders")

    @classmethod
    def spin(cls, label: str) -> "SubsystemDescriptor":
        return cls(label, Kind.SPIN, 2)

    @classmethod
    def mode(cls, label: str, n_max: int) -> "SubsystemDescriptor":
        if n_max < 1:
            raise ValueError("a motional mode needs n_max >= 1")
        return cls(label, Kind.MODE, n_max + 1)


@dataclass(frozen=True)
class Layout:
    """Ordered subsystem registry plus station ownership of every label."""

    subsystems: tuple[SubsystemDescriptor, ...]
    station_of: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        labels = [s.label for s in self.subsystems]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate subsystem labels in {labels}")
        unknown = set(self.station_of) - set(labels)
        if unknown:
            raise ValueError(f"station assigned to unknown labels {sorted(unknown)}")
        for s in self.subsystems:
            if s.kind is Kind.SPIN and s.label not in self.station_of:
                raise ValueError(f"spin {s.label} has no station")
        object.__setattr__(self, "station_of", dict(self.station_of))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dimension for s in self.subsystems)

    @property
    def total_dimension(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem {label!r}") from None

    def descriptor(self, label: str) -> SubsystemDescriptor:
        return self.subsystems[self.index(label)]

    def with_station(self, label: str, station: str) -> "Layout":
        self.index(label)
        stations = dict(self.station_of)
        stations[label] = station
        return Layout(self.subsystems, stations)


@dataclass(frozen=True, eq=False)
class StateVector:
    layout: Layout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.layout.total_dimension:
            raise ValueError(
                f"{amps.size} amplitudes for a layout of dimension {self.layout.total_dimension}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def with_layout(self, layout: Layout) -> "StateVector":
        if layout.dims != self.layout.dims or layout.labels != self.layout.labels:
            raise ValueError("relabelling must keep subsystem order and dimensions")
        return replace(self, layout=layout)

    def digest(self) -> str:
        """SHA-256 of the raw amplitude bytes; identical only for bit-identical states."""
        return hashlib.sha256(np.ascontiguousarray(self.amplitudes).tobytes()).hexdigest()

    def to_records(self, threshold: float = 0.0) -> list[tuple[int, float, float]]:
        """Sparse ``(basis_index, re, im)`` triples for transcripts."""
        idx = np.flatnonzero(np.abs(self.amplitudes) > threshold)
        return [(int(i), float(self.amplitudes[i].real), float(self.amplitudes[i].imag)) for i in idx]

    @classmethod
    def from_records(cls, layout: Layout, records) -> "StateVector":
        amps = np.zeros(layout.total_dimension, dtype=complex)
        for i, re, im in records:
            amps[int(i)] = complex(re, im)
        return cls(layout, amps)


def make_basis_state(layout: Layout, assignment: Mapping[str, int | str]) -> StateVector:
    """Product basis state; spin levels may be given as ``"g"``/``"e"``."""
    missing = set(layout.labels) - set(assignment)
    if missing:
        raise KeyError(f"unassigned subsystems {sorted(missing)}")
    extra = set(assignment) - set(layout.labels)
    if extra:
        raise KeyError(f"unknown subsystems {sorted(extra)}")
    index = []
    for sub in layout.subsystems:
        value = assignment[sub.label]
        if isinstance(value, str):
            if sub.kind is not Kind.SPIN or value not in SPIN_LEVELS:
                raise ValueError(f"{sub.label}: bad level {value!r}")
            value = SPIN_LEVELS.index(value)
        if not 0 <= int(value) < sub.dimension:
            raise IndexError(f"{sub.label}: index {value} outside dimension {sub.dimension}")
        index.append(int(value))
    amps = np.zeros(layout.total_dimension, dtype=complex)
    amps[np.ravel_multi_index(index, layout.dims)] = 1.0
    return StateVector(layout, amps)


def embed(state: StateVector, label: str, local: Sequence[complex]) -> StateVector:
    """Replace a product factor: ``state`` must have ``label`` in a basis-like slot.

    Used to inject prepared sub-states into a larger register; the result is
    ``rest ⊗ local`` where ``rest`` is ``state`` projected on level 0 of ``label``.
    """
    axis = state.layout.index(label)
    local = np.asarray(local, dtype=complex)
    if local.shape != (state.layout.dims[axis],):
        raise ValueError(f"{label}: expected {state.layout.dims[axis]} components")
    psi = np.moveaxis(state.tensor(), axis, -1)
    rest = psi[..., 0]
    if abs(np.vdot(rest, rest) - 1) > NORM_TOL:
        raise StateError(f"{label} is not in its level-0 slot")
    out = np.moveaxis(rest[..., None] * local, -1, axis)
    return StateVector(state.layout, out)


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> float:
    err = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) if u.size else 0.0
    if err >= tol:
        raise ValueError(f"matrix is not unitary (max |U†U - I| = {err:.3e})")
    return err


def apply_unitary(state: StateVector, u: np.ndarray, targets: Sequence[str]) -> StateVector:
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    axes = [state.layout.index(t) for t in targets]
    tdims = [state.layout.dims[a] for a in axes]
    d = int(np.prod(tdims))
    u = np.asarray(u, dtype=complex)
    if u.shape != (d, d):
        raise ValueError(f"matrix shape {u.shape} does not match target dimension {d}")
    check_unitary(u)
    k = len(axes)
    ut = u.reshape(tdims + tdims)
    out = np.tensordot(ut, state.tensor(), axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return StateVector(state.layout, out)


def _spin_axes(state: StateVector, targets: Sequence[str]) -> list[int]:
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    axes = []
    for t in targets:
        if state.layout.descriptor(t).kind is not Kind.SPIN:
            raise StateError(f"{t} is a motional mode; only spins are read out directly")
        axes.append(state.layout.index(t))
    return axes


def _outcome_key(bits) -> str:
    return "".join(SPIN_LEVELS[b] for b in bits)


def outcome_distribution(state: StateVector, targets: Sequence[str]) -> dict[str, float]:
    """Joint g/e probabilities of ``targets``, keyed like ``"ge"`` in target order."""
    axes = _spin_axes(state, targets)
    probs = np.abs(state.tensor()) ** 2
    rest = tuple(i for i in range(probs.ndim) if i not in axes)
    marg = probs.sum(axis=rest) if rest else probs
    # sum() keeps remaining axes in ascending order; reorder to target order
    order = np.argsort(np.argsort(axes))
    marg = np.transpose(marg, order) if len(axes) > 1 else marg
    return {
        _outcome_key(bits): float(marg[bits])
        for bits in np.ndindex(*([2] * len(axes)))
    }


def _project(state: StateVector, axes: list[int], bits: tuple[int, ...]) -> np.ndarray:
    psi = state.tensor()
    mask = np.zeros(psi.shape, dtype=bool)
    sl = [slice(None)] * psi.ndim
    for a, b in zip(axes, bits):
        sl[a] = b
    mask[tuple(sl)] = True
    return np.where(mask, psi, 0)


def measure_projective(
    state: StateVector,
    targets: Sequence[str],
    rng: np.random.Generator | None = None,
    forced: str | None = None,
) -> tuple[str, StateVector, float]:
    """Ideal g/e readout of ``targets``.

    With ``forced`` the named outcome is selected regardless of ``rng`` (no
    draw is consumed) and its Born probability is still reported.
    """
    axes = _spin_axes(state, targets)
    dist = outcome_distribution(state, targets)
    keys = list(dist)
    if forced is not None:
        if forced not in dist:
            raise ValueError(f"forced outcome {forced!r} not among {keys}")
        key = forced
        if dist[key] <= 0.0:
            raise StateError(f"forced outcome {forced!r} has zero probability")
    else:
        if rng is None:
            raise ValueError("either rng or forced must be given")
        r = rng.random()
        acc = 0.0
        key = keys[-1]
        for k in keys:
            acc += dist[k]
            if r < acc:
                key = k
                break
    p = dist[key]
    if p <= 0.0:
        raise StateError("selected a zero-probability branch; state is corrupt")
    bits = tuple(SPIN_LEVELS.index(c) for c in key)
    collapsed = _project(state, axes, bits) / np.sqrt(p)
    return key, StateVector(state.layout, collapsed), p


def reduced_density_matrix(state: StateVector, target: str) -> np.ndarray:
    axis = state.layout.index(target)
    m = np.moveaxis(state.tensor(), axis, 0).reshape(state.layout.dims[axis], -1)
    return m @ m.conj().T


def canonical_phase(vec: Sequence[complex]) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude component is real positive."""
    v = np.asarray(vec, dtype=complex)
    k = int(np.argmax(np.abs(v)))
    if v[k] == 0:
        return v.copy()
    return v * (abs(v[k]) / v[k])


def extract_subsystem(state: StateVector, target: str, tol: float = PURITY_TOL) -> np.ndarray:
    rho = reduced_density_matrix(state, target)
    purity = float(np.real(np.trace(rho @ rho)))
    if purity < 1 - tol:
        raise StateError(f"{target} is entangled with the rest (purity {purity:.12f})")
    axis = state.layout.index(target)
    m = np.moveaxis(state.tensor(), axis, 0).reshape(state.layout.dims[axis], -1)
    # the dominant column is the factor up to a scalar
    col = m[:, int(np.argmax(np.linalg.norm(m, axis=0)))]
    return canonical_phase(col / np.linalg.norm(col))


def fidelity_up_to_phase(a: Sequence[complex], b: Sequence[complex]) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch {a.shape} vs {b.shape}")
    for name, v in (("a", a), ("b", b)):
        if abs(np.vdot(v, v).real - 1) > 1e-10:
            raise ValueError(f"{name} is not normalized")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def population_above(state: StateVector, level: int = 2) -> float:
    """Total probability with any motional mode at Fock level >= ``level``."""
    probs = np.abs(state.tensor()) ** 2
    keep = np.zeros(probs.shape, dtype=bool)
    for axis, sub in enumerate(state.layout.subsystems):
        if sub.kind is Kind.MODE and sub.dimension > level:
            sl = [slice(None)] * probs.ndim
            sl[axis] = slice(level, None)
            keep[tuple(sl)] = True
    return float(probs[keep].sum())
