"""Closed-form pulse and Raman-gate unitaries.

Conventions (spin basis ``(g, e)``, spin axis before mode axis):

* carrier, area ``A`` and phase ``p``: ``exp(-i A/2 (e^{ip} σ+ + e^{-ip} σ-))``
* anti-JC (blue sideband), phase ``p``: generator ``e^{-ip} σ+ a† + e^{ip} σ- a``;
  a π pulse takes ``|e,1> -> -i e^{ip} |g,0>``
* JC (red sideband), phase ``p``: generator ``e^{-ip} σ+ a + e^{ip} σ- a†``;
  a π pulse takes ``|e,0> -> -i e^{ip} |g,1>``

Sideband rungs rotate at ``A sqrt(n+1)``.  Couplings that would leave the
truncated ladder are dropped, so the top rung state is dark.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np

TWO_PI = 2 * math.pi


def wrap_phase(x: float) -> float:
    """Map a phase onto (-pi, pi]."""
    return math.pi - (math.pi - x) % TWO_PI


class PulseKind(str, Enum):
    CARRIER = "carrier"
    JC = "jc"
    ANTIJC = "antijc"


@dataclass(frozen=True)
class PulseSpec:
    kind: PulseKind
    ion: str
    mode: str | None = None
    area: float = math.pi
    phase: float = 0.0

    def __post_init__(self):
        kind = PulseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.area < 0:
            raise ValueError("pulse area must be non-negative")
        if kind is PulseKind.CARRIER and self.mode is not None:
            raise ValueError("carrier pulses do not address a mode")
        if kind is not PulseKind.CARRIER and self.mode is None:
            raise ValueError(f"{kind.value} pulse needs a mode")
        object.__setattr__(self, "phase", self.phase % TWO_PI)

    @property
    def targets(self) -> list[str]:
        return [self.ion] if self.mode is None else [self.ion, self.mode]

    def as_dict(self) -> dict:
        out = {"kind": self.kind.value, "ion": self.ion, "area": self.area, "phase": self.phase}
        if self.mode is not None:
            out["mode"] = self.mode
        return out


@dataclass(frozen=True)
class RamanGateSpec:
    ion_j: str
    ion_k: str
    phi: float = 0.0
    phi0: float = 0.0
    varphi: float = 0.0
    angle: float = math.pi / 4

    def __post_init__(self):
        if self.ion_j == self.ion_k:
            raise ValueError("Raman gate needs two distinct ions")
        if self.angle < 0:
            raise ValueError("gate angle must be non-negative")

    def as_dict(self) -> dict:
        return {
            "ion_j": self.ion_j, "ion_k": self.ion_k, "phi": self.phi,
            "phi0": self.phi0, "varphi": self.varphi, "angle": self.angle,
        }


@dataclass(frozen=True)
class RamanPhysicalParams:
    omega0: float
    eta: float
    delta: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("Lamb-Dicke parameter must be non-negative")


def effective_rabi(params: RamanPhysicalParams) -> float:
    """Vibration-independent two-ion coupling ``2 Ω0 η² / δ``."""
    if params.delta == 0:
        raise ZeroDivisionError("Raman detuning must be non-zero")
    return 2 * params.omega0 * params.eta**2 / params.delta


def bell_time(params: RamanPhysicalParams) -> float:
    """Interaction time ``π / (4|Ω|)`` giving the Bell-generating angle π/4."""
    omega = abs(effective_rabi(params))
    if omega == 0:
        raise ZeroDivisionError("coupling vanishes; no finite Bell time")
    return math.pi / (4 * omega)


def carrier_unitary(area: float, phase: float) -> np.ndarray:
    c, s = math.cos(area / 2), math.sin(area / 2)
    # columns: images of |g>, |e>
    return np.array(
        [
            [c, -1j * np.exp(-1j * phase) * s],
            [-1j * np.exp(1j * phase) * s, c],
        ],
        dtype=complex,
    )


def _sideband(area: float, phase: float, n_max: int, red: bool) -> np.ndarray:
    if n_max < 1:
        raise ValueError("sideband pulses need n_max >= 1")
    dim = n_max + 1
    u = np.eye(2 * dim, dtype=complex)
    down = -1j * np.exp(1j * phase)   # amplitude factor for e -> g
    up = -1j * np.exp(-1j * phase)    # amplitude factor for g -> e
    for n in range(n_max):
        theta = area * math.sqrt(n + 1) / 2
        c, s = math.cos(theta), math.sin(theta)
        if red:
            e_idx, g_idx = dim + n, n + 1        # |e,n> <-> |g,n+1>
        else:
            e_idx, g_idx = dim + n + 1, n        # |g,n> <-> |e,n+1>
        u[g_idx, g_idx] = c
        u[e_idx, e_idx] = c
        u[g_idx, e_idx] = down * s
        u[e_idx, g_idx] = up * s
    return u


@lru_cache(maxsize=4096)
def _cached(kind: PulseKind, area: float, phase: float, n_max: int) -> np.ndarray:
    if kind is PulseKind.CARRIER:
        u = carrier_unitary(area, phase)
    else:
        u = _sideband(area, phase, n_max, red=kind is PulseKind.JC)
    u.setflags(write=False)
    return u


def antijc_unitary(area: float, phase: float, n_max: int) -> np.ndarray:
    return _sideband(area, phase, n_max, red=False)


def jc_unitary(area: float, phase: float, n_max: int) -> np.ndarray:
    return _sideband(area, phase, n_max, red=True)


def pulse_unitary(spec: PulseSpec, n_max: int) -> np.ndarray:
    """Matrix for ``spec`` on its targets (read-only, cached)."""
    return _cached(spec.kind, float(spec.area), float(spec.phase), n_max)


def raman_unitary(spec: RamanGateSpec) -> np.ndarray:
    """``exp(-i angle H)`` for the two-ion Hamiltonian, basis gg, ge, eg, ee.

    ``{gg, ee}`` couple through ``e^{i(2φ+ϕ)}``, ``{eg, ge}`` through
    ``-e^{i(φ0+ϕ)}``; the ``-1/2`` term contributes the global ``e^{i angle cos ϕ}``.
    """
    t = spec.angle
    c, s = math.cos(t), math.sin(t)
    a = 2 * spec.phi + spec.varphi
    b = spec.phi0 + spec.varphi
    gg, ge, eg, ee = range(4)
    u = np.zeros((4, 4), dtype=complex)
    u[gg, gg] = u[ee, ee] = u[ge, ge] = u[eg, eg] = c
    u[ee, gg] = -1j * s * np.exp(1j * a)
    u[gg, ee] = -1j * s * np.exp(-1j * a)
    u[eg, ge] = 1j * s * np.exp(1j * b)
    u[ge, eg] = 1j * s * np.exp(-1j * b)
    return np.exp(1j * t * math.cos(spec.varphi)) * u


def pi_rotation(axis: str) -> list[tuple[float, float]]:
    """Carrier (area, phase) sequence realizing ``exp(-i π/2 σ_axis)`` up to sign.

    x and y are single π pulses at phase 0 and π/2; z is y followed by x.
    """
    table = {
        "none": [],
        "x": [(math.pi, 0.0)],
        "y": [(math.pi, math.pi / 2)],
        "z": [(math.pi, math.pi / 2), (math.pi, 0.0)],
    }
    try:
        return table[axis]
    except KeyError:
        raise ValueError(f"unknown rotation axis {axis!r}") from None


def scaled(spec: PulseSpec, factor: float, dphase: float) -> PulseSpec:
    return replace(spec, area=max(0.0, spec.area * factor), phase=spec.phase + dphase)
