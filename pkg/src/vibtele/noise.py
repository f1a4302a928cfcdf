"""Phenomenological imperfections, sampled as pure-state trajectories."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from .dynamics import PulseSpec, RamanGateSpec
from .statevec import Kind, StateVector, apply_unitary

_Z = np.diag([1.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class NoiseModel:
    pulse_area_sigma: float = 0.0
    phase_jitter_sigma: float = 0.0
    transport_dephasing_p: float = 0.0
    heating_p: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not v >= 0:
                raise ValueError(f"{f.name} must be non-negative, got {v}")
        for name in ("transport_dephasing_p", "heating_p"):
            if getattr(self, name) > 1:
                raise ValueError(f"{name} is a probability")

    @property
    def is_ideal(self) -> bool:
        return all(getattr(self, f.name) == 0 for f in fields(self))

    @classmethod
    def knobs(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


def _draws(model: NoiseModel, rng: np.random.Generator | None) -> tuple[float, float]:
    eps = dphi = 0.0
    if model.pulse_area_sigma > 0:
        eps = rng.normal(0.0, model.pulse_area_sigma)
    if model.phase_jitter_sigma > 0:
        dphi = rng.normal(0.0, model.phase_jitter_sigma)
    return eps, dphi


def perturb_pulse(spec: PulseSpec, model: NoiseModel, rng: np.random.Generator | None) -> PulseSpec:
    """Relative area error and additive phase jitter; no draws for zero sigmas."""
    eps, dphi = _draws(model, rng)
    if eps == 0.0 and dphi == 0.0:
        return spec
    return replace(spec, area=max(0.0, spec.area * (1 + eps)), phase=spec.phase + dphi)


def perturb_raman(spec: RamanGateSpec, model: NoiseModel, rng: np.random.Generator | None) -> RamanGateSpec:
    eps, dphi = _draws(model, rng)
    if eps == 0.0 and dphi == 0.0:
        return spec
    return replace(spec, angle=max(0.0, spec.angle * (1 + eps)), phi=spec.phi + dphi)


def apply_transport_dephasing(
    state: StateVector, ion: str, p: float, rng: np.random.Generator | None
) -> tuple[StateVector, bool]:
    """Apply ``diag(1, -1)`` on ``ion`` with probability ``p``; returns (state, flipped)."""
    if not 0 <= p <= 1:
        raise ValueError("dephasing probability must lie in [0, 1]")
    if p == 0:
        return state, False
    if p < 1 and rng.random() >= p:
        return state, False
    return apply_unitary(state, _Z, [ion]), True


def apply_heating(
    state: StateVector, mode: str, p: float, rng: np.random.Generator | None
) -> tuple[StateVector, bool]:
    """One ``a†`` jump on ``mode`` with probability ``p`` (renormalized trajectory)."""
    if p == 0:
        return state, False
    if p < 1 and rng.random() >= p:
        return state, False
    sub = state.layout.descriptor(mode)
    if sub.kind is not Kind.MODE:
        raise ValueError(f"{mode} is not a motional mode")
    axis = state.layout.index(mode)
    psi = np.moveaxis(state.tensor(), axis, -1)
    out = np.zeros_like(psi)
    n = np.arange(1, sub.dimension)
    out[..., 1:] = psi[..., :-1] * np.sqrt(n)
    norm = np.linalg.norm(out)
    if norm == 0:
        # all population already on the truncation edge
        return state, False
    return StateVector(state.layout, np.moveaxis(out / norm, -1, axis)), True


@dataclass(frozen=True)
class SweepRow:
    knob: str
    value: float
    trials: int
    mean_fidelity: float
    std_fidelity: float


def sweep_fidelity_vs_noise(base_config, knob: str, grid: Sequence[float], trials_per_point: int) -> list[SweepRow]:
    """Mean/std fidelity of ``trials_per_point`` runs at each ``knob`` value.

    Trial seeds are derived from ``(base_config.seed, grid index, trial)``.
    """
    from .protocol import derive_seed, run_teleportation

    if knob not in NoiseModel.knobs():
        raise ValueError(f"unknown noise knob {knob!r}; expected one of {NoiseModel.knobs()}")
    if not grid:
        raise ValueError("grid must be non-empty")
    if trials_per_point < 1:
        raise ValueError("need at least one trial per point")
    rows = []
    for i, value in enumerate(grid):
        noise = replace(base_config.noise, **{knob: float(value)})
        fids = np.empty(trials_per_point)
        for t in range(trials_per_point):
            cfg = replace(base_config, noise=noise, seed=derive_seed(base_config.seed, i, t))
            fids[t] = run_teleportation(cfg).fidelity
        std = float(fids.std(ddof=1)) if trials_per_point > 1 else 0.0
        rows.append(SweepRow(knob, float(value), trials_per_point, float(fids.mean()), std))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["knob", "value", "trials", "mean_fidelity", "std_fidelity"])
    for r in rows:
        w.writerow([r.knob, f"{r.value:.17g}", r.trials, f"{r.mean_fidelity:.17g}", f"{r.std_fidelity:.17g}"])
    return buf.getvalue()


def standard_error(row: SweepRow) -> float:
    return row.std_fidelity / math.sqrt(row.trials)
