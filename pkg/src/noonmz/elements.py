"""Optical elements as mode transformations, and a circuit container.

Beam-splitter convention (used everywhere in the package): symmetric. A
photon entering ``in_a`` leaves through ``out_a`` with amplitude ``t`` and
through ``out_b`` with amplitude ``i r``; a photon entering ``in_b`` leaves
through ``out_b`` with ``t`` and through ``out_a`` with ``i r``. For the
50:50 splitter ``t = r = 1/sqrt(2)``.

Phase delays add ``exp(+2 pi i dL / lambda)`` per photon, positive ``dL``
meaning a longer path. Half-wave plates use the Jones matrix
``[[cos 2t, sin 2t], [sin 2t, -cos 2t]]``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .fock import (
    FockState,
    ModeLabel,
    Path,
    Pol,
    StateEnsemble,
    ZeroNorm,
    apply_mode_unitary,
    normalize,
    project,
)
from .spectral import SpectralModel, bin_wavelengths_um

BS_CONVENTION = (
    "symmetric beam splitter: transmitted amplitude sqrt(T), reflected amplitude "
    "i*sqrt(1-T); BS1 P1->(P3 t, P4 r), P2->(P4 t, P3 r); "
    "BS2 P5->(P7 t, P8 r), P6->(P8 t, P7 r); delay phase exp(+2 pi i dL/lambda) on P5"
)

MONOCHROMATIC = SpectralModel(enabled=False)


@dataclass(frozen=True)
class BeamSplitter:
    in_a: Path
    in_b: Path
    out_a: Path
    out_b: Path
    transmissivity: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.transmissivity <= 1.0:
            raise ValueError(f"transmissivity must lie in [0, 1], got {self.transmissivity}")

    @property
    def paths(self) -> tuple[Path, ...]:
        return (self.in_a, self.in_b, self.out_a, self.out_b)

    def matrix(self) -> np.ndarray:
        t = math.sqrt(self.transmissivity)
        r = math.sqrt(1.0 - self.transmissivity)
        return np.array([[t, 1j * r], [1j * r, t]])


@dataclass(frozen=True)
class PBS:
    """Polarizing splitter: H transmits, V reflects, no phase on either.

    With a second input ``in_b`` the roles mirror, so two PBSs can merge the
    arms of an interferometer back onto one path.
    """

    in_a: Path
    out_transmit: Path
    out_reflect: Path
    in_b: Path | None = None

    @property
    def paths(self) -> tuple[Path, ...]:
        p = (self.in_a, self.out_transmit, self.out_reflect)
        return p if self.in_b is None else p + (self.in_b,)


@dataclass(frozen=True)
class HalfWavePlate:
    path: Path
    angle: float  # radians

    @property
    def paths(self) -> tuple[Path, ...]:
        return (self.path,)

    def matrix(self) -> np.ndarray:
        c, s = math.cos(2 * self.angle), math.sin(2 * self.angle)
        return np.array([[c, s], [s, -c]], dtype=complex)


@dataclass(frozen=True)
class PhaseDelay:
    path: Path
    delta_l_um: float

    def __post_init__(self):
        if not math.isfinite(self.delta_l_um):
            raise ValueError("delay must be finite")

    @property
    def paths(self) -> tuple[Path, ...]:
        return (self.path,)


@dataclass(frozen=True)
class Polarizer:
    path: Path
    angle: float  # radians, from H

    @property
    def paths(self) -> tuple[Path, ...]:
        return (self.path,)


OpticalElement = Union[BeamSplitter, PBS, HalfWavePlate, PhaseDelay, Polarizer]


def _submodes(state: FockState, paths: Sequence[Path]) -> list[tuple[Pol, int]]:
    """(pol, bin) pairs occupied on any of ``paths``."""
    return sorted({(m.pol, m.bin) for m in state.modes() if m.path in paths})


def _bins(state: FockState, paths: Sequence[Path]) -> list[int]:
    return sorted({m.bin for m in state.modes() if m.path in paths})


def bs_apply(state: FockState, element: BeamSplitter, spectral: SpectralModel | None = None) -> FockState:
    """Apply the splitter independently to every (polarization, bin) sub-mode pair."""
    u = element.matrix()
    for pol, b in _submodes(state, (element.in_a, element.in_b)):
        ins = [ModeLabel(element.in_a, pol, b), ModeLabel(element.in_b, pol, b)]
        outs = [ModeLabel(element.out_a, pol, b), ModeLabel(element.out_b, pol, b)]
        state = apply_mode_unitary(state, u, ins, outs)
    return state


def pbs_apply(state: FockState, element: PBS) -> FockState:
    ident = np.eye(1)
    routes = [
        (element.in_a, Pol.H, element.out_transmit),
        (element.in_a, Pol.V, element.out_reflect),
    ]
    if element.in_b is not None:
        routes += [
            (element.in_b, Pol.H, element.out_reflect),
            (element.in_b, Pol.V, element.out_transmit),
        ]
    inputs = [p for p in (element.in_a, element.in_b) if p is not None]
    # Move every input sub-mode onto a temporary label first so that routes
    # whose output path equals another route's input cannot collide.
    moves = []
    for b in _bins(state, inputs):
        for src, pol, dst in routes:
            moves.append((ModeLabel(src, pol, b), ModeLabel(dst, pol, b)))
    occupied = state.modes()
    moves = [(s, d) for s, d in moves if s in occupied]
    if not moves:
        return state
    sources = {s for s, _ in moves}
    targets = {d for _, d in moves}
    if (targets - sources) & occupied:
        raise ValueError("PBS output sub-mode already occupied")
    return _relabel(state, dict(moves))


def _relabel(state: FockState, mapping: dict[ModeLabel, ModeLabel]) -> FockState:
    out = {}
    for occ, amp in state.items():
        acc: dict[ModeLabel, int] = defaultdict(int)
        for m, n in occ:
            acc[mapping.get(m, m)] += n
        out[tuple(sorted(acc.items()))] = amp
    return FockState(out, state.max_photons, _trusted=True)


def hwp_apply(state: FockState, element: HalfWavePlate) -> FockState:
    u = element.matrix()
    for b in _bins(state, (element.path,)):
        modes = [ModeLabel(element.path, Pol.H, b), ModeLabel(element.path, Pol.V, b)]
        state = apply_mode_unitary(state, u, modes)
    return state


def phase_delay_apply(
    state: FockState, element: PhaseDelay, spectral: SpectralModel | None = None
) -> FockState:
    """Each photon on the path in bin k picks up exp(2 pi i dL / lambda_k)."""
    spectral = spectral or MONOCHROMATIC
    lam = bin_wavelengths_um(spectral)
    phases: dict[int, complex] = {}
    for b in _bins(state, (element.path,)):
        if spectral.enabled and b >= len(lam):
            raise ValueError(f"bin {b} outside the spectral grid of {len(lam)} bins")
        wl = lam[b] if spectral.enabled else spectral.lambda0_um
        phases[b] = complex(np.exp(2j * math.pi * element.delta_l_um / wl))
    if not phases:
        return state
    out = {}
    for occ, amp in state.items():
        f = 1.0 + 0j
        for m, n in occ:
            if m.path == element.path:
                f *= phases[m.bin] ** n
        out[occ] = amp * f
    return FockState(out, state.max_photons, _trusted=True)


def polarizer_apply(state: FockState, element: Polarizer) -> tuple[float, FockState | None]:
    """Project every photon on the path onto the transmission axis.

    Returns the pass probability and the renormalized state, or ``(0.0,
    None)`` when nothing passes.
    """
    c, s = math.cos(element.angle), math.sin(element.angle)
    # rotate (H, V) -> (pass, block), stored in the H and V slots
    to_axis = np.array([[c, s], [-s, c]], dtype=complex)
    bins = _bins(state, (element.path,))
    rotated = state
    for b in bins:
        modes = [ModeLabel(element.path, Pol.H, b), ModeLabel(element.path, Pol.V, b)]
        rotated = apply_mode_unitary(rotated, to_axis, modes)
    prob, passed = project(rotated, {(element.path, Pol.V): 0})
    if passed is None:
        return 0.0, None
    back = to_axis.T
    for b in bins:
        modes = [ModeLabel(element.path, Pol.H, b), ModeLabel(element.path, Pol.V, b)]
        if any(m in passed.modes() for m in modes):
            passed = apply_mode_unitary(passed, back, modes)
    return prob, passed


def apply_element(
    state: FockState, element: OpticalElement, spectral: SpectralModel | None = None
) -> tuple[float, FockState | None]:
    """Apply one element; returns (survival probability, state)."""
    if isinstance(element, BeamSplitter):
        return 1.0, bs_apply(state, element, spectral)
    if isinstance(element, PBS):
        return 1.0, pbs_apply(state, element)
    if isinstance(element, HalfWavePlate):
        return 1.0, hwp_apply(state, element)
    if isinstance(element, PhaseDelay):
        return 1.0, phase_delay_apply(state, element, spectral)
    if isinstance(element, Polarizer):
        return polarizer_apply(state, element)
    raise TypeError(f"unknown element {element!r}")


@dataclass(frozen=True)
class Circuit:
    """Ordered element list over a registry of paths."""

    elements: tuple[OpticalElement, ...]
    paths: frozenset[Path] = frozenset(Path)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "paths", frozenset(self.paths))
        for el in self.elements:
            missing = set(el.paths) - self.paths
            if missing:
                raise ValueError(f"{el!r} uses unregistered paths {sorted(map(str, missing))}")

    def __len__(self) -> int:
        return len(self.elements)

    def run(self, state: FockState, spectral: SpectralModel | None = None) -> tuple[float, FockState | None]:
        weight = 1.0
        for el in self.elements:
            p, state = apply_element(state, el, spectral)
            weight *= p
            if state is None:
                return 0.0, None
        return weight, state


def apply_circuit(
    circuit: Circuit, ensemble: StateEnsemble, spectral: SpectralModel | None = None
) -> StateEnsemble:
    """Run every ensemble member through the circuit.

    Weights are rescaled by polarizer pass probabilities; members that are
    fully blocked are dropped.
    """
    entries = []
    for w, s in ensemble:
        p, out = circuit.run(s, spectral)
        if out is not None and p * w > 0:
            entries.append((w * p, normalize(out)))
    return StateEnsemble(tuple(entries))


def mz_circuit(delta_l2_um: float) -> Circuit:
    """PBS, HWP at 45 degrees on P6, delay on P5, then BS2."""
    return Circuit(
        (
            PBS(Path.P4, out_transmit=Path.P6, out_reflect=Path.P5),
            HalfWavePlate(Path.P6, math.pi / 4),
            PhaseDelay(Path.P5, delta_l2_um),
            BS2,
        )
    )


BS1 = BeamSplitter(Path.P1, Path.P2, out_a=Path.P3, out_b=Path.P4)
BS2 = BeamSplitter(Path.P5, Path.P6, out_a=Path.P7, out_b=Path.P8)

__all__ = [
    "BS1",
    "BS2",
    "BS_CONVENTION",
    "BeamSplitter",
    "Circuit",
    "HalfWavePlate",
    "OpticalElement",
    "PBS",
    "PhaseDelay",
    "Polarizer",
    "ZeroNorm",
    "apply_circuit",
    "apply_element",
    "bs_apply",
    "hwp_apply",
    "mz_circuit",
    "pbs_apply",
    "phase_delay_apply",
    "polarizer_apply",
]
