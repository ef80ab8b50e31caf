"""End-to-end model of the source, the mixing splitter and the modified interferometer.

Pipeline for one interferometer delay:

    prepare_source -> mix_at_bs1 -> run_mz -> detector_coincidences

``scan`` repeats it over a delay grid, applies the spectral envelopes and
attaches Poisson counts drawn from one seeded stream per grid point.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .elements import BS1, BS_CONVENTION, HalfWavePlate, apply_element, bs_apply, mz_circuit
from .fock import (
    DEFAULT_MAX_PHOTONS,
    FockState,
    ModeLabel,
    Path,
    Pol,
    StateEnsemble,
    apply_mode_unitary,
    make_state,
    path_distribution,
    postselect,
    project,
)
from .spectral import SpectralModel, single_photon_envelope, temporal_overlap, two_photon_envelope

H, V = Pol.H, Pol.V
INV_SQRT2 = 1.0 / math.sqrt(2.0)


class ExperimentError(Exception):
    pass


class UnsupportedN(ExperimentError):
    pass


class WrongPhotonNumber(ExperimentError):
    pass


class SourceKind(enum.Enum):
    ENTANGLED = "entangled"
    SINGLE_PHOTON = "single_photon"
    GHZ = "ghz"


def fringe_grid(start_um: float = -2.0, stop_um: float = 2.0, step_um: float = 0.01) -> tuple[float, ...]:
    n = int(round((stop_um - start_um) / step_um)) + 1
    return tuple(float(x) for x in start_um + step_um * np.arange(n))


@dataclass(frozen=True)
class Scenario:
    source: SourceKind = SourceKind.ENTANGLED
    n_photons: int = 2
    delta_l1_um: float = 0.0
    delta_l2_grid_um: tuple[float, ...] = field(default_factory=fringe_grid)
    spectral: SpectralModel = field(default_factory=SpectralModel)
    coupling_efficiency: float = 1.0
    pair_rate: float = 20000.0
    integration_time_s: float = 1.0
    seed: int = 0
    v_floor: float = 1.0
    werner_p: float = 1.0
    max_photons: int = DEFAULT_MAX_PHOTONS

    def __post_init__(self):
        grid = tuple(float(x) for x in self.delta_l2_grid_um)
        object.__setattr__(self, "delta_l2_grid_um", grid)
        if not grid:
            raise ValueError("delay grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("delay grid must be strictly increasing")
        if self.source is SourceKind.GHZ and not 1 <= self.n_photons <= self.max_photons:
            raise UnsupportedN(f"GHZ({self.n_photons}) outside 1..{self.max_photons}")
        for name in ("coupling_efficiency", "v_floor", "werner_p"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")
        if self.pair_rate < 0 or self.integration_time_s < 0:
            raise ValueError("rate and integration time must be non-negative")

    @property
    def photon_number(self) -> int:
        return {SourceKind.ENTANGLED: 2, SourceKind.SINGLE_PHOTON: 1}.get(self.source, self.n_photons)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


# -- source -------------------------------------------------------------------

def bell_state(path_a: Path = Path.P1, path_b: Path = Path.P2, bin_a: int = 0, bin_b: int = 0) -> FockState:
    """(|HH> + |VV>)/sqrt(2) on two paths (or two slots of one path)."""
    return make_state(
        [
            ({ModeLabel(path_a, H, bin_a): 1, ModeLabel(path_b, H, bin_b): 1}, INV_SQRT2),
            ({ModeLabel(path_a, V, bin_a): 1, ModeLabel(path_b, V, bin_b): 1}, INV_SQRT2),
        ]
    )


def ghz_state(n: int, path: Path = Path.P4, distinct_slots: bool = False, max_photons: int = DEFAULT_MAX_PHOTONS) -> FockState:
    """N-photon GHZ state on one path.

    All photons share bin 0 unless ``distinct_slots``, in which case photon
    k sits in temporal slot k.
    """
    if not 1 <= n <= max_photons:
        raise UnsupportedN(f"GHZ({n}) outside 1..{max_photons}")
    if distinct_slots:
        hh = {ModeLabel(path, H, k): 1 for k in range(n)}
        vv = {ModeLabel(path, V, k): 1 for k in range(n)}
    else:
        hh = {ModeLabel(path, H, 0): n}
        vv = {ModeLabel(path, V, 0): n}
    return make_state([(hh, INV_SQRT2), (vv, INV_SQRT2)], max_photons)


def prepare_source(scenario: Scenario) -> StateEnsemble:
    if scenario.source is SourceKind.SINGLE_PHOTON:
        return StateEnsemble.pure(ghz_state(1, max_photons=scenario.max_photons))
    if scenario.source is SourceKind.GHZ:
        return StateEnsemble.pure(ghz_state(scenario.n_photons, max_photons=scenario.max_photons))
    p = scenario.werner_p
    entries = [(p, bell_state())] if p > 0 else []
    noise = (1.0 - p) / 4.0
    if noise > 0:
        for pa in (H, V):
            for pb in (H, V):
                s = make_state([({ModeLabel(Path.P1, pa, 0): 1, ModeLabel(Path.P2, pb, 0): 1}, 1.0)])
                entries.append((noise, s))
    return StateEnsemble(tuple(entries))


_TO_DIAGONAL = HalfWavePlate(Path.P1, math.pi / 8).matrix()  # +45 -> H, -45 -> V


def polarization_correlation(ensemble: StateEnsemble, basis: str = "HV") -> float:
    """Correlation visibility (P_same - P_diff) / (P_same + P_diff) of a photon pair.

    ``basis`` is ``"HV"`` or ``"45"``. The two photons must sit on two
    different paths.
    """
    if basis not in ("HV", "45"):
        raise ValueError(f"unknown basis {basis!r}")
    same = diff = 0.0
    for w, s in ensemble:
        if s.photon_number != 2:
            raise WrongPhotonNumber(f"expected a photon pair, got {s.photon_number} photons")
        paths = sorted(s.paths())
        if len(paths) != 2:
            raise WrongPhotonNumber("the two photons must occupy two distinct paths")
        if basis == "45":
            for path in paths:
                for b in sorted({m.bin for m in s.modes() if m.path == path}):
                    s = apply_mode_unitary(s, _TO_DIAGONAL, [ModeLabel(path, H, b), ModeLabel(path, V, b)])
        a, b = paths
        for pa in (H, V):
            for pb in (H, V):
                prob, _ = postselect(s, {(a, pa): 1, (b, pb): 1})
                if pa == pb:
                    same += w * prob
                else:
                    diff += w * prob
    total = same + diff
    if total <= 0:
        raise WrongPhotonNumber("no photon pair found in the ensemble")
    return (same - diff) / total


# -- first splitter -----------------------------------------------------------

def _split_slot(state: FockState, path: Path, overlap: float) -> FockState:
    """Put the photon on ``path`` into sqrt(v) slot 0 + sqrt(1 - v) slot 1."""
    a, b = math.sqrt(overlap), math.sqrt(1.0 - overlap)
    u = np.array([[a, -b], [b, a]])
    for pol in (H, V):
        m0, m1 = ModeLabel(path, pol, 0), ModeLabel(path, pol, 1)
        if m0 in state.modes():
            state = apply_mode_unitary(state, u, [m0, m1])
    return state


def bs1_overlap(delta_l1_um: float, spectral: SpectralModel, v_floor: float = 1.0) -> float:
    return float(v_floor * temporal_overlap(spectral, delta_l1_um))


def mix_at_bs1(
    ensemble: StateEnsemble,
    delta_l1_um: float,
    spectral: SpectralModel,
    v_floor: float = 1.0,
    overlap: float | None = None,
) -> StateEnsemble:
    """Combine the pair at the first splitter and sort the outcomes.

    The delayed photon's temporal mode overlaps the other photon's with
    squared amplitude v = v_floor * v(dL1) (or ``overlap`` when given); the
    non-overlapping part lives in slot 1. Returned members are, per source
    member: both photons on P4, both on P3, and the P4 photon of the
    one-each outcome (the P3 partner measured in its mode basis, which
    unravels the reduced state into pure single-photon members).
    """
    v = bs1_overlap(delta_l1_um, spectral, v_floor) if overlap is None else float(overlap)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {v}")
    entries = []
    for w, s in ensemble:
        if s.photon_number != 2 or not s.paths() <= {Path.P1, Path.P2}:
            raise WrongPhotonNumber("mix_at_bs1 expects one photon on P1 and one on P2")
        out = bs_apply(_split_slot(s, Path.P2, v), BS1)
        for pattern in ({Path.P4: 2}, {Path.P3: 2}):
            prob, st = postselect(out, pattern)
            if st is not None:
                entries.append((w * prob, st))
        prob, st = postselect(out, {Path.P3: 1, Path.P4: 1})
        if st is None:
            continue
        for m in sorted(m for m in st.modes() if m.path == Path.P3):
            p_m, single = project(st, {m: 1})
            if single is not None:
                entries.append((w * prob * p_m, single))
    return StateEnsemble(tuple(entries))


@dataclass(frozen=True)
class MixSummary:
    pair_p4: float
    pair_p3: float
    single_h: float
    single_v: float


def summarize_mix(ensemble: StateEnsemble) -> MixSummary:
    acc: dict[str, float] = defaultdict(float)
    for w, s in ensemble:
        if s.photon_number == 2:
            acc["pair_p4" if s.paths() == {Path.P4} else "pair_p3"] += w
        else:
            for occ, a in s.items():
                ((m, _),) = occ
                acc["single_h" if m.pol == H else "single_v"] += w * abs(a) ** 2
    return MixSummary(acc["pair_p4"], acc["pair_p3"], acc["single_h"], acc["single_v"])


def one_each_weight(ensemble: StateEnsemble) -> float:
    """Probability that one photon left through each output of the first splitter."""
    return sum(w for w, s in ensemble if s.photon_number == 1)


# -- interferometer -----------------------------------------------------------

def run_mz(
    ensemble: StateEnsemble, delta_l2_um: float, spectral: SpectralModel | None = None
) -> dict[tuple[int, int], float]:
    """Photon-count pattern probabilities (n7, n8) after the second splitter.

    ``spectral`` sets the delay phases; pass a disabled model when the bins
    are temporal slots (as produced by :func:`mix_at_bs1`). Members with no
    photon on P4 contribute to the ``(0, 0)`` pattern.
    """
    circuit = mz_circuit(delta_l2_um)
    dist: dict[tuple[int, int], float] = defaultdict(float)
    for w, s in ensemble:
        if Path.P4 not in s.paths():
            dist[(0, 0)] += w
            continue
        _, out = circuit.run(s, spectral)
        for key, p in path_distribution(out, (Path.P7, Path.P8)).items():
            dist[key] += w * p
    return dict(dist)


CHANNELS = ("P7", "P8", "p_D1D2", "p_D3D4", "p_D2D3")
COINCIDENCE_CHANNELS = ("p_D1D2", "p_D3D4", "p_D2D3")


def detector_coincidences(
    patterns: Mapping[tuple[int, int], float], coupling_efficiency: float = 1.0
) -> dict[str, float]:
    """Map path patterns to detector channels.

    Each of P7 and P8 ends in a 50:50 splitter (P7 -> D1, D2; P8 -> D3, D4);
    n photons entering one port split binomially. A channel requires every
    photon of the pattern to be detected (efficiency^N). ``P7``/``P8`` are
    singles rates: detected photons per event on each path.
    """
    eta = coupling_efficiency
    out = dict.fromkeys(CHANNELS + ("p_lost", "post_selected"), 0.0)
    for (n7, n8), p in patterns.items():
        n = n7 + n8
        out["P7"] += eta * n7 * p
        out["P8"] += eta * n8 * p
        if n < 2:
            continue
        out["post_selected"] += p
        det = p * eta**n
        if n8 == 0:
            out["p_D1D2"] += det * (1.0 - 2.0 ** (1 - n7))
        elif n7 == 0:
            out["p_D3D4"] += det * (1.0 - 2.0 ** (1 - n8))
        else:
            # D2 catches all of P7's photons and D3 all of P8's
            out["p_D2D3"] += det * 2.0 ** (-n)
    out["p_lost"] = out["post_selected"] - out["p_D1D2"] - out["p_D3D4"] - out["p_D2D3"]
    return out


# -- counts -------------------------------------------------------------------

def sample_counts(probability, rate: float, time: float, seed) -> np.ndarray | int:
    """Poisson draw with mean probability * rate * time.

    ``seed`` is anything accepted by ``numpy.random.default_rng``, including
    an existing Generator (draws then continue that stream).
    """
    p = np.asarray(probability, dtype=float)
    if np.any(p < 0) or np.any(p > 1 + 1e-12):
        raise ValueError("probability must lie in [0, 1]")
    if rate * time < 0:
        raise ValueError("rate * time must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = rng.poisson(np.clip(p, 0.0, None) * rate * time)
    return int(n) if np.ndim(n) == 0 else n


def point_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for grid point ``index``; order-free by construction."""
    return np.random.default_rng([int(seed), int(index)])


# -- scans --------------------------------------------------------------------

@dataclass
class ScanResult:
    grid: np.ndarray
    probabilities: dict[str, np.ndarray]
    counts: dict[str, np.ndarray]
    patterns: dict[tuple[int, int], np.ndarray]
    scenario: Scenario
    noisy: bool
    metadata: dict = field(default_factory=dict)

    @property
    def channels(self) -> tuple[str, ...]:
        if self.scenario.source is SourceKind.SINGLE_PHOTON:
            return ("P7", "P8")
        return CHANNELS

    def expected_counts(self, channel: str) -> np.ndarray:
        s = self.scenario
        return self.probabilities[channel] * s.pair_rate * s.integration_time_s

    def errors(self, channel: str) -> np.ndarray:
        return np.sqrt(np.maximum(self.counts[channel], 1.0))


def prepare_ensemble(scenario: Scenario) -> StateEnsemble:
    """Source state as it enters the interferometer on P4."""
    ens = prepare_source(scenario)
    if scenario.source is SourceKind.ENTANGLED:
        ens = mix_at_bs1(ens, scenario.delta_l1_um, scenario.spectral, scenario.v_floor)
    return ens


def _evaluate(ens, delta_l2, slot_model, eta):
    pats = run_mz(ens, delta_l2, slot_model)
    return pats, detector_coincidences(pats, eta)


def scan(scenario: Scenario, noisy: bool = True, apply_envelope: bool | None = None) -> ScanResult:
    """Evaluate every delay grid point and attach counts.

    With the spectral model enabled (or ``apply_envelope``), the oscillating
    part of each channel about its one-period mean is scaled by the
    two-photon envelope (coincidences) or the one-photon envelope (singles).
    """
    spectral = scenario.spectral
    use_env = spectral.enabled if apply_envelope is None else apply_envelope
    slot_model = replace(spectral, enabled=False)
    eta = scenario.coupling_efficiency
    ens = prepare_ensemble(scenario)
    grid = np.asarray(scenario.delta_l2_grid_um)

    raw: dict[str, list[float]] = {c: [] for c in CHANNELS}
    pattern_rows: list[dict] = []
    for dl in grid:
        pats, det = _evaluate(ens, dl, slot_model, eta)
        pattern_rows.append(pats)
        for c in CHANNELS:
            raw[c].append(det[c])
    probs = {c: np.array(v) for c, v in raw.items()}
    keys = sorted({k for row in pattern_rows for k in row})
    patterns = {k: np.array([row.get(k, 0.0) for row in pattern_rows]) for k in keys}

    metadata = {"bs_convention": BS_CONVENTION, "envelope": bool(use_env)}
    if use_env:
        means = _period_means(ens, slot_model, eta, scenario.photon_number)
        env2 = np.asarray(two_photon_envelope(spectral.with_(enabled=True), grid))
        env1 = np.asarray(single_photon_envelope(spectral, grid))
        for c in CHANNELS:
            env = env1 if c in ("P7", "P8") else env2
            probs[c] = means[c] + env * (probs[c] - means[c])
        for k in keys:
            env = env1 if sum(k) == 1 else env2
            m = means["patterns"].get(k, 0.0)
            patterns[k] = m + env * (patterns[k] - m)

    rate_time = scenario.pair_rate * scenario.integration_time_s
    counts: dict[str, np.ndarray] = {}
    if noisy:
        draws = np.empty((len(grid), len(CHANNELS)), dtype=np.int64)
        for i in range(len(grid)):
            rng = point_rng(scenario.seed, i)
            p = np.clip([probs[c][i] for c in CHANNELS], 0.0, None)
            draws[i] = rng.poisson(p * rate_time)
        for j, c in enumerate(CHANNELS):
            counts[c] = draws[:, j].astype(float)
    else:
        for c in CHANNELS:
            counts[c] = probs[c] * rate_time
    return ScanResult(grid, probs, counts, patterns, scenario, noisy, metadata)


def _period_means(ens, slot_model, eta, n_photons: int) -> dict:
    """One-period averages of every channel.

    Channels are trigonometric polynomials of degree <= N in the delay
    phase, so an M-point average with M > N is exact.
    """
    m = 2 * max(n_photons, 1) + 1
    lam = slot_model.lambda0_um
    acc: dict[str, float] = defaultdict(float)
    pats_acc: dict[tuple[int, int], float] = defaultdict(float)
    for k in range(m):
        pats, det = _evaluate(ens, lam * k / m, slot_model, eta)
        for c in CHANNELS:
            acc[c] += det[c] / m
        for key, p in pats.items():
            pats_acc[key] += p / m
    out = dict(acc)
    out["patterns"] = dict(pats_acc)
    return out


def hom_scan(scenario: Scenario, grid_l1_um: Sequence[float], noisy: bool = True) -> dict[str, np.ndarray]:
    """Coincidences between P3 and P4 versus the first delay.

    Returns the grid, the rate normalized to the distinguishable plateau,
    and counts (sampled, or expected when ``noisy`` is false).
    """
    grid = np.asarray(grid_l1_um, dtype=float)
    src = prepare_source(scenario.with_(source=SourceKind.ENTANGLED))
    plateau = one_each_weight(mix_at_bs1(src, 0.0, scenario.spectral, overlap=0.0))
    coinc = np.array(
        [one_each_weight(mix_at_bs1(src, dl, scenario.spectral, scenario.v_floor)) for dl in grid]
    )
    eta2 = scenario.coupling_efficiency**2
    mean = coinc * eta2 * scenario.pair_rate * scenario.integration_time_s
    if noisy:
        counts = np.array([point_rng(scenario.seed, i).poisson(mu) for i, mu in enumerate(mean)], dtype=float)
    else:
        counts = mean
    return {"grid": grid, "normalized": coinc / plateau, "probability": coinc, "counts": counts}


def ghz_to_noon(n: int, phi: float, lambda0_nm: float = 810.0, max_photons: int = DEFAULT_MAX_PHOTONS) -> FockState:
    """State just before BS2 for a GHZ(N) input with interferometer phase ``phi``.

    The delay sits on P5, so the result is
    (exp(i N phi) |N>_5 |0>_6 + |0>_5 |N>_6) / sqrt(2), all photons V.
    """
    state = ghz_state(n, max_photons=max_photons)
    circuit = mz_circuit(phi * lambda0_nm * 1e-3 / (2 * math.pi))
    model = SpectralModel(lambda0_nm=lambda0_nm, enabled=False)
    for el in circuit.elements[:-1]:
        _, state = apply_element(state, el, model)
    return state
