"""Sparse Fock states over labeled bosonic modes.

A state is a map from occupation vectors to complex amplitudes. Occupation
vectors are stored sparsely as sorted tuples of ``(ModeLabel, count)`` pairs
with zero counts omitted, so the canonical form of a term is a pure function
of its occupied modes.

Linear mode transformations are applied through creation-operator algebra:
every term is rewritten as a monomial in creation operators, each operator is
replaced by its image under the mode unitary, and the product is expanded
one photon at a time before being converted back to normalized Fock
amplitudes.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

import numpy as np

PRUNE_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-14
DEFAULT_MAX_PHOTONS = 6


class FockError(Exception):
    """Base class for Fock-space errors."""


class MixedPhotonNumber(FockError):
    pass


class EmptyState(FockError):
    pass


class NonUnitary(FockError):
    pass


class DuplicateMode(FockError):
    pass


class ZeroNorm(FockError):
    pass


class OverlappingModes(FockError):
    pass


class PhotonNumberExceeded(FockError):
    pass


class Path(enum.IntEnum):
    """Spatial paths of the apparatus.

    ``P1``..``P8`` are the beams of the interferometer. ``D1``..``D4`` are the detector
    arms behind the splitters on P7 and P8; ``X7``/``X8`` are the unused
    (vacuum) input ports of those splitters.
    """

    P1 = 1
    P2 = 2
    P3 = 3
    P4 = 4
    P5 = 5
    P6 = 6
    P7 = 7
    P8 = 8
    D1 = 11
    D2 = 12
    D3 = 13
    D4 = 14
    X7 = 17
    X8 = 18

    def __str__(self) -> str:
        return self.name


class Pol(enum.IntEnum):
    H = 0
    V = 1

    def __str__(self) -> str:
        return self.name


class ModeLabel(NamedTuple):
    """One bosonic mode: (path, polarization, spectral bin / temporal slot)."""

    path: Path
    pol: Pol
    bin: int = 0

    def __str__(self) -> str:
        return f"{self.path}.{self.pol}.{self.bin}"


def mode(path: Union[Path, str], pol: Union[Pol, str] = Pol.H, bin: int = 0) -> ModeLabel:
    """Build a ModeLabel, accepting enum names as strings."""
    if isinstance(path, str):
        path = Path[path]
    if isinstance(pol, str):
        pol = Pol[pol]
    if bin < 0:
        raise ValueError(f"spectral bin must be non-negative, got {bin}")
    return ModeLabel(Path(path), Pol(pol), int(bin))


Occupation = tuple  # tuple[tuple[ModeLabel, int], ...], sorted, counts > 0


def canonical(occ: Mapping[ModeLabel, int] | Iterable[tuple[ModeLabel, int]]) -> Occupation:
    items = occ.items() if isinstance(occ, Mapping) else occ
    merged: dict[ModeLabel, int] = defaultdict(int)
    for m, n in items:
        if n < 0:
            raise ValueError(f"negative occupation {n} on {m}")
        merged[m] += int(n)
    return tuple(sorted((m, n) for m, n in merged.items() if n > 0))


def _total(occ: Occupation) -> int:
    return sum(n for _, n in occ)


class FockState:
    """Immutable sparse superposition of Fock terms with one photon number."""

    __slots__ = ("_terms", "_n", "_max")

    def __init__(
        self,
        terms: Mapping[Occupation, complex],
        max_photons: int = DEFAULT_MAX_PHOTONS,
        _trusted: bool = False,
    ):
        if _trusted:
            self._terms = dict(terms)
        else:
            clean: dict[Occupation, complex] = defaultdict(complex)
            for occ, amp in terms.items():
                clean[canonical(occ)] += complex(amp)
            self._terms = {k: v for k, v in clean.items() if abs(v) >= PRUNE_TOL}
        if not self._terms:
            raise EmptyState("state has no term above the pruning tolerance")
        totals = {_total(k) for k in self._terms}
        if len(totals) != 1:
            raise MixedPhotonNumber(f"terms carry photon numbers {sorted(totals)}")
        self._n = totals.pop()
        self._max = max_photons
        if self._n > max_photons:
            raise PhotonNumberExceeded(
                f"{self._n} photons exceeds the supported maximum {max_photons}"
            )

    @property
    def terms(self) -> dict[Occupation, complex]:
        return dict(self._terms)

    @property
    def photon_number(self) -> int:
        return self._n

    @property
    def max_photons(self) -> int:
        return self._max

    def items(self) -> Iterator[tuple[Occupation, complex]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def amplitude(self, occ: Mapping[ModeLabel, int] | Occupation) -> complex:
        return self._terms.get(canonical(occ), 0j)

    def modes(self) -> frozenset[ModeLabel]:
        return frozenset(m for occ in self._terms for m, _ in occ)

    def paths(self) -> frozenset[Path]:
        return frozenset(m.path for m in self.modes())

    def norm(self) -> float:
        return norm(self)

    def scaled(self, factor: complex) -> "FockState":
        return FockState({k: v * factor for k, v in self._terms.items()}, self._max)

    def allclose(self, other: "FockState", atol: float = 1e-9, up_to_phase: bool = False) -> bool:
        """Term-by-term comparison, optionally modulo a global phase."""
        keys = set(self._terms) | set(other._terms)
        a = np.array([self._terms.get(k, 0j) for k in keys])
        b = np.array([other._terms.get(k, 0j) for k in keys])
        if up_to_phase:
            overlap = np.vdot(a, b)
            if abs(overlap) > 0:
                a = a * overlap / abs(overlap)
        return bool(np.all(np.abs(a - b) <= atol))

    def __repr__(self) -> str:
        parts = []
        for occ, amp in sorted(self._terms.items()):
            ket = ",".join(f"{m}:{n}" for m, n in occ) or "vac"
            parts.append(f"({amp.real:+.4g}{amp.imag:+.4g}j)|{ket}>")
        return "FockState(" + " ".join(parts) + ")"


def vacuum(max_photons: int = DEFAULT_MAX_PHOTONS) -> FockState:
    return FockState({(): 1.0}, max_photons, _trusted=True)


def make_state(
    terms: Iterable[tuple[Mapping[ModeLabel, int] | Iterable[tuple[ModeLabel, int]], complex]]
    | Mapping[Occupation, complex],
    max_photons: int = DEFAULT_MAX_PHOTONS,
) -> FockState:
    """Build a canonical, pruned state from (occupation, amplitude) pairs.

    Amplitudes are taken as given; call :func:`normalize` if needed.
    """
    if isinstance(terms, Mapping):
        terms = terms.items()
    acc: dict[Occupation, complex] = defaultdict(complex)
    for occ, amp in terms:
        acc[canonical(occ)] += complex(amp)
    return FockState(acc, max_photons)


def norm(state: FockState) -> float:
    return math.sqrt(sum(abs(a) ** 2 for _, a in state.items()))


def normalize(state: FockState) -> FockState:
    nrm = norm(state)
    if nrm < NORM_TOL:
        raise ZeroNorm("cannot normalize a zero-norm state")
    return FockState({k: v / nrm for k, v in state.items()}, state.max_photons, _trusted=True)


def tensor(a: FockState, b: FockState) -> FockState:
    """Product state of two states on disjoint mode sets."""
    shared = a.modes() & b.modes()
    if shared:
        raise OverlappingModes(f"operands share modes {sorted(map(str, shared))}")
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            out[tuple(sorted(ka + kb))] = va * vb
    return FockState(out, max(a.max_photons, b.max_photons))


def superpose(states: Sequence[tuple[complex, FockState]]) -> FockState:
    """Linear combination sum_k c_k |psi_k>, unnormalized."""
    acc: dict[Occupation, complex] = defaultdict(complex)
    max_photons = DEFAULT_MAX_PHOTONS
    for c, s in states:
        max_photons = max(max_photons, s.max_photons)
        for k, v in s.items():
            acc[k] += c * v
    return FockState(acc, max_photons)


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NonUnitary(f"expected a square matrix, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > tol:
        raise NonUnitary(f"matrix deviates from unitarity by {err:.3g}")
    return u


def apply_mode_unitary(
    state: FockState,
    u: np.ndarray,
    modes: Sequence[ModeLabel],
    out_modes: Sequence[ModeLabel] | None = None,
) -> FockState:
    """Apply a d x d mode unitary to the listed modes.

    The creation operator of ``modes[j]`` is replaced by
    ``sum_k u[k, j] * a_dag(out_modes[k])``; ``out_modes`` defaults to
    ``modes``. Output modes outside ``modes`` must be empty in ``state``.
    """
    u = check_unitary(u)
    modes = list(modes)
    out_modes = modes if out_modes is None else list(out_modes)
    d = len(modes)
    if u.shape != (d, d) or len(out_modes) != d:
        raise ValueError(f"unitary shape {u.shape} does not match {d} modes")
    if len(set(modes)) != d or len(set(out_modes)) != d:
        raise DuplicateMode("mode list contains duplicates")
    occupied = state.modes()
    if (set(out_modes) - set(modes)) & occupied:
        raise OverlappingModes("output modes already occupied outside the transformed set")

    index = {m: j for j, m in enumerate(modes)}
    # images[j]: nonzero (output mode, coefficient) pairs for input j
    images = [[(out_modes[k], u[k, j]) for k in range(d) if u[k, j] != 0] for j in range(d)]
    sqrt_fact = [math.sqrt(math.factorial(n)) for n in range(state.max_photons + 1)]

    out: dict[Occupation, complex] = defaultdict(complex)
    cache: dict[Occupation, dict[Occupation, complex]] = {}
    for occ, amp in state.items():
        kept = tuple((m, n) for m, n in occ if m not in index)
        moved = tuple((m, n) for m, n in occ if m in index)
        expansion = cache.get(moved)
        if expansion is None:
            expansion = _expand_creation_product(moved, index, images, sqrt_fact)
            cache[moved] = expansion
        for new_occ, coeff in expansion.items():
            key = tuple(sorted(kept + new_occ)) if kept else new_occ
            out[key] += amp * coeff
    return FockState(out, state.max_photons)


def _expand_creation_product(moved, index, images, sqrt_fact) -> dict[Occupation, complex]:
    """Expand prod_j (sum_k u_kj a_k^dag)^{n_j} / sqrt(n_j!) |0>.

    Monomials are tracked as occupation dicts of commuting creation
    operators; each factor is multiplied in one photon at a time.
    """
    norm_in = 1.0
    monomials: dict[Occupation, complex] = {(): 1.0 + 0j}
    for m, n in moved:
        norm_in *= sqrt_fact[n]
        for _ in range(n):
            nxt: dict[Occupation, complex] = defaultdict(complex)
            for mono, c in monomials.items():
                for target, coef in images[index[m]]:
                    nxt[_bump(mono, target)] += c * coef
            monomials = nxt
    # a_dag^m |0> = sqrt(m!) |m>
    result = {}
    for mono, c in monomials.items():
        f = 1.0
        for _, k in mono:
            f *= sqrt_fact[k]
        val = c * f / norm_in
        if abs(val) >= PRUNE_TOL:
            result[mono] = val
    return result


def _bump(mono: Occupation, target: ModeLabel) -> Occupation:
    lst = list(mono)
    for i, (m, n) in enumerate(lst):
        if m == target:
            lst[i] = (m, n + 1)
            return tuple(lst)
    lst.append((target, 1))
    lst.sort()
    return tuple(lst)


PatternKey = Union[ModeLabel, Path, tuple]


def _pattern_count(occ: Occupation, key: PatternKey) -> int:
    if isinstance(key, ModeLabel):
        return next((n for m, n in occ if m == key), 0)
    if isinstance(key, Path):
        return sum(n for m, n in occ if m.path == key)
    path, pol = key
    return sum(n for m, n in occ if m.path == path and m.pol == pol)


def _pattern_modes(occ: Occupation, key: PatternKey) -> set[ModeLabel]:
    if isinstance(key, ModeLabel):
        return {key}
    if isinstance(key, Path):
        return {m for m, _ in occ if m.path == key}
    path, pol = key
    return {m for m, _ in occ if m.path == path and m.pol == pol}


def project(
    state: FockState, pattern: Mapping[PatternKey, int]
) -> tuple[float, FockState | None]:
    """Measure the modes constrained by ``pattern``.

    Keys may be a ModeLabel (count on that mode), a Path (total count on the
    path) or a ``(Path, Pol)`` pair (count on the path in that polarization,
    summed over bins). Returns the matching probability mass and the
    renormalized remainder with the measured photons removed, or ``(0.0,
    None)`` when nothing matches.
    """
    matched: dict[Occupation, complex] = defaultdict(complex)
    for occ, amp in state.items():
        if all(_pattern_count(occ, k) == n for k, n in pattern.items()):
            drop = set()
            for k, n in pattern.items():
                if n:
                    drop |= _pattern_modes(occ, k)
            rest = tuple((m, c) for m, c in occ if m not in drop)
            matched[rest] += amp
    prob = sum(abs(a) ** 2 for a in matched.values())
    if prob < PRUNE_TOL ** 2 or not any(abs(a) >= PRUNE_TOL for a in matched.values()):
        return 0.0, None
    remainder = FockState(matched, state.max_photons)
    return float(prob), normalize(remainder)


def postselect(state: FockState, pattern: Mapping[PatternKey, int]) -> tuple[float, FockState | None]:
    """Like :func:`project` but keeps the measured photons in the output state."""
    kept = {k: v for k, v in state.items() if all(_pattern_count(k, p) == n for p, n in pattern.items())}
    prob = sum(abs(a) ** 2 for a in kept.values())
    if not kept or prob < PRUNE_TOL ** 2:
        return 0.0, None
    return float(prob), normalize(FockState(kept, state.max_photons, _trusted=True))


def path_distribution(state: FockState, paths: Sequence[Path]) -> dict[tuple[int, ...], float]:
    """Probability of each photon-count pattern on ``paths``.

    Photons on other paths are ignored (marginalized).
    """
    dist: dict[tuple[int, ...], float] = defaultdict(float)
    # Terms with distinct occupations are orthogonal, so probabilities add.
    for occ, amp in state.items():
        key = tuple(_pattern_count(occ, p) for p in paths)
        dist[key] += abs(amp) ** 2
    return dict(dist)


def mean_photons(state: FockState, path: Path) -> float:
    return sum(abs(a) ** 2 * _pattern_count(occ, path) for occ, a in state.items())


@dataclass(frozen=True)
class StateEnsemble:
    """Weighted mixture of normalized pure states.

    Weights may sum to less than one; the deficit is probability that was
    post-selected away upstream.
    """

    entries: tuple[tuple[float, FockState], ...] = field(default_factory=tuple)

    def __post_init__(self):
        entries = tuple((float(w), s) for w, s in self.entries)
        for w, s in entries:
            if w < -1e-15:
                raise ValueError(f"negative ensemble weight {w}")
            if abs(norm(s) - 1.0) > 1e-9:
                raise ValueError("ensemble members must be normalized")
        if sum(w for w, _ in entries) > 1.0 + 1e-9:
            raise ValueError("ensemble weights sum above one")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def pure(cls, state: FockState, weight: float = 1.0) -> "StateEnsemble":
        return cls(((weight, normalize(state)),))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def total_weight(self) -> float:
        return sum(w for w, _ in self.entries)

    def density_matrix(self, basis: Sequence[Occupation]) -> np.ndarray:
        idx = {k: i for i, k in enumerate(basis)}
        rho = np.zeros((len(basis), len(basis)), dtype=complex)
        for w, s in self.entries:
            v = np.zeros(len(basis), dtype=complex)
            for k, a in s.items():
                v[idx[k]] = a
            rho += w * np.outer(v, v.conj())
        return rho
