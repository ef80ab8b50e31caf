import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from noonmz.fock import (
    DuplicateMode,
    EmptyState,
    FockState,
    MixedPhotonNumber,
    ModeLabel,
    NonUnitary,
    OverlappingModes,
    Path,
    PhotonNumberExceeded,
    Pol,
    StateEnsemble,
    ZeroNorm,
    apply_mode_unitary,
    make_state,
    mode,
    norm,
    normalize,
    path_distribution,
    postselect,
    project,
    superpose,
    tensor,
    vacuum,
)
from oracles import dense_transition, multinomial_transition, output_patterns, random_unitary, symbolic_hom

MODES = [ModeLabel(p, Pol.H) for p in (Path.P1, Path.P2, Path.P3, Path.P4)]


def fock_of(pattern, modes=MODES):
    return make_state([({m: n for m, n in zip(modes, pattern) if n}, 1.0)])


def as_pattern_dict(state, modes=MODES):
    return {tuple(dict(occ).get(m, 0) for m in modes): a for occ, a in state.items()}


def bs(t=0.5):
    r = math.sqrt(1 - t)
    return np.array([[math.sqrt(t), 1j * r], [1j * r, math.sqrt(t)]])


# -- construction -------------------------------------------------------------

def test_canonical_order_and_merging():
    a, b = mode("P1", "H"), mode("P2", "V")
    s = make_state([({b: 1, a: 1}, 0.5), ({a: 1, b: 1}, 0.5)])
    assert len(s) == 1
    assert s.amplitude({a: 1, b: 1}) == pytest.approx(1.0)


def test_pruning_and_empty():
    a = mode("P1")
    with pytest.raises(EmptyState):
        make_state([({a: 1}, 1e-13)])


def test_mixed_photon_number_rejected():
    a, b = mode("P1"), mode("P2")
    with pytest.raises(MixedPhotonNumber):
        make_state([({a: 1}, 1), ({a: 1, b: 1}, 1)])


def test_photon_cap():
    with pytest.raises(PhotonNumberExceeded):
        make_state([({mode("P1"): 7}, 1)])
    assert make_state([({mode("P1"): 7}, 1)], max_photons=7).photon_number == 7


def test_vacuum_and_tensor():
    v = vacuum()
    assert v.photon_number == 0 and norm(v) == 1
    a = fock_of((1, 0, 0, 0))
    b = fock_of((0, 2, 0, 0))
    t = tensor(a, b)
    assert t.photon_number == 3
    with pytest.raises(OverlappingModes):
        tensor(a, a)


def test_normalize_zero_norm():
    s = FockState({((mode("P1"), 1),): 1e-15}, _trusted=True)
    with pytest.raises(ZeroNorm):
        normalize(s)


def test_superpose_normalizes_on_request():
    a, b = fock_of((1, 0, 0, 0)), fock_of((0, 1, 0, 0))
    s = normalize(superpose([(1, a), (1j, b)]))
    assert norm(s) == pytest.approx(1.0)
    assert s.amplitude({MODES[1]: 1}) == pytest.approx(1j / math.sqrt(2))


# -- mode unitaries -----------------------------------------------------------

def test_hom_matches_symbolic_oracle():
    out = apply_mode_unitary(fock_of((1, 1, 0, 0)), bs(), MODES[:2], MODES[2:])
    got = as_pattern_dict(out, MODES[2:] + MODES[:2])
    ref = symbolic_hom(sp.Rational(1, 2))
    for (n3, n4), amp in ref.items():
        assert got.get((n3, n4, 0, 0), 0) == pytest.approx(complex(amp), abs=1e-12)
    assert (1, 1, 0, 0) not in got


@pytest.mark.parametrize("t", [0.1, 0.3, 0.7])
def test_unbalanced_hom_matches_symbolic(t):
    out = apply_mode_unitary(fock_of((1, 1, 0, 0)), bs(t), MODES[:2], MODES[2:])
    got = as_pattern_dict(out, MODES[2:] + MODES[:2])
    for (n3, n4), amp in symbolic_hom(sp.nsimplify(t)).items():
        assert got.get((n3, n4, 0, 0), 0) == pytest.approx(complex(amp), abs=1e-12)


def test_oracles_agree_with_each_other():
    rng = np.random.default_rng(3)
    for d in (2, 3):
        u = random_unitary(d, rng)
        for n_in in output_patterns(3, d):
            a, b = dense_transition(u, n_in), multinomial_transition(u, n_in)
            assert a.keys() == b.keys()
            for k in a:
                assert a[k] == pytest.approx(b[k], abs=1e-12)


def test_dense_oracle_500_instances():
    rng = np.random.default_rng(20240501)
    worst = 0.0
    for _ in range(500):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(1, 5))
        counts = tuple(int(c) for c in rng.multinomial(n, np.ones(d) / d))
        u = random_unitary(d, rng)
        got = as_pattern_dict(apply_mode_unitary(fock_of(counts, MODES[:d]), u, MODES[:d]), MODES[:d])
        ref = dense_transition(u, counts)
        for k in set(got) | set(ref):
            worst = max(worst, abs(got.get(k, 0) - ref.get(k, 0)))
    assert worst < 1e-9


def test_bs_twice_is_swap_times_i():
    psi = normalize(make_state([({MODES[0]: 2}, 1), ({MODES[0]: 1, MODES[1]: 1}, 0.5j)]))
    twice = apply_mode_unitary(apply_mode_unitary(psi, bs(), MODES[:2]), bs(), MODES[:2])
    swap = np.array([[0, 1], [1, 0]])
    ref = apply_mode_unitary(psi, swap, MODES[:2]).scaled(1j ** psi.photon_number)
    assert twice.allclose(ref, atol=1e-12)


def test_non_unitary_and_duplicates():
    psi = fock_of((1, 0, 0, 0))
    with pytest.raises(NonUnitary):
        apply_mode_unitary(psi, np.array([[1, 1], [0, 1]]), MODES[:2])
    with pytest.raises(DuplicateMode):
        apply_mode_unitary(psi, np.eye(2), [MODES[0], MODES[0]])
    with pytest.raises(OverlappingModes):
        apply_mode_unitary(fock_of((1, 0, 1, 0)), np.eye(2), MODES[:2], MODES[2:])


@st.composite
def states(draw):
    d = 3
    n = draw(st.integers(1, 4))
    pats = list(output_patterns(n, d))
    chosen = draw(st.lists(st.sampled_from(pats), min_size=1, max_size=len(pats), unique=True))
    amps = draw(
        st.lists(
            st.tuples(st.floats(-1, 1), st.floats(-1, 1)).filter(lambda z: abs(complex(*z)) > 0.05),
            min_size=len(chosen), max_size=len(chosen),
        )
    )
    terms = [({m: c for m, c in zip(MODES[:d], p) if c}, complex(*a)) for p, a in zip(chosen, amps)]
    return normalize(make_state(terms))


@settings(max_examples=60, deadline=None)
@given(states(), st.integers(0, 2**32 - 1))
def test_norm_preserved(psi, seed):
    u = random_unitary(3, np.random.default_rng(seed))
    out = apply_mode_unitary(psi, u, MODES[:3])
    assert norm(out) == pytest.approx(1.0, abs=1e-10)
    assert out.photon_number == psi.photon_number


@settings(max_examples=60, deadline=None)
@given(states(), st.integers(0, 2**32 - 1))
def test_inverse_undoes(psi, seed):
    u = random_unitary(3, np.random.default_rng(seed))
    back = apply_mode_unitary(apply_mode_unitary(psi, u, MODES[:3]), u.conj().T, MODES[:3])
    assert back.allclose(psi, atol=1e-9)


# -- measurement --------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(states())
def test_project_closure(psi):
    total = 0.0
    for n in range(psi.photon_number + 1):
        p, rest = project(psi, {MODES[0]: n})
        total += p
        if rest is not None:
            assert norm(rest) == pytest.approx(1.0)
            assert rest.photon_number == psi.photon_number - n
    assert total == pytest.approx(1.0, abs=1e-10)


def test_project_by_path_and_pol():
    h, v = mode("P3", "H"), mode("P3", "V")
    psi = normalize(make_state([({h: 1, MODES[0]: 1}, 1), ({v: 1, MODES[1]: 1}, 1)]))
    p, rest = project(psi, {(Path.P3, Pol.V): 1})
    assert p == pytest.approx(0.5)
    assert rest.modes() == {MODES[1]}
    p, rest = project(psi, {Path.P3: 1})
    assert p == pytest.approx(1.0) and len(rest) == 2
    assert project(psi, {Path.P3: 2}) == (0.0, None)


def test_postselect_keeps_photons():
    psi = apply_mode_unitary(fock_of((1, 1, 0, 0)), bs(), MODES[:2])
    p, kept = postselect(psi, {Path.P1: 2})
    assert p == pytest.approx(0.5)
    assert kept.photon_number == 2


def test_path_distribution_sums_to_one():
    psi = apply_mode_unitary(fock_of((2, 1, 0, 0)), bs(), MODES[:2])
    dist = path_distribution(psi, (Path.P1, Path.P2))
    assert sum(dist.values()) == pytest.approx(1.0)
    assert dist[(2, 1)] == pytest.approx(dist[(1, 2)])


def test_ensemble_validation():
    psi = fock_of((1, 0, 0, 0))
    ens = StateEnsemble(((0.4, psi), (0.5, psi)))
    assert ens.total_weight == pytest.approx(0.9)
    with pytest.raises(ValueError):
        StateEnsemble(((0.7, psi), (0.5, psi)))
    with pytest.raises(ValueError):
        StateEnsemble(((0.5, psi.scaled(2)),))
    rho = ens.density_matrix([next(iter(psi.terms))])
    assert rho[0, 0] == pytest.approx(0.9)
