import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbs.core import (
    INF,
    Carrier,
    SolitonContent,
    State,
    apply_R,
    bond_current,
    carrier_step,
    complement,
    count_isolevel,
    energy,
    evolve,
    find_stationary_carrier,
    soliton_content,
    _sweep_arrays,
    _sweep_python,
)


def random_state(rng, L=None, density=0.3):
    L = L or int(rng.integers(8, 64))
    while True:
        cells = (rng.random(L) < density).astype(np.uint8)
        if 2 * cells.sum() < L:
            return State(cells)


# ---------------------------------------------------------------------------
# combinatorial R


def test_apply_R_swaps_capacities_and_conserves_weight():
    (y, x) = apply_R((2, 1), (0, 1))
    assert sum(y) == 1 and sum(x) == 3
    assert y[1] + x[1] == 2


@pytest.mark.parametrize("l,m", [(1, 1), (1, 3), (2, 2), (3, 2), (4, 1)])
def test_apply_R_is_an_involution(l, m):
    for x1 in range(l + 1):
        for y1 in range(m + 1):
            a, b = (l - x1, x1), (m - y1, y1)
            bt, at = apply_R(a, b)
            assert apply_R(bt, at) == (a, b)


def test_apply_R_yang_baxter():
    # (R x 1)(1 x R)(R x 1) = (1 x R)(R x 1)(1 x R) on B_l x B_m x B_n
    def r12(t):
        b, a = apply_R(t[0], t[1])
        return (b, a, t[2])

    def r23(t):
        c, b = apply_R(t[1], t[2])
        return (t[0], c, b)

    caps = range(1, 4)
    for l, m, n in itertools.product(caps, caps, caps):
        for x1, y1, z1 in itertools.product(range(l + 1), range(m + 1), range(n + 1)):
            t = ((l - x1, x1), (m - y1, y1), (n - z1, z1))
            assert r12(r23(r12(t))) == r23(r12(r23(t)))


def test_carrier_step_matches_R_specialization():
    # a box is a capacity-1 tensor component; the carrier rule is R_{l,1}
    for l in range(1, 5):
        for n in range(l + 1):
            for eta in (0, 1):
                (box_out,), carrier_out = (
                    lambda bt, at: (tuple(bt[1:]), at)
                )(*apply_R((l - n, n), (1 - eta, eta)))
                c, out = carrier_step(Carrier(l, n), eta)
                assert (out, (c.capacity - c.load, c.load)) == (
                    box_out,
                    carrier_out,
                )


# ---------------------------------------------------------------------------
# sweeps: kernel vs reference


@given(st.lists(st.integers(0, 1), min_size=1, max_size=50),
       st.integers(1, 6), st.integers(0, 6))
@settings(max_examples=200, deadline=None)
def test_sweep_kernel_matches_pure_python(bits, l, n0):
    n0 = min(n0, l)
    cells = np.array(bits, dtype=np.uint8)
    out_k, loads_k, nfin_k = _sweep_arrays(cells, l, n0)
    out_p, loads_p, nfin_p = _sweep_python(cells, l, n0)
    assert np.array_equal(out_k, out_p)
    assert np.array_equal(loads_k, loads_p)
    assert nfin_k == nfin_p


def test_sweep_conserves_balls_plus_load():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = random_state(rng)
        for l in (1, 2, 5):
            out, _, nfin = _sweep_arrays(s.cells, l, 0)
            assert s.ball_count == out.sum() + nfin


# ---------------------------------------------------------------------------
# time evolution


def test_three_soliton_trajectory():
    rows = [
        "0110011001110010100",
        "0001100110011101010",
        "1000011001100110101",
        "1110000110011001010",
        "0011100001100110101",
        "1100111000011001010",
    ]
    t = State.from_text(rows[0])
    for row in rows[1:]:
        t = evolve(t, 2)
        assert t.to_text() == row


def test_single_soliton_moves_at_capped_speed():
    s = State.from_text("0001111000000")
    s1 = evolve(s, 3)
    s2 = evolve(s1, 3)
    assert s1.to_text() == "0000001111000"
    assert s2.to_text() == "0000000001111"
    assert [energy(s, l) for l in range(1, 7)] == [1, 2, 3, 4, 4, 4]


def test_t1_is_cyclic_shift():
    rng = np.random.default_rng(1)
    for _ in range(20):
        s = random_state(rng)
        assert np.array_equal(evolve(s, 1).cells, np.roll(s.cells, 1))


def test_t_infinity_saturates():
    rng = np.random.default_rng(2)
    for _ in range(20):
        s = random_state(rng)
        lsat = (s.L + 1) // 2
        ref = evolve(s, INF)
        assert evolve(s, lsat) == ref
        assert evolve(s, lsat + 3) == ref


def test_evolutions_commute():
    rng = np.random.default_rng(3)
    for _ in range(30):
        s = random_state(rng)
        for l, k in [(1, 2), (2, 3), (3, 5), (2, INF)]:
            assert evolve(evolve(s, l), k) == evolve(evolve(s, k), l)


def test_evolve_commutes_with_complement():
    rng = np.random.default_rng(4)
    for _ in range(20):
        s = random_state(rng, density=0.7)
        for l in (1, 2, 3, INF):
            assert evolve(complement(s), l) == complement(evolve(s, l))


def test_evolve_half_filling_conserves_balls_and_commutes():
    rng = np.random.default_rng(5)
    for _ in range(20):
        L = int(rng.integers(2, 16)) * 2
        cells = np.zeros(L, np.uint8)
        cells[rng.permutation(L)[: L // 2]] = 1
        s = State(cells)
        for l in (2, 3):
            t = evolve(s, l)
            assert t.ball_count == s.ball_count
            assert evolve(t, l + 1) == evolve(evolve(s, l + 1), l)


def test_open_boundary_sweep():
    s = State.from_text("0110100", boundary="open")
    t = evolve(s, INF)
    assert t.boundary == "open"
    # balls may flow off the right edge
    assert t.to_text() == "0001011"


def test_stationary_carrier_is_fixed_point():
    rng = np.random.default_rng(6)
    for _ in range(20):
        s = random_state(rng)
        for l in (1, 2, 4):
            c = find_stationary_carrier(s, l)
            _, _, nfin = _sweep_arrays(s.cells, l, c.load)
            assert nfin == c.load


def test_stationary_carrier_loads_from_worked_example():
    t1 = State.from_text("0001100110011101010")
    assert find_stationary_carrier(t1, 2).load == 1
    loads = bond_current(t1, 2)
    assert list(loads) == [0, 0, 0, 1, 2, 1, 0, 1, 2, 1, 0, 1, 2, 2, 1, 2, 1, 2, 1]


def test_bond_current_continuity():
    # T_l(eta)_i = eta_i + load_{i-1} - load_i
    rng = np.random.default_rng(7)
    for _ in range(30):
        s = random_state(rng, density=rng.uniform(0.1, 0.45))
        for l in (1, 2, 3, INF):
            loads = bond_current(s, l)
            t = evolve(s, l)
            lhs = s.cells.astype(int) + np.roll(loads, 1) - loads
            assert np.array_equal(lhs, t.cells.astype(int))


def test_bond_current_above_half_filling():
    rng = np.random.default_rng(8)
    for _ in range(20):
        s = random_state(rng, density=0.7)
        for l in (1, 2, 3):
            loads = bond_current(s, l)
            t = evolve(s, l)
            lhs = s.cells.astype(int) + np.roll(loads, 1) - loads
            assert np.array_equal(lhs, t.cells.astype(int))
            assert loads.min() >= 0 and loads.max() <= l


# ---------------------------------------------------------------------------
# conserved quantities


def test_energies_are_conserved():
    rng = np.random.default_rng(9)
    for _ in range(20):
        s = random_state(rng)
        spectrum = [energy(s, l) for l in range(1, 6)]
        t = s
        for l in (2, INF, 3):
            t = evolve(t, l)
            assert [energy(t, j) for j in range(1, 6)] == spectrum


def test_energy_spectrum_three_soliton_example():
    s = State.from_text("0110011001110010100")
    assert [energy(s, l) for l in range(1, 6)] == [5, 8, 9, 9, 9]
    c = soliton_content(s)
    assert c.multiplicities == (2, 2, 1)
    assert c.vacancies() == [19, 9, 3, 1]
    assert c.young_diagram_rows() == [3, 2, 2, 1, 1]


def test_e1_counts_ascents():
    rng = np.random.default_rng(10)
    for _ in range(20):
        s = random_state(rng, density=rng.uniform(0.05, 0.45))
        ascents = int(np.sum(s.cells < np.roll(s.cells, -1)))
        assert energy(s, 1) == ascents


def test_content_matches_energies():
    rng = np.random.default_rng(11)
    for _ in range(30):
        s = random_state(rng, density=rng.uniform(0.05, 0.6))
        c = soliton_content(s)
        M = min(s.ball_count, s.L - s.ball_count)
        assert c.ball_count == M
        if 2 * s.ball_count < s.L:
            for l in (1, 2, 3, INF):
                assert c.energy(l) == energy(s, l)


def test_content_invariant_under_complement():
    rng = np.random.default_rng(12)
    for _ in range(10):
        s = random_state(rng)
        assert soliton_content(complement(s)) == soliton_content(s)


# ---------------------------------------------------------------------------
# isolevel counting


def test_count_isolevel_worked_examples():
    assert count_isolevel(9, (1, 0, 1)) == 45
    assert count_isolevel(19, (2, 2, 1)) == 5130
    # together with ball/hole complements: 2 * 5130 = 10260
    assert 2 * count_isolevel(19, (2, 2, 1)) == 10260


@pytest.mark.parametrize("L", [8, 10, 12])
def test_count_isolevel_exhaustive(L):
    counts = {}
    for bits in itertools.product((0, 1), repeat=L):
        cells = np.array(bits, np.uint8)
        if 2 * cells.sum() >= L:
            continue
        m = soliton_content(State(cells)).multiplicities
        counts[m] = counts.get(m, 0) + 1
    for m, n in counts.items():
        assert count_isolevel(L, m) == n
    # grouped counts exhaust the below-half-filling sector
    below = sum(math.comb(L, M) for M in range((L + 1) // 2))
    assert sum(counts.values()) == below


def test_count_isolevel_rejects_half_filling():
    with pytest.raises(ValueError):
        count_isolevel(8, (0, 2))


# ---------------------------------------------------------------------------
# construction and I/O


def test_state_text_round_trip(tmp_path):
    from bbs.core import load_state, save_state

    s = State.from_text("010010")
    path = tmp_path / "eta.txt"
    save_state(s, path)
    assert load_state(path) == s


def test_state_validation():
    with pytest.raises(ValueError):
        State(np.array([0, 2, 1], np.uint8))
    with pytest.raises(ValueError):
        State.from_text("01x0")
    with pytest.raises(ValueError):
        Carrier(2, 3)


def test_trailing_zero_multiplicities_are_dropped():
    c = SolitonContent((1, 2, 0, 0), 20)
    assert c.multiplicities == (1, 2)
    assert c.s == 2 and c.genus == 3 and c.ball_count == 5
