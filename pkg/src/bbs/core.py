"""Exact box-ball dynamics: combinatorial R, carrier sweeps, commuting
time evolutions T_l, conserved energies and soliton content.

States live on a periodic 0/1 ring.  A capacity-l carrier sweeps the ring
once, loading balls from occupied boxes and dropping them into empty ones;
applying the sweep with the (unique, at density < 1/2) stationary carrier
realizes the time evolution T_l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

INF = math.inf


# ---------------------------------------------------------------------------
# combinatorial R on B_l x B_m


def apply_R(a, b):
    """Combinatorial R: B_l x B_m -> B_m x B_l.

    ``a = (x0, x1)`` with x0+x1 = l, ``b = (y0, y1)`` with y0+y1 = m.
    Returns ``(b~, a~)`` where the capacities have been exchanged.
    """
    x, y = tuple(a), tuple(b)
    if len(x) != 2 or len(y) != 2 or min(x) < 0 or min(y) < 0:
        raise ValueError(f"invalid tensor components {a!r}, {b!r}")
    xt = tuple(
        x[i] + min(x[(i + 1) % 2], y[i]) - min(x[i], y[(i + 1) % 2])
        for i in range(2)
    )
    yt = tuple(
        y[i] - min(x[(i + 1) % 2], y[i]) + min(x[i], y[(i + 1) % 2])
        for i in range(2)
    )
    return yt, xt


# ---------------------------------------------------------------------------
# states and carriers


@dataclass(frozen=True)
class Carrier:
    """Capacity-l carrier holding ``load`` balls, 0 <= load <= capacity."""

    capacity: int
    load: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("carrier capacity must be >= 1")
        if not 0 <= self.load <= self.capacity:
            raise ValueError(f"carrier load {self.load} outside [0, {self.capacity}]")


def carrier_step(c: Carrier, eta: int):
    """One box/carrier exchange. Returns (new carrier, outgoing box)."""
    n, l = c.load, c.capacity
    if eta == 1:
        if n < l:
            return Carrier(l, n + 1), 0
        return Carrier(l, l), 1
    if n > 0:
        return Carrier(l, n - 1), 1
    return Carrier(l, 0), 0


@dataclass(frozen=True)
class State:
    """0/1 configuration on a lattice of length L."""

    cells: np.ndarray
    boundary: str = "periodic"

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if cells.ndim != 1 or cells.size < 1:
            raise ValueError("state must be a nonempty 1-d array")
        if cells.max(initial=0) > 1:
            raise ValueError("cells must be 0/1")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        object.__setattr__(self, "cells", cells)
        self.cells.setflags(write=False)

    @property
    def L(self) -> int:
        return self.cells.size

    @property
    def ball_count(self) -> int:
        return int(self.cells.sum())

    @classmethod
    def from_text(cls, text: str, boundary: str = "periodic") -> "State":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError("state text must be a nonempty string of 0/1")
        return cls(np.frombuffer(text.encode(), dtype=np.uint8) - ord("0"), boundary)

    def to_text(self) -> str:
        return "".join("01"[c] for c in self.cells)

    def __eq__(self, other):
        return (
            isinstance(other, State)
            and self.boundary == other.boundary
            and np.array_equal(self.cells, other.cells)
        )


def load_state(path, boundary: str = "periodic") -> State:
    with open(path) as fh:
        return State.from_text(fh.read(), boundary)


def save_state(state: State, path) -> None:
    with open(path, "w") as fh:
        fh.write(state.to_text() + "\n")


# ---------------------------------------------------------------------------
# carrier sweeps (numba kernel + pure-python reference)


@njit(cache=True)
def _sweep(cells, l, n0, out, loads):
    """One left-to-right R_{l,1} sweep.  Writes the updated row to ``out``
    and the carrier load after each site to ``loads``; returns final load."""
    n = n0
    for i in range(cells.shape[0]):
        if cells[i] == 1:
            if n < l:
                out[i] = 0
                n += 1
            else:
                out[i] = 1
        else:
            if n > 0:
                out[i] = 1
                n -= 1
            else:
                out[i] = 0
        loads[i] = n
    return n


def _sweep_python(cells, l, n0):
    """Reference sweep built on carrier_step; for differential testing."""
    c = Carrier(l, n0)
    out = []
    loads = []
    for eta in cells:
        c, o = carrier_step(c, int(eta))
        out.append(o)
        loads.append(c.load)
    return np.array(out, dtype=np.uint8), np.array(loads), c.load


def _sweep_arrays(cells, l, n0):
    out = np.empty(cells.size, np.uint8)
    loads = np.empty(cells.size, np.int64)
    nfin = _sweep(cells, l, n0, out, loads)
    return out, loads, nfin


def _effective_capacity(state: State, l) -> int:
    if l is INF:
        return (state.L + 1) // 2
    l = int(l)
    if l < 1:
        raise ValueError("capacity must be >= 1 or INF")
    return l


def find_stationary_carrier(state: State, l) -> Carrier:
    """Stationary carrier c_l: the fixed point of the periodic sweep,
    produced by one pass starting from the empty carrier."""
    if state.boundary != "periodic":
        raise ValueError("stationary carrier requires a periodic state")
    if 2 * state.ball_count >= state.L:
        raise ValueError(
            "ball density >= 1/2: evolve() routes this case via complement"
        )
    l = _effective_capacity(state, l)
    _, _, nfin = _sweep_arrays(state.cells, l, 0)
    return Carrier(l, nfin)


def complement(state: State) -> State:
    """Ball/hole flip omega at every site (an involution)."""
    return State(1 - state.cells, state.boundary)


def evolve(state: State, l) -> State:
    """Time evolution T_l (l = INF for T_infinity).

    Density < 1/2: sweep with the stationary carrier.  Density > 1/2:
    conjugate by the complement.  Density exactly 1/2: double sweep from
    the empty carrier (the stationary carrier is not unique there but T_l
    is; the convention reproduces it and conserves balls).
    """
    l = _effective_capacity(state, l)
    if state.boundary == "open":
        out, _, _ = _sweep_arrays(state.cells, l, 0)
        return State(out, "open")
    M = state.ball_count
    if 2 * M > state.L:
        return complement(evolve(complement(state), l))
    _, _, n0 = _sweep_arrays(state.cells, l, 0)
    out, _, nfin = _sweep_arrays(state.cells, l, n0)
    if 2 * M < state.L and nfin != n0:
        raise AssertionError("carrier fixed point not reached")  # pragma: no cover
    return State(out, "periodic")


def energy(state: State, l) -> int:
    """Conserved l-th energy E_l = #{i : eta_i > T_l(eta)_i}."""
    return int(np.sum(state.cells > evolve(state, l).cells))


def bond_current(state: State, l, site=None):
    """Carrier load on the bond to the right of each site during the T_l
    sweep (the number of balls T_l moves across that bond).

    Returns the full length-L array, or a scalar when ``site`` is given.
    """
    leff = _effective_capacity(state, l)
    M = state.ball_count
    if 2 * M > state.L:
        # omega-conjugation: a carrier of capacity l on the complement
        # transports holes; balls crossing = l - holes crossing.
        loads = leff - bond_current(complement(state), l)
    else:
        _, _, n0 = _sweep_arrays(state.cells, leff, 0)
        _, loads, _ = _sweep_arrays(state.cells, leff, n0)
    return loads if site is None else int(loads[site])


# ---------------------------------------------------------------------------
# conserved data


@dataclass(frozen=True)
class SolitonContent:
    """Soliton multiplicities m_1..m_s together with the lattice length."""

    multiplicities: tuple
    lattice_length: int

    def __post_init__(self):
        m = tuple(int(v) for v in self.multiplicities)
        while m and m[-1] == 0:
            m = m[:-1]
        if any(v < 0 for v in m):
            raise ValueError(f"negative multiplicity in {m}")
        object.__setattr__(self, "multiplicities", m)

    @property
    def L(self) -> int:
        return self.lattice_length

    @property
    def s(self) -> int:
        return len(self.multiplicities)

    @property
    def ball_count(self) -> int:
        return sum(k * m for k, m in enumerate(self.multiplicities, start=1))

    @property
    def genus(self) -> int:
        return sum(self.multiplicities)

    def energy(self, l) -> int:
        """E_l = sum_k min(l, k) m_k (l may be INF)."""
        return sum(min(l, k) * m for k, m in enumerate(self.multiplicities, 1))

    def vacancy(self, j) -> int:
        """p_j = L - 2 E_j (j >= 0, j may be INF)."""
        return self.L - 2 * self.energy(j) if j else self.L

    def vacancies(self) -> list:
        """[p_0, p_1, ..., p_s]."""
        return [self.vacancy(j) for j in range(self.s + 1)]

    def young_diagram_rows(self) -> list:
        """Soliton amplitudes in weakly decreasing order."""
        rows = []
        for k in range(self.s, 0, -1):
            rows.extend([k] * self.multiplicities[k - 1])
        return rows


def soliton_content(state: State) -> SolitonContent:
    """Conserved multiplicities from second differences of the energies."""
    if 2 * state.ball_count > state.L:
        return soliton_content(complement(state))
    M = state.ball_count
    lmax = min(M, (state.L + 1) // 2) + 1
    E = [0] + [energy(state, l) for l in range(1, lmax + 1)]
    m = [-E[k - 1] + 2 * E[k] - E[k + 1] for k in range(1, lmax)]
    if any(v < 0 for v in m):  # guaranteed nonnegative; guard anyway
        raise AssertionError(f"negative content {m}")  # pragma: no cover
    return SolitonContent(tuple(m), state.L)


def count_isolevel(L: int, m) -> int:
    """Number of length-L states with soliton content m and sum(k m_k)
    balls (fermionic counting formula), as an exact integer."""
    content = m if isinstance(m, SolitonContent) else SolitonContent(tuple(m), L)
    if content.L != L:
        raise ValueError("content built for a different lattice length")
    M = content.ball_count
    if 2 * M >= L:
        raise ValueError("counting formula requires ball density < 1/2")
    total = Fraction(L, L - 2 * M)
    for j in range(1, content.s + 1):
        p = content.vacancy(j)
        total *= math.comb(p + content.multiplicities[j - 1] - 1,
                           content.multiplicities[j - 1])
    if total.denominator != 1:
        raise ValueError(f"non-integer count for m={content.multiplicities}, L={L}")
    return int(total)
