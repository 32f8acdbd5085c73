"""Tropical period matrix, its closed-form inverse, the speed equation
and exact time-averaged soliton currents.

All routines here work in exact rational arithmetic on a finite periodic
lattice.  The period matrix B is g x g (g = total number of solitons) but
is constant on m_i x m_j blocks, so everything is computed in the
block-compressed s x s form; the full matrix is only materialized on
request for small systems.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .core import INF, SolitonContent, State, bond_current, evolve, soliton_content


def _as_content(content, L=None) -> SolitonContent:
    if isinstance(content, SolitonContent):
        return content
    return SolitonContent(tuple(content), L)


def solve_linear_exact(A, b):
    """Solve A x = b over the rationals by Gaussian elimination with
    partial pivoting.  A is a list of lists, b a list; entries are
    converted to Fraction."""
    n = len(A)
    M = [[Fraction(A[i][j]) for j in range(n)] + [Fraction(b[i])] for i in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if M[piv][col] == 0:
            raise ValueError("singular system")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [vr - f * vc for vr, vc in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


# ---------------------------------------------------------------------------
# period matrix and inverse


def period_matrix(content) -> list:
    """Full g x g tropical period matrix
    B_{(i a),(j b)} = delta_ij delta_ab p_i + 2 min(i,j),
    rows and columns ordered by amplitude then by copy index."""
    c = _as_content(content)
    amps = [i for i in range(1, c.s + 1) for _ in range(c.multiplicities[i - 1])]
    p = c.vacancies()
    return [
        [
            (p[amps[a]] if a == b else 0) + 2 * min(amps[a], amps[b])
            for b in range(len(amps))
        ]
        for a in range(len(amps))
    ]


def inverse_offsets(content) -> list:
    """The numbers x_1..x_s parameterizing the inverse period matrix
    X_{(i a),(j b)} = delta_ij delta_ab / p_i + x_min(i,j),
    namely x_k = -sum_{j<=k} 2/(p_{j-1} p_j).  Exact Fractions."""
    c = _as_content(content)
    p = c.vacancies()
    x, acc = [], Fraction(0)
    for j in range(1, c.s + 1):
        acc -= Fraction(2, p[j - 1] * p[j])
        x.append(acc)
    return x


def inverse_period_matrix(content) -> list:
    """Full g x g inverse of the period matrix, exact Fractions."""
    c = _as_content(content)
    amps = [i for i in range(1, c.s + 1) for _ in range(c.multiplicities[i - 1])]
    p = c.vacancies()
    x = inverse_offsets(c)
    return [
        [
            (Fraction(1, p[amps[a]]) if a == b else Fraction(0))
            + x[min(amps[a], amps[b]) - 1]
            for b in range(len(amps))
        ]
        for a in range(len(amps))
    ]


def inverse_residual(content) -> Fraction:
    """Max absolute entry of B X - I, evaluated through the
    block-compressed s x s identity
    p_i x_min(i,j) + 2 min(i,j)/p_j + 2 sum_k min(i,k) m_k x_min(j,k) = 0
    (zero iff the closed-form inverse is exact).  Never builds the g x g
    matrices, so it stays cheap at large genus."""
    c = _as_content(content)
    m = c.multiplicities
    p = c.vacancies()
    x = inverse_offsets(c)
    worst = Fraction(0)
    for i in range(1, c.s + 1):
        for j in range(1, c.s + 1):
            r = p[i] * x[min(i, j) - 1] + Fraction(2 * min(i, j), p[j])
            r += 2 * sum(
                min(i, k) * m[k - 1] * x[min(j, k) - 1] for k in range(1, c.s + 1)
            )
            worst = max(worst, abs(r))
    return worst


# ---------------------------------------------------------------------------
# speed equation


def solve_speeds(content, l) -> list:
    """Speeds v^(l)_1..v^(l)_s from the speed equation
    p_i v_i + sum_j 2 min(i,j) m_j v_j = L min(i,l),
    the block-compressed form of B vhat = L kappahat^(l).  Exact."""
    c = _as_content(content)
    m = c.multiplicities
    p = c.vacancies()
    A = [
        [(p[i] if i == j else 0) + 2 * min(i, j) * m[j - 1] for j in range(1, c.s + 1)]
        for i in range(1, c.s + 1)
    ]
    b = [c.L * min(i, l) for i in range(1, c.s + 1)]
    return solve_linear_exact(A, b)


def speeds_from_vacancies(content, l) -> list:
    """Same speeds via the closed form v^(l)_k = sum_{j<=min(k,l)}
    sigma_l / (sigma_{j-1} sigma_j) with sigma_j = p_j / L (exact at
    finite L)."""
    c = _as_content(content)
    sig = [Fraction(pj, c.L) for pj in c.vacancies()]
    sl = Fraction(c.vacancy(l), c.L)
    out = []
    for k in range(1, c.s + 1):
        kl = min(k, l)
        out.append(sum((sl / (sig[j - 1] * sig[j]) for j in range(1, kl + 1)),
                       Fraction(0)))
    return out


def average_current(content, l) -> Fraction:
    """Exact time-averaged current of T_l on the isolevel set of the given
    content: J = sum_i i (m_i / L) v^(l)_i = kappahat_inf^T B^{-1}
    kappahat^(l)."""
    c = _as_content(content)
    v = solve_speeds(c, l)
    return sum(
        Fraction(i * c.multiplicities[i - 1], c.L) * v[i - 1]
        for i in range(1, c.s + 1)
    )


def empirical_average_current(state: State, l, min_steps: int = 10_000) -> Fraction:
    """Time average of the ball flow through bond 0 under T_l, taken over
    exact whole trajectory periods so the average is exactly rational.

    The trajectory of a periodic state is itself periodic; we locate the
    recurrence time, then average the bond current over enough full
    periods to span at least ``min_steps`` sweeps.
    """
    start = state
    total, period = 0, 0
    t = state
    while True:
        total += int(bond_current(t, l, site=0))
        t = evolve(t, l)
        period += 1
        if t == start:
            break
        if period > 10_000_000:  # pragma: no cover
            raise RuntimeError("trajectory period not found")
    reps = max(1, -(-min_steps // period))
    return Fraction(reps * total, reps * period)


# ---------------------------------------------------------------------------
# two-temperature closed forms


def speed_two_temperature(a: float, z: float, l, k: int) -> float:
    """Effective speed of k-solitons under T_l in the two-parameter GGE
    with fugacities (a, z)."""

    def v(i):
        return (1 + a) * i / (1 - a) - 2 * a * (1 + z) * (1 - z**i) / (
            (1 - a) * (1 - z) * (1 + a * z**i)
        )

    if l is INF:
        return v(k)
    return (1 + a * z**l) / (1 - a * z**l) * v(min(k, l))


def current_two_temperature(a: float, z: float, l) -> float:
    """Time-averaged T_l ball current in the two-parameter GGE."""
    if l is INF:
        return a * (1 + z) / ((1 + a) * (1 - z))
    zl = z**l
    return (
        a * (1 + z) / ((1 + a) * (1 - z)) * (1 - (1 - a) * zl / (1 - a * zl))
        - l * a * zl / (1 - a * zl)
    )


def current_one_temperature(z: float, l: int) -> float:
    """T_l current in the single-fugacity (a -> 1) state, density
    p = z/(1+z)."""
    zl = z**l
    return z * (1 - zl - l * zl * (1 - z)) / ((1 - z) * (1 - z ** (l + 1)))
