"""Hydrodynamics of the soliton gas: dressing, effective velocities,
piecewise-constant domain-wall profiles and the diffusive broadening of
the steps between plateaux.

Normal modes are the filling fractions y_j = rho_j / sigma_j; a vector o
is dressed by o^dr = (1 + M diag(y))^{-1} o with the scattering shift
matrix M_kj = 2 min(k, j).  Everything is truncated at a maximum soliton
amplitude chosen so that the discarded fillings are below machine
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

_JMAX_CAP = 4096


def max_amplitude(z: float, l: int = 1, floor: int = 24) -> int:
    """Truncation amplitude: fillings decay like z^j, keep terms above
    double precision."""
    if not 0 < z < 1:
        raise ValueError("fugacity must lie in (0, 1)")
    j = int(math.ceil(-16 * math.log(10) / math.log(z)))
    return min(max(j, l + floor), _JMAX_CAP)


def iid_filling(z: float, jmax: int):
    """Occupancies n_j of the i.i.d. state with ball density z/(1+z)."""
    j = np.arange(1, jmax + 1)
    return z**j * (1 - z) ** 2 / (1 - z ** (j + 1)) ** 2


def filling_to_y(n):
    """Filling fraction y = rho/sigma from the occupancy n = rho/(rho+sigma)."""
    n = np.asarray(n, dtype=float)
    return n / (1 - n)


def dress(y, o):
    """o^dr = (1 + M diag(y))^{-1} o."""
    y = np.asarray(y, dtype=float)
    o = np.asarray(o, dtype=float)
    s = y.size
    idx = np.arange(1, s + 1)
    A = 2.0 * np.minimum.outer(idx, idx) * y[None, :]
    A[np.diag_indices(s)] += 1.0
    return np.linalg.solve(A, o)


def shift_matrix_dressed(y):
    """beta = (1 + M diag(y))^{-1} M, the dressed scattering shift."""
    y = np.asarray(y, dtype=float)
    s = y.size
    idx = np.arange(1, s + 1)
    M = 2.0 * np.minimum.outer(idx, idx)
    A = M * y[None, :]
    A[np.diag_indices(s)] += 1.0
    return np.linalg.solve(A, M)


def hole_densities(y):
    """sigma = 1^dr."""
    return dress(y, np.ones(len(y)))


def effective_velocities(y, l):
    """v_k = kappa^dr_k / 1^dr_k with bare speeds kappa_k = min(k, l)."""
    y = np.asarray(y, dtype=float)
    kappa = np.minimum(np.arange(1, y.size + 1), float(l))
    return dress(y, kappa) / hole_densities(y)


def conserved_charge(y, h):
    """q_h = sum_k h_k rho_k, computed as h^dr . y."""
    return float(dress(y, h) @ y)


# ---------------------------------------------------------------------------
# domain wall plateaux


@dataclass(frozen=True)
class Sector:
    """Constant patch of the ray-variable profile between two wave fronts."""

    index: int
    y: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    velocities: np.ndarray

    @property
    def height(self) -> float:
        j = np.arange(1, self.rho.size + 1)
        return float(j @ self.rho)


@dataclass(frozen=True)
class DomainWallSolution:
    """Piecewise-constant profile for a two-density initial state evolved
    by a capacity-l carrier.  Sector k occupies zeta(k) < r/t < zeta(k+1);
    sector 0 extends to -inf, sector l to +inf."""

    l: int
    sectors: tuple
    zetas: np.ndarray  # zeta(1..l)

    @property
    def heights(self):
        return np.array([sec.height for sec in self.sectors])

    def height_at(self, zeta: float) -> float:
        k = int(np.searchsorted(self.zetas, zeta, side="right"))
        return self.sectors[k].height

    def sector_at(self, zeta: float) -> Sector:
        return self.sectors[int(np.searchsorted(self.zetas, zeta, side="right"))]


def fugacity_from_density(p: float) -> float:
    if not 0 <= p < 0.5:
        raise ValueError("ball density must lie in [0, 1/2)")
    return p / (1 - p)


def solve_domain_wall(p_left: float, p_right: float, l: int,
                      jmax: int | None = None) -> DomainWallSolution:
    """Plateau structure emanating from an initial step between i.i.d.
    states of densities p_left (r <= 0) and p_right (r > 0).

    The filling of amplitude-j solitons jumps at the ray equal to their
    speed: sector k carries the right filling for j <= k and the left
    filling for j > k.  Boundaries are zeta(k) = v_k evaluated in sector
    k (equal to the sector k-1 value by current continuity).
    """
    if l < 1:
        raise ValueError("carrier capacity must be >= 1")
    if max(p_left, p_right) >= 0.5 or max(p_left, p_right) <= 0:
        raise ValueError("need 0 < max density < 1/2")
    zs = [fugacity_from_density(p) for p in (p_left, p_right) if p > 0]
    if jmax is None:
        jmax = max(max_amplitude(z, l) for z in zs)

    def y_of(p):
        if p == 0:
            return np.zeros(jmax)
        return filling_to_y(iid_filling(fugacity_from_density(p), jmax))

    yL, yR = y_of(p_left), y_of(p_right)
    sectors = []
    zetas = np.empty(l)
    for k in range(l + 1):
        if k == l:
            # beyond the fastest front all amplitudes j >= l travel
            # together, so the state is the plain right state
            y = yR
        else:
            y = np.where(np.arange(1, jmax + 1) <= k, yR, yL)
        sigma = hole_densities(y)
        v = effective_velocities(y, l)
        rho = y * sigma
        sectors.append(Sector(k, y, sigma, rho, v))
        if k >= 1:
            zetas[k - 1] = v[k - 1]
    if np.any(np.diff(zetas) < -1e-9):
        raise RuntimeError("wave fronts are not ordered; profile invalid")
    return DomainWallSolution(l, tuple(sectors), zetas)


# closed forms for the two one-sided cases -----------------------------------


def plateau_height_left(z: float, k: int) -> float:
    """Height of plateau k when the right half starts empty (independent
    of the carrier capacity; zero for k >= l)."""
    br = lambda j: 1 - z**j
    return (
        z ** (k + 1) * (br(k + 2) + k * br(1))
        / (br(2 * k + 3) + (2 * k + 1) * br(1) * z ** (k + 1))
    )


def plateau_position_left(z: float, l: int, k: int) -> float:
    """Wave front zeta(k) between plateaux k-1 and k (1 <= k <= l), right
    half empty, capacity-l carrier."""
    return (
        k * (1 - z ** (k + 1)) * (1 + z ** (l + 1))
        / ((1 + z ** (k + 1)) * (1 - z ** (l + 1)))
    )


def plateau_height_right(z: float, l: int, k: int) -> float:
    """Height of plateau k when the left half starts empty (0 <= k < l;
    the last plateau k = l has height z/(1+z))."""
    if k >= l:
        return z / (1 + z)
    br = lambda j: 1 - z**j
    return (
        z * (br(2 * k + 2) - (k + 1) * br(2) * z**k)
        / ((1 + z) * (br(2 * k + 3) - (2 * k + 3) * br(1) * z ** (k + 1)))
    )


def plateau_position_right(z: float, k: int) -> float:
    """Wave front zeta(k) for the left-empty case (independent of the
    carrier capacity for k <= l)."""
    zk = z ** (k + 1)
    return (1 + zk) / (1 - zk) * (
        k * (1 + z) / (1 - z) - 2 * z * (1 + z) * (1 - z**k) / ((1 - z) ** 2 * (1 + zk))
    )


# ---------------------------------------------------------------------------
# diffusive step widths


def step_width(solution: DomainWallSolution, k: int, side: str = "right") -> float:
    """Diffusive width Sigma_k of the front between plateaux k-1 and k:
    the front velocity variance satisfies t <(dv_k)^2> = Sigma_k^2 with

        Sigma_k^2 = sum_{i != k} (beta_ki / sigma_k)^2 |v_k - v_i|
                    sigma_i y_i (1 + y_i) / ...

    evaluated in the sector bordering the front (``side`` picks sector k,
    the default, or sector k-1; the two give the same value up to the
    discontinuity of y_k itself, which does not enter the sum)."""
    if not 1 <= k <= solution.l:
        raise ValueError(f"front index must be in 1..{solution.l}")
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    sec = solution.sectors[k if side == "right" else k - 1]
    y, sigma, v = sec.y, sec.sigma, sec.velocities
    beta = shift_matrix_dressed(y)
    i = np.arange(y.size) != (k - 1)
    var = np.sum(
        (beta[k - 1, i] / sigma[k - 1]) ** 2
        * np.abs(v[k - 1] - v[i])
        * sigma[i] * y[i] * (1 + y[i])
    )
    return float(math.sqrt(var))


def step_width_left_closed(z: float, l: int, k: int) -> float:
    """Closed-form width for the right-empty initial condition:
    2 Sigma^2 = 8 k^2 z^{k+1} (1-z^{k+1}) (1-z^{l-k}) (1+z^{l+k+2})
                / ((1+z^{k+1})^3 (1-z^{l+1})^2),  1 <= k <= l."""
    if not 1 <= k <= l:
        raise ValueError("front index must be in 1..l")
    zk = z ** (k + 1)
    var = (
        4 * k**2 * zk * (1 - zk) * (1 - z ** (l - k)) * (1 + z ** (l + k + 2))
        / ((1 + zk) ** 3 * (1 - z ** (l + 1)) ** 2)
    )
    return math.sqrt(var)


def step_profile(r, t: float, zeta: float, width: float,
                 h_left: float, h_right: float):
    """Sample-averaged density near a diffusively broadened front:
    <h(r,t)> = (h_left - h_right)/2 erfc(sqrt(t/2) (r/t - zeta)/Sigma)
               + h_right.
    In the collapse variable u = (r - zeta t)/sqrt(t) this is
    (h_left - h_right)/2 erfc(A u) + h_right with A = 1/sqrt(2 Sigma^2)."""
    r = np.asarray(r, dtype=float)
    if width == 0:
        return np.where(r / t < zeta, h_left, h_right) + 0.0 * r
    arg = math.sqrt(t / 2) * (r / t - zeta) / width
    return 0.5 * (h_left - h_right) * erfc(arg) + h_right


# ---------------------------------------------------------------------------
# structure checks of the hydrodynamic system


def velocity_self_derivative(y, l, k: int, step: float = 1e-5) -> float:
    """Finite-difference d v_k / d y_k; linear degeneracy demands zero."""
    y = np.asarray(y, dtype=float).copy()
    out = []
    for sgn in (+1, -1):
        yp = y.copy()
        yp[k - 1] += sgn * step
        out.append(effective_velocities(yp, l)[k - 1])
    return (out[0] - out[1]) / (2 * step)


def commuting_flow_defect(y, l, lp, step: float = 1e-5) -> float:
    """Max over (i, p) of the bracket
    (v_p - v_i) d_p v'_i - (v'_p - v'_i) d_p v_i
    whose vanishing makes the T_l and T_lp flows commute."""
    y = np.asarray(y, dtype=float)
    s = y.size
    v = effective_velocities(y, l)
    vp = effective_velocities(y, lp)

    def grad(ll):
        g = np.empty((s, s))
        for p in range(s):
            yp, ym = y.copy(), y.copy()
            yp[p] += step
            ym[p] -= step
            g[p] = (effective_velocities(yp, ll) - effective_velocities(ym, ll)) / (
                2 * step
            )
        return g  # g[p, i] = d v_i / d y_p

    gv, gvp = grad(l), grad(lp)
    worst = 0.0
    for p in range(s):
        for i in range(s):
            if p == i:
                continue
            br = (v[p] - v[i]) * gvp[p, i] - (vp[p] - vp[i]) * gv[p, i]
            worst = max(worst, abs(br))
    return worst
