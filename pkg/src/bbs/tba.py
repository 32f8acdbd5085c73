"""Thermodynamics of generalized Gibbs ensembles over soliton content:
the constant Y-system, its closed-form solution for two temperatures,
low-temperature power series and the transfer-matrix route to the free
energy.

Conventions: inverse temperatures beta_1..beta_s couple to the energies
E_1..E_s; beta_inf couples to the total ball number.  The regime of
interest is beta_j >= 0 (fugacities in (0, 1]).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


# ---------------------------------------------------------------------------
# Y-system solver


def _log1pexp(x):
    """log(1 + e^x), stable for large |x|."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))),
                    np.log1p(np.exp(np.minimum(x, 0.0))))


def solve_y_system(betas, tol: float = 1e-12, max_iter: int = 100_000,
                   damping: float = 0.5):
    """Solve the constant Y-system

        Y_1^2 = e^{b_1} (1 + Y_2)
        Y_i^2 = e^{b_i} (1 + Y_{i-1}) (1 + Y_{i+1})   (1 < i < s)
        Y_s^2 = e^{b_s} (1 + Y_{s-1}) (1 + Y_s)

    for the positive solution, by damped fixed-point iteration on log Y.
    Returns log Y as an array of length s (Y itself can overflow a float
    for strongly weighted large amplitudes)."""
    b = np.asarray(betas, dtype=float)
    s = b.size
    if s < 1:
        raise ValueError("need at least one temperature")
    ly = np.zeros(s)
    for it in range(max_iter):
        lp = _log1pexp(ly)  # log(1 + Y_i)
        new = np.empty(s)
        if s == 1:
            new[0] = b[0] + lp[0]
        else:
            new[0] = b[0] + lp[1]
            new[1:-1] = b[1:-1] + lp[:-2] + lp[2:]
            new[-1] = b[-1] + lp[-2] + lp[-1]
        new *= 0.5
        step = np.max(np.abs(new - ly))
        ly = damping * new + (1 - damping) * ly
        if step < tol:
            return ly
    raise RuntimeError(f"Y-system not converged after {max_iter} iterations")


def y_system_residual(betas, log_y):
    """Max absolute defect of the Y-system relations, evaluated in log
    space so that astronomically large Y_i are handled exactly."""
    b = np.asarray(betas, dtype=float)
    ly = np.asarray(log_y, dtype=float)
    s = b.size
    lp = _log1pexp(ly)
    res = np.empty(s)
    if s == 1:
        res[0] = 2 * ly[0] - b[0] - lp[0]
    else:
        res[0] = 2 * ly[0] - b[0] - lp[1]
        res[1:-1] = 2 * ly[1:-1] - b[1:-1] - lp[:-2] - lp[2:]
        res[-1] = 2 * ly[-1] - b[-1] - lp[-2] - lp[-1]
    return float(np.max(np.abs(res)))


def free_energy_from_y(log_y) -> float:
    """F = -sum_i log(1 + 1/Y_i)."""
    ly = np.asarray(log_y, dtype=float)
    return float(-np.sum(_log1pexp(-ly)))


def densities_from_y(log_y):
    """Soliton densities rho_i from Y_i = sigma_i / rho_i together with
    sigma_i = 1 - 2 sum_j min(i,j) rho_j, i.e. the linear system
    (delta_ij Y_i + 2 min(i,j)) rho = 1."""
    ly = np.asarray(log_y, dtype=float)
    s = ly.size
    idx = np.arange(1, s + 1)
    A = np.minimum.outer(idx, idx) * 2.0
    A[np.diag_indices(s)] += np.exp(np.minimum(ly, 700.0))
    return np.linalg.solve(A, np.ones(s))


# ---------------------------------------------------------------------------
# two-temperature closed forms


@dataclass(frozen=True)
class TwoTemperatureGGE:
    """Stationary state weighted by e^{-beta_1 E_1 - beta_inf E_inf},
    parameterized by the fugacity pair 0 < a <= z < 1."""

    a: float
    z: float

    def __post_init__(self):
        if not (0 < self.a <= self.z < 1):
            raise ValueError(f"need 0 < a <= z < 1, got a={self.a}, z={self.z}")

    @classmethod
    def from_betas(cls, beta1: float, beta_inf: float) -> "TwoTemperatureGGE":
        if beta1 < 0 or beta_inf <= 0:
            raise ValueError("need beta1 >= 0 and beta_inf > 0")
        z = math.exp(-beta_inf)
        q = math.exp(beta1 / 2) * (1 / math.sqrt(z) - math.sqrt(z))
        u = (-q + math.sqrt(q * q + 4)) / 2
        return cls(u * u, z)

    @classmethod
    def from_density(cls, density: float) -> "TwoTemperatureGGE":
        """Single-fugacity (beta1 = 0) state with the given ball density
        < 1/2, i.e. a = z = p/(1-p); site occupations are then i.i.d."""
        if not 0 < density < 0.5:
            raise ValueError("density must lie in (0, 1/2)")
        zz = density / (1 - density)
        return cls(zz, zz)

    @property
    def beta1(self) -> float:
        return 2 * math.log(self.q_function(0))

    @property
    def beta_inf(self) -> float:
        return -math.log(self.z)

    def q_function(self, i) -> float:
        """Q_i, satisfying Q_i^2 = Q_{i-1} Q_{i+1} + 1."""
        a, z = self.a, self.z
        return (math.sqrt(a * z**i) - 1 / math.sqrt(a * z**i)) / (
            math.sqrt(z) - 1 / math.sqrt(z)
        )

    def log_y(self, i) -> float:
        """log Y_i = log(Q_{i-1} Q_{i+1}) without overflow."""

        def logq(j):
            a, z = self.a, self.z
            # Q_j = (1 - a z^j) / (a^{1/2} z^{j/2} (1 - z) z^{-1/2}) ... keep
            # it direct: log Q_j = log(1 - a z^j) - (j-1)/2 log z - log(1-z)
            # - log(a^{1/2}) since Q_j = (1-a z^j) / ((1-z) sqrt(a z^{j-1})).
            return (
                math.log1p(-a * z**j)
                - math.log1p(-z)
                - 0.5 * (math.log(a) + (j - 1) * math.log(z))
            )

        return logq(i - 1) + logq(i + 1)

    def boundary_beta(self, s: int) -> float:
        """Exact closing temperature e^{beta_s} = (Q_{s+1}/Q_s)^2 that
        makes the finite-s Y-system reproduce the infinite-s solution."""
        a, z = self.a, self.z
        return 2 * (
            math.log1p(-a * z ** (s + 1)) - math.log1p(-a * z**s) - 0.5 * math.log(z)
        )

    def truncated_betas(self, s: int):
        """(beta_1, 0, ..., 0, beta_s) closing the system exactly at s."""
        b = np.zeros(s)
        b[0] = self.beta1
        b[-1] += self.boundary_beta(s)
        return b

    # stationary densities -------------------------------------------------

    @property
    def ball_density(self) -> float:
        return self.a / (1 + self.a)

    @property
    def free_energy(self) -> float:
        return math.log((1 - self.a) / (1 - self.a * self.z))

    def energy_density(self, i) -> float:
        a, z = self.a, self.z
        if i is math.inf:
            return self.ball_density
        return a * (1 - z**i) / ((1 + a) * (1 - a * z**i))

    def hole_density(self, i) -> float:
        a, z = self.a, self.z
        return (1 - a) * (1 + a * z**i) / ((1 + a) * (1 - a * z**i))

    def soliton_density(self, i) -> float:
        a, z = self.a, self.z
        return (
            a * z ** (i - 1) * (1 - a) * (1 - z) ** 2 * (1 + a * z**i)
            / (
                (1 + a)
                * (1 - a * z ** (i - 1))
                * (1 - a * z**i)
                * (1 - a * z ** (i + 1))
            )
        )

    def carrier_load_distribution(self, l: int):
        """Stationary distribution of the load of a capacity-l carrier."""
        a, z = self.a, self.z
        norm = (1 + a) * (1 - a * z**l)
        P = np.empty(l + 1)
        P[0] = (1 - a * z) / norm
        for n in range(1, l):
            P[n] = a * z ** (n - 1) * (1 - z * z) / norm
        P[l] = a * z ** (l - 1) * (1 - a * z) / norm
        return P


# ---------------------------------------------------------------------------
# low-temperature power series


def _pochhammer(x: int, n: int) -> Fraction:
    out = Fraction(1)
    for k in range(n):
        out *= x + k
    return out


def _det_fraction(rows) -> Fraction:
    n = len(rows)
    M = [list(map(Fraction, r)) for r in rows]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        inv = 1 / M[col][col]
        for r in range(col + 1, n):
            if M[r][col] != 0:
                f = M[r][col] * inv
                for c in range(col, n):
                    M[r][c] -= f * M[col][c]
    return det


def _multi_indices(s: int, degree: int):
    """All m in Z_{>=0}^s with sum_j j * m_j <= degree."""

    def rec(j, budget):
        if j > s:
            yield ()
            return
        for mj in range(budget // j + 1):
            for rest in rec(j + 1, budget - j * mj):
                yield (mj,) + rest

    yield from rec(1, degree)


def _term_coefficient(m, mu, s):
    """Coefficient of w^m in Q_1^{mu_1} .. Q_s^{mu_s}."""
    H = [j for j in range(1, s + 1) if m[j - 1] > 0]
    q = [
        sum(min(j, k) * (mu[k - 1] - 2 * m[k - 1]) for k in range(1, s + 1))
        for j in range(1, s + 1)
    ]
    coeff = Fraction(1)
    for j in H:
        coeff *= _pochhammer(q[j - 1] + 1, m[j - 1] - 1)
        coeff /= math.factorial(m[j - 1])
    F = [
        [
            (q[j - 1] if j == k else 0) + 2 * min(j, k) * m[k - 1]
            for k in H
        ]
        for j in H
    ]
    return coeff * _det_fraction(F)


def q_power_series(mu, s: int, degree: int) -> dict:
    """Power series of Q_1^{mu_1} .. Q_s^{mu_s} in w_1..w_s as a map from
    exponent tuples m (graded by sum j m_j <= degree) to exact rational
    coefficients."""
    mu = tuple(mu) + (0,) * (s - len(tuple(mu)))
    return {m: _term_coefficient(m, mu, s) for m in _multi_indices(s, degree)}


def _bar_term(m, s, weight_fn):
    """Shared kernel of the log Q_1 and rho_i series: coefficient
    (prod_j (qbar_j + 1)_{m_j - 1} / m_j!) sum_{r in H} det(Fbar)_{H - r},
    times weight_fn(m)."""
    H = [j for j in range(1, s + 1) if m[j - 1] > 0]
    if not H:
        return Fraction(0)
    q = [
        -2 * sum(min(j, k) * m[k - 1] for k in range(1, s + 1))
        for j in range(1, s + 1)
    ]
    coeff = Fraction(1)
    for j in H:
        coeff *= _pochhammer(q[j - 1] + 1, m[j - 1] - 1)
        coeff /= math.factorial(m[j - 1])
    dets = Fraction(0)
    for r in H:
        sub = [j for j in H if j != r]
        F = [
            [(q[j - 1] if j == k else 0) + 2 * min(j, k) * m[k - 1] for k in sub]
            for j in sub
        ]
        dets += _det_fraction(F)
    return coeff * dets * weight_fn(m)


def log_q1_series(s: int, degree: int) -> dict:
    """Power series of log Q_1 = -F (minus the free energy)."""
    return {
        m: _bar_term(m, s, lambda _: Fraction(1))
        for m in _multi_indices(s, degree)
        if any(m)
    }


def rho_series(i: int, s: int, degree: int) -> dict:
    """Power series of the i-soliton density rho_i = w_i d(log Q_1)/dw_i."""
    return {
        m: _bar_term(m, s, lambda mm: Fraction(mm[i - 1]))
        for m in _multi_indices(s, degree)
        if m[i - 1] > 0
    }


def fugacity_weights(betas):
    """w_i = e^{-sum_j min(i,j) beta_j} for i = 1..s."""
    b = np.asarray(betas, dtype=float)
    idx = np.arange(1, b.size + 1)
    return np.exp(-(np.minimum.outer(idx, idx) @ b))


def evaluate_series(coeffs: dict, w) -> float:
    """Evaluate a power series at the point w = (w_1..w_s), summing terms
    by total degree and checking that the tail is decaying (guards against
    use outside the convergence radius)."""
    w = np.asarray(w, dtype=float)
    by_degree = {}
    for m, c in coeffs.items():
        d = sum(j * mj for j, mj in enumerate(m, 1))
        term = float(c)
        for wi, mi in zip(w, m):
            if mi:
                term *= wi**mi
        by_degree[d] = by_degree.get(d, 0.0) + term
    degs = sorted(by_degree)
    tail = [abs(by_degree[d]) for d in degs[-3:]]
    if len(tail) == 3 and tail[-1] > tail[0] and tail[-1] > 1e-12:
        raise ValueError("series does not appear to converge at this point")
    return float(sum(by_degree[d] for d in degs))


# ---------------------------------------------------------------------------
# transfer matrix


def carrier_vertex_matrices(l: int, beta_l: float):
    """(V_0, V_1): (l+1) x (l+1) weights of a capacity-l carrier absorbing
    a 0 or a 1; entry (n, n') is nonzero iff the carrier rule sends load n
    to n', with a Boltzmann factor e^{-beta_l} whenever the incoming ball
    overtakes the outgoing site value."""
    V0 = np.zeros((l + 1, l + 1))
    V1 = np.zeros((l + 1, l + 1))
    for n in range(l + 1):
        if n > 0:
            V0[n, n - 1] = 1.0  # emits a 1: eta=0 not above it
        else:
            V0[0, 0] = 1.0
        if n < l:
            V1[n, n + 1] = math.exp(-beta_l)  # emits a 0: eta=1 above it
        else:
            V1[l, l] = 1.0
    return V0, V1


def gge_transfer_matrix(betas, beta_inf: float):
    """Transfer matrix V = (x)V_0 + e^{-beta_inf} (x)V_1 whose largest
    eigenvalue gives e^{-F} for GGE(beta_1..beta_r, beta_inf).  Dimension
    (r+1)!, so this route is only practical for small r."""
    betas = list(betas)
    T0 = np.ones((1, 1))
    T1 = np.ones((1, 1))
    for l, b in enumerate(betas, start=1):
        V0, V1 = carrier_vertex_matrices(l, b)
        T0 = np.kron(T0, V0)
        T1 = np.kron(T1, V1)
    return T0 + math.exp(-beta_inf) * T1


def largest_eigenvalue(V, tol: float = 1e-14, max_iter: int = 100_000) -> float:
    """Perron-Frobenius eigenvalue of a nonnegative matrix by power
    iteration."""
    V = np.asarray(V, dtype=float)
    x = np.ones(V.shape[0]) / V.shape[0]
    lam = 0.0
    for _ in range(max_iter):
        y = V @ x
        new = float(np.linalg.norm(y))
        if new == 0:
            return 0.0
        x = y / new
        if abs(new - lam) < tol * max(1.0, new):
            return new
        lam = new
    raise RuntimeError("power iteration did not converge")
