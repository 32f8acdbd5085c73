"""Monte Carlo harness: i.i.d. and domain-wall initial conditions,
bit-packed carrier evolution, density / current / step-width estimators.

Determinism: every sample draws from its own counter-based RNG stream
keyed by (master seed, sample index), and all accumulators are int64
counters, so results are bit-identical for any worker count or schedule.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import curve_fit
from scipy.special import erfc

from . import ghd
from .core import State, _sweep

# ---------------------------------------------------------------------------
# bit-packed carrier kernel
#
# States are stored as packed bytes (np.packbits, big-endian bit order: bit 7
# of byte 0 is site 0).  A byte-level lookup table advances the carrier over
# 8 sites at a time; this is what makes 10^4-sample, t ~ 10^3 runs feasible.

_TABLES: dict = {}


def carrier_byte_tables(l: int):
    """(next_load, out_byte) tables indexed by (load, input byte)."""
    if l in _TABLES:
        return _TABLES[l]
    tn = np.empty((l + 1, 256), np.uint8)
    tb = np.empty((l + 1, 256), np.uint8)
    for n0 in range(l + 1):
        for byte in range(256):
            n = n0
            out = 0
            for k in range(8):
                eta = (byte >> (7 - k)) & 1
                if eta:
                    if n < l:
                        n += 1
                    else:
                        out |= 1 << (7 - k)
                elif n > 0:
                    out |= 1 << (7 - k)
                    n -= 1
            tn[n0, byte] = n
            tb[n0, byte] = out
    _TABLES[l] = (tn, tb)
    return _TABLES[l]


@njit(cache=True, nogil=True)
def _packed_pass(pb, start, stop, n0, tn, tb):
    n = n0
    for i in range(start, stop):
        b = pb[i]
        pb[i] = tb[n, b]
        n = tn[n, b]
    return n


@njit(cache=True, nogil=True)
def _packed_load(pb, start, stop, n0, tn):
    n = n0
    for i in range(start, stop):
        n = tn[n, pb[i]]
    return n


@njit(cache=True, nogil=True)
def _last_nonzero(pb, hi):
    i = hi - 1
    while i >= 0 and pb[i] == 0:
        i -= 1
    return i + 1


class PackedEvolver:
    """Periodic T_l evolution on a bit-packed state.  When the tail of the
    ring is known to be empty (one-sided domain wall) only the active
    prefix is swept and a growing high-water mark tracks the front."""

    def __init__(self, cells: np.ndarray, l: int, tail_empty: bool = False):
        L = cells.size
        if L % 8:
            raise ValueError("packed evolution needs L divisible by 8")
        if 2 * int(cells.sum()) >= L:
            raise ValueError("packed evolution needs ball density < 1/2")
        self.L = L
        self.l = l
        self.nbytes = L // 8
        self.pb = np.packbits(cells)
        self.tn, self.tb = carrier_byte_tables(l)
        self.tail_empty = tail_empty
        self.hi = int(_last_nonzero(self.pb, self.nbytes)) if tail_empty else self.nbytes

    def step(self, nsteps: int = 1):
        grow = self.l // 8 + 2
        for _ in range(nsteps):
            if self.tail_empty:
                stop = min(self.nbytes, self.hi + grow)
                nfin = _packed_pass(self.pb, 0, stop, 0, self.tn, self.tb)
                if nfin != 0 or (stop == self.nbytes and self.pb[-1] != 0):
                    raise RuntimeError("front reached the lattice boundary")
                self.hi = int(_last_nonzero(self.pb, stop))
            else:
                n0 = _packed_load(self.pb, 0, self.nbytes, 0, self.tn)
                _packed_pass(self.pb, 0, self.nbytes, n0, self.tn, self.tb)

    def cells(self) -> np.ndarray:
        return np.unpackbits(self.pb)[: self.L]


# ---------------------------------------------------------------------------
# protocols and sampling


@dataclass(frozen=True)
class Protocol:
    """A reproducible ensemble run: lattice, carrier, initial densities,
    snapshot times and sampling plan.  The wall sits between lattice sites
    r = 0 and r = 1, with r = i - L//2."""

    L: int
    l: int
    p_left: float
    p_right: float
    times: tuple
    n_samples: int
    seed: int = 0
    bin_width: int = 64
    window: int = 256
    stride: int = 64
    fine_ranges: tuple = ()  # (start, stop) in r coordinates, per-site sums
    threads: int = 1
    safety_margin: int = 256

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(int(t) for t in self.times))
        object.__setattr__(self, "fine_ranges",
                           tuple((int(a), int(b)) for a, b in self.fine_ranges))
        if self.L < 16 or self.L % self.bin_width or self.L % 8:
            raise ValueError("L must be a multiple of 8 and of bin_width")
        if self.l < 1:
            raise ValueError("carrier capacity must be >= 1")
        for p in (self.p_left, self.p_right):
            if not 0 <= p < 0.5:
                raise ValueError("densities must lie in [0, 1/2)")
        if self.n_samples < 1:
            raise ValueError("need at least one sample")
        if not self.times or any(t < 0 for t in self.times) or list(
            self.times
        ) != sorted(self.times):
            raise ValueError("times must be a nondecreasing nonempty tuple")
        if self.max_front_speed() * max(self.times) + self.safety_margin > self.L // 2:
            raise ValueError(
                "lattice too small: fronts could wrap around the ring"
            )

    def max_front_speed(self) -> float:
        """Upper bound on any wave-front speed from either wall of the
        ring (the main wall at r = 0 and the seam at r = -L//2)."""
        speeds = [float(self.l)]
        for pl, pr in ((self.p_left, self.p_right), (self.p_right, self.p_left)):
            if max(pl, pr) > 0:
                speeds.append(float(ghd.solve_domain_wall(pl, pr, self.l).zetas[-1]))
        return max(speeds) + 1.0

    @property
    def wall_index(self) -> int:
        return self.L // 2

    def site_of(self, r: int) -> int:
        return r + self.wall_index


def sample_initial(protocol: Protocol, sample_index: int) -> np.ndarray:
    """i.i.d. Bernoulli cells: density p_left for r <= 0, p_right for
    r >= 1, drawn from the Philox stream keyed (seed, sample_index)."""
    rng = np.random.Generator(
        np.random.Philox(key=np.array([protocol.seed, sample_index],
                                      dtype=np.uint64))
    )
    u = rng.random(protocol.L)
    half = protocol.wall_index + 1  # sites r in [-L//2, 0]
    p = np.where(np.arange(protocol.L) < half, protocol.p_left, protocol.p_right)
    return (u < p).astype(np.uint8)


# ---------------------------------------------------------------------------
# accumulators and the run loop


@dataclass
class ProfileAccumulator:
    """Integer sums over samples: per-bin ball counts (with squares for
    error bars) and optional per-site counts on fine ranges."""

    protocol: Protocol
    n_samples: int = 0
    bin_sum: np.ndarray = None
    bin_sumsq: np.ndarray = None
    fine_sum: tuple = None

    def __post_init__(self):
        p = self.protocol
        nt, nb = len(p.times), p.L // p.bin_width
        if self.bin_sum is None:
            self.bin_sum = np.zeros((nt, nb), np.int64)
            self.bin_sumsq = np.zeros((nt, nb), np.int64)
            self.fine_sum = tuple(
                np.zeros((nt, b - a), np.int64) for a, b in p.fine_ranges
            )

    def add_sample(self, snapshots):
        p = self.protocol
        for ti, cells in enumerate(snapshots):
            bins = cells.reshape(-1, p.bin_width).sum(axis=1, dtype=np.int64)
            self.bin_sum[ti] += bins
            self.bin_sumsq[ti] += bins * bins
            for fr, (a, b) in zip(self.fine_sum, p.fine_ranges):
                fr[ti] += cells[p.site_of(a): p.site_of(b)]
        self.n_samples += 1

    def merge(self, other: "ProfileAccumulator"):
        self.n_samples += other.n_samples
        self.bin_sum += other.bin_sum
        self.bin_sumsq += other.bin_sumsq
        for mine, theirs in zip(self.fine_sum, other.fine_sum):
            mine += theirs

    # estimators ------------------------------------------------------------

    def ball_density(self, t_index: int):
        """(zeta, mean, stderr) of the binned ball density at a snapshot."""
        p = self.protocol
        N, w = self.n_samples, p.bin_width
        t = max(p.times[t_index], 1)
        centers = (np.arange(p.L // w) + 0.5) * w - p.wall_index
        mean = self.bin_sum[t_index] / (N * w)
        var = self.bin_sumsq[t_index] / N - (self.bin_sum[t_index] / N) ** 2
        stderr = np.sqrt(np.maximum(var, 0.0) / max(N - 1, 1)) / w
        return centers / t, mean, stderr

    def fine_profile(self, range_index: int, t_index: int):
        """(r, mean, stderr) per site on a fine range; Bernoulli errors."""
        p = self.protocol
        a, b = p.fine_ranges[range_index]
        N = self.n_samples
        mean = self.fine_sum[range_index][t_index] / N
        stderr = np.sqrt(mean * (1 - mean) / N)
        return np.arange(a, b), mean, stderr


def run_trajectory(cells: np.ndarray, protocol: Protocol):
    """Evolve one initial state, returning the cell arrays at the
    snapshot times."""
    ev = PackedEvolver(cells, protocol.l, tail_empty=(protocol.p_right == 0))
    out = []
    now = 0
    for t in protocol.times:
        ev.step(t - now)
        now = t
        out.append(ev.cells())
    return out


def run(protocol: Protocol) -> ProfileAccumulator:
    """Full ensemble run.  Worker threads only parallelize independent
    trajectories; the integer accumulators make the result independent of
    scheduling."""
    threads = protocol.threads or int(os.environ.get("BBS_THREADS", "1"))

    def one(k):
        acc = ProfileAccumulator(protocol)
        acc.add_sample(run_trajectory(sample_initial(protocol, k), protocol))
        return acc

    total = ProfileAccumulator(protocol)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for acc in pool.map(one, range(protocol.n_samples)):
                total.merge(acc)
    else:
        for k in range(protocol.n_samples):
            total.merge(one(k))
    return total


# ---------------------------------------------------------------------------
# windowed soliton content


def window_energies(cells: np.ndarray, lmax: int) -> np.ndarray:
    """E_1..E_lmax of an open-boundary window: for each capacity, one
    carrier pass starting empty; the energy counts sites where a ball is
    picked up and a hole written back."""
    out = np.empty(lmax, np.int64)
    buf = np.empty(cells.size, np.uint8)
    loads = np.empty(cells.size, np.int64)
    for l in range(1, lmax + 1):
        _sweep(cells, l, 0, buf, loads)
        out[l - 1] = int(np.sum(cells > buf))
    return out


def measure_soliton_density(cells: np.ndarray, jmax: int, window: int = 256,
                            stride: int = 64):
    """Window-averaged soliton densities rho_j(r): slide a width-`window`
    open-boundary window, extract its conserved content by second
    differences of the window energies, normalize by the window size.

    Windows straddling a front mix two macro-states; the estimate there is
    biased and should be read as such."""
    L = cells.size
    starts = np.arange(0, L - window + 1, stride)
    centers = starts + window / 2
    rho = np.empty((starts.size, jmax))
    for wi, s in enumerate(starts):
        E = window_energies(cells[s: s + window], jmax + 1)
        E = np.concatenate(([0], E))
        m = -E[:-2] + 2 * E[1:-1] - E[2:]
        rho[wi] = m / window
    return centers, rho


# ---------------------------------------------------------------------------
# homogeneous current and carrier statistics


@dataclass(frozen=True)
class CurrentMeasurement:
    mean: float
    stderr: float
    histogram: np.ndarray  # mean occupation of each carrier load 0..l
    histogram_stderr: np.ndarray
    n_samples: int


def measure_current(z: float, l: int, L: int, n_samples: int,
                    seed: int = 0) -> CurrentMeasurement:
    """Stationary T_l ball current in the i.i.d. state of fugacity z
    (density z/(1+z)), estimated from the stationary carrier loads of
    sampled states: the load on a bond is the number of balls T_l moves
    across it, so its spatial mean estimates the current and its histogram
    the stationary load distribution."""
    p = z / (1 + z)
    proto_rng = lambda k: np.random.Generator(
        np.random.Philox(key=np.array([seed, k], dtype=np.uint64))
    )
    means = np.empty(n_samples)
    hists = np.empty((n_samples, l + 1))
    buf = np.empty(L, np.uint8)
    loads = np.empty(L, np.int64)
    for k in range(n_samples):
        cells = (proto_rng(k).random(L) < p).astype(np.uint8)
        if 2 * int(cells.sum()) >= L:  # pragma: no cover
            raise RuntimeError("sampled state at or above half filling")
        n0 = _sweep(cells, l, 0, buf, loads)
        _sweep(cells, l, n0, buf, loads)
        means[k] = loads.mean()
        hists[k] = np.bincount(loads, minlength=l + 1)[: l + 1] / L
    return CurrentMeasurement(
        mean=float(means.mean()),
        stderr=float(means.std(ddof=1) / math.sqrt(n_samples)),
        histogram=hists.mean(axis=0),
        histogram_stderr=hists.std(axis=0, ddof=1) / math.sqrt(n_samples),
        n_samples=n_samples,
    )


# ---------------------------------------------------------------------------
# step fitting


@dataclass(frozen=True)
class StepFit:
    inverse_width: float  # A = 1 / sqrt(2 Sigma^2)
    center: float  # front offset in the collapse variable u
    width: float  # Sigma
    inverse_width_err: float


def fit_step(u, h, h_left: float, h_right: float) -> StepFit:
    """Fit h(u) = (h_left - h_right)/2 erfc(A (u - c)) + h_right in the
    collapse variable u = (r - zeta t) / sqrt(t)."""
    u = np.asarray(u, dtype=float)
    h = np.asarray(h, dtype=float)
    if u.size < 4:
        raise ValueError("need at least 4 points to fit a step")
    if abs(h_left - h_right) < 1e-12:
        raise ValueError("degenerate step: equal plateau heights")

    def model(x, A, c):
        return 0.5 * (h_left - h_right) * erfc(A * (x - c)) + h_right

    span = max(abs(u).max(), 1.0)
    (A, c), cov = curve_fit(model, u, h, p0=(1.0 / span, 0.0))
    A = abs(float(A))
    if A == 0:
        raise ValueError("fit collapsed to zero inverse width")
    return StepFit(
        inverse_width=A,
        center=float(c),
        width=1.0 / (A * math.sqrt(2.0)),
        inverse_width_err=float(np.sqrt(cov[0, 0])),
    )
