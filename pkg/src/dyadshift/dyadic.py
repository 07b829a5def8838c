"""Randomly shifted dyadic grids, good/bad cubes, and cube geometry.

All geometry is exact: positions are integers in units of 2^-(k_max+1), so a
cube of generation k has sidelength 2^(k_max+1-k) units (always even, which
keeps the corners of odd concentric dilates on the integer lattice).

The grid model truncates the random shift to the window's scale range: a
translation parameter omega assigns one bit vector per generation j in
(k_min, k_max], and a cube of generation k is translated by
sum_{j>k} 2^-j omega_j.  Badness of a cube is measured against the full grid
skeleton of every admissible coarser generation >= k_min; the spatial window
only bounds which cubes are enumerated.  This keeps the badness frequency
identical for every cube of a given generation and makes position and badness
exactly independent (they are driven by disjoint bits of omega).
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass

import numpy as np


class ScaleRangeError(ValueError):
    """An operation needed generations outside the window's scale range."""


class WindowTruncationError(RuntimeError):
    """A required containing cube does not exist inside the window."""


@dataclass(frozen=True)
class Cube:
    """Dyadic cube of generation k with integer index l (one entry per axis).

    The unshifted cube is prod_i [l_i 2^-k, (l_i+1) 2^-k)."""

    k: int
    l: tuple

    @property
    def sidelength(self) -> float:
        return 2.0 ** (-self.k)


@dataclass(frozen=True)
class Window:
    """Spatial box [0, 2^L)^d with generations k_min..k_max."""

    d: int
    L: int
    k_min: int
    k_max: int

    def __post_init__(self):
        if self.d < 1:
            raise ScaleRangeError("dimension must be >= 1")
        if self.k_max < self.k_min:
            raise ScaleRangeError("k_max < k_min")
        if -self.k_min > self.L:
            raise ScaleRangeError(
                "coarsest cubes do not fit in the window (need L >= -k_min)"
            )

    @property
    def unit_exp(self) -> int:
        # exponent of the integer unit: lengths are multiples of 2^-(k_max+1)
        return self.k_max + 1

    def len_units(self, k: int) -> int:
        if not (self.k_min <= k <= self.k_max):
            raise ScaleRangeError(f"generation {k} outside [{self.k_min}, {self.k_max}]")
        return 1 << (self.unit_exp - k)

    @property
    def extent_units(self) -> int:
        return 1 << (self.unit_exp + self.L)

    @property
    def n_shift_bits(self) -> int:
        return self.k_max - self.k_min


class DyadicGrid:
    """A dyadic grid determined by a window and a translation parameter.

    omega has shape (k_max - k_min, d); row jr holds the bits of generation
    j = k_min + 1 + jr.
    """

    def __init__(self, window: Window, omega: np.ndarray | None = None):
        self.window = window
        n = window.n_shift_bits
        if omega is None:
            omega = np.zeros((n, window.d), dtype=np.int64)
        omega = np.asarray(omega, dtype=np.int64)
        if omega.shape != (n, window.d) or not np.isin(omega, (0, 1)).all():
            raise ValueError(f"omega must be a 0/1 array of shape {(n, window.d)}")
        self.omega = omega
        # weight of bit row jr (generation j = k_min+1+jr) in integer units
        j = window.k_min + 1 + np.arange(n)
        self._bit_units = (1 << (window.unit_exp - j)).astype(np.int64)
        self._weighted = self._bit_units[:, None] * self.omega

    @classmethod
    def random(cls, window: Window, seed) -> "DyadicGrid":
        rng = np.random.default_rng(seed)
        omega = rng.integers(0, 2, size=(window.n_shift_bits, window.d))
        return cls(window, omega)

    def shift_units(self, k: int) -> np.ndarray:
        """Translation applied to generation-k cubes, in integer units."""
        w = self.window
        if not (w.k_min <= k <= w.k_max):
            raise ScaleRangeError(f"generation {k} outside window scale range")
        jr0 = k - w.k_min  # rows with j > k
        return self._weighted[jr0:].sum(axis=0)

    def cube_box(self, cube: Cube) -> tuple[np.ndarray, np.ndarray]:
        """Shifted cube as (lo, hi) integer-unit corners."""
        w = self.window
        side = w.len_units(cube.k)
        lo = np.asarray(cube.l, dtype=np.int64) * side + self.shift_units(cube.k)
        return lo, lo + side

    def in_window(self, cube: Cube) -> bool:
        lo, hi = self.cube_box(cube)
        return bool((lo >= 0).all() and (hi <= self.window.extent_units).all())

    def cubes_touching(self, k: int, lo_units, hi_units):
        """All generation-k cubes of the grid whose closed shifted box meets
        the given integer-unit box, clipped to the window."""
        w = self.window
        side = w.len_units(k)
        shift = self.shift_units(k)
        lo_units = np.asarray(lo_units, dtype=np.int64)
        hi_units = np.asarray(hi_units, dtype=np.int64)
        ranges = []
        for i in range(w.d):
            # overlap: l*side + shift + side > lo  and  l*side + shift < hi
            l_lo = (int(lo_units[i]) - int(shift[i]) - side) // side + 1
            l_hi = -((-(int(hi_units[i]) - int(shift[i]))) // side) - 1  # inclusive
            # window: corner >= 0 and far corner <= extent
            l_lo = max(l_lo, -(int(shift[i]) // side))
            l_hi = min(l_hi, (w.extent_units - int(shift[i]) - side) // side)
            ranges.append(range(l_lo, l_hi + 1))
        for tup in itertools.product(*ranges):
            yield Cube(k, tuple(tup))

    def cubes_at_scale(self, k: int):
        return self.cubes_touching(k, np.zeros(self.window.d, dtype=np.int64),
                                   np.full(self.window.d, self.window.extent_units,
                                           dtype=np.int64))

    def ancestor(self, cube: Cube, k: int) -> Cube:
        """Generation-k cube of this grid containing the given cube (k <= cube.k)."""
        if k > cube.k:
            raise ValueError("ancestor generation must be coarser")
        lo, _ = self.cube_box(cube)
        side = self.window.len_units(k)
        shift = self.shift_units(k)
        l = tuple(int(v) for v in (lo - shift) // side)
        return Cube(k, l)

    def dilate_box(self, cube: Cube, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Concentric m-fold dilate mI in integer units (m odd)."""
        lo, hi = self.cube_box(cube)
        half_growth = (m - 1) * (hi[0] - lo[0]) // 2
        return lo - half_growth, hi + half_growth


def box_dist(lo_a, hi_a, lo_b, hi_b) -> int:
    """sup-norm distance between two closed boxes, in integer units."""
    gaps = np.maximum(np.maximum(lo_b - hi_a, lo_a - hi_b), 0)
    return int(gaps.max())


def boundary_dist(grid: DyadicGrid, cube: Cube, k_coarse: int) -> int:
    """Distance from the shifted cube to the union of boundaries of all
    generation-k_coarse cubes of the same grid (the grid skeleton)."""
    w = grid.window
    lo, hi = grid.cube_box(cube)
    side_c = w.len_units(k_coarse)
    off = (lo - grid.shift_units(k_coarse)) % side_c
    side = hi[0] - lo[0]
    per_axis = np.minimum(off, side_c - off - side)
    return int(per_axis.min())


def long_distance(grid: DyadicGrid, a: Cube, b: Cube) -> float:
    """D(I, J) = len(I) + dist(I, J) + len(J)."""
    lo_a, hi_a = grid.cube_box(a)
    lo_b, hi_b = grid.cube_box(b)
    units = box_dist(lo_a, hi_a, lo_b, hi_b) + (hi_a[0] - lo_a[0]) + (hi_b[0] - lo_b[0])
    return units * 2.0 ** (-grid.window.unit_exp)


def ancestor_join(grid: DyadicGrid, fine: Cube, coarse: Cube, m: int,
                  ) -> tuple[Cube, int, int]:
    """Smallest grid cube K containing both concentric m-dilates.

    Requires len(fine) <= len(coarse).  Returns (K, i, j) with
    i = k_fine - k_K and j = k_coarse - k_K.  Raises WindowTruncationError
    when no window cube works.
    """
    if fine.k < coarse.k:
        raise ValueError("first cube must be the finer one")
    w = grid.window
    lo_a, hi_a = grid.dilate_box(fine, m)
    lo_b, hi_b = grid.dilate_box(coarse, m)
    lo = np.minimum(lo_a, lo_b)
    hi = np.maximum(hi_a, hi_b)
    start = coarse.k if m == 1 else coarse.k - 1
    for k in range(min(start, fine.k), w.k_min - 1, -1):
        cand = grid.ancestor(fine, k)
        c_lo, c_hi = grid.cube_box(cand)
        if (c_lo <= lo).all() and (hi <= c_hi).all():
            if not grid.in_window(cand):
                raise WindowTruncationError(
                    f"containing cube for the pair leaves the window at "
                    f"generation {k}"
                )
            return cand, fine.k - k, coarse.k - k
    raise WindowTruncationError(
        "no generation in the window contains both dilates"
    )


def shifted_corner(window: Window, cube: Cube, omega: np.ndarray) -> tuple:
    """Shifted corner of a cube as exact floats (a convenience wrapper that
    builds a one-off grid)."""
    grid = DyadicGrid(window, omega)
    lo, _ = grid.cube_box(cube)
    return tuple(float(v) * 2.0 ** (-window.unit_exp) for v in lo)


def is_bad(grid: DyadicGrid, cube: Cube, r: int, theta: float) -> bool:
    """A cube is bad when some coarser generation >= k_min, at least r steps
    up, brings its skeleton within theta-relative reach of the cube."""
    w = grid.window
    if cube.k - r < w.k_min:
        raise ScaleRangeError(
            f"badness of a generation-{cube.k} cube needs coarser generations "
            f"down to {cube.k - r}, below k_min={w.k_min}"
        )
    for k_c in range(w.k_min, cube.k - r + 1):
        thresh = (2.0 ** (k_c - cube.k)) ** theta * w.len_units(k_c)
        if boundary_dist(grid, cube, k_c) <= thresh:
            return True
    return False


def union_bound(d: int, r: int, theta: float) -> float:
    """Union-bound estimate for the bad-cube frequency."""
    return (8.0 * d / theta) * 2.0 ** (-r * theta)


def smallest_admissible_r(d: int, theta: float, cap: float = 0.5) -> int:
    r = 1
    while union_bound(d, r, theta) > cap:
        r += 1
        if r > 10_000:
            raise ScaleRangeError("no admissible r; theta too small")
    return r


@dataclass
class GoodnessReport:
    samples: int
    pi_bad_hat: float
    stderr: float
    bound: float
    r: int
    theta: float
    d: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("samples,pi_bad_hat,stderr,bound,r,theta,d\n")
        buf.write(f"{self.samples},{self.pi_bad_hat:.10g},{self.stderr:.10g},"
                  f"{self.bound:.10g},{self.r},{self.theta:.10g},{self.d}\n")
        return buf.getvalue()


def _badness_batch(window: Window, k_ref: int, r: int, theta: float,
                   bits: np.ndarray, l_ref: np.ndarray) -> np.ndarray:
    """Vectorized badness of a generation-k_ref cube for many omega draws.

    bits: (n_samples, n_bits, d) with bit row jr for generation k_min+1+jr.
    Only rows with j <= k_ref feed the offsets; coarser-generation offsets are
    nested truncations of one integer, so a single weighted sum suffices.
    """
    usc = window.unit_exp
    n_rows = k_ref - window.k_min  # rows with k_min < j <= k_ref
    j = window.k_min + 1 + np.arange(n_rows)
    weights = (1 << (usc - j)).astype(np.int64)
    t = np.einsum("sjd,j->sd", bits[:, :n_rows, :].astype(np.int64), weights)
    t += np.asarray(l_ref, dtype=np.int64) * window.len_units(k_ref)
    side = window.len_units(k_ref)
    bad = np.zeros(bits.shape[0], dtype=bool)
    for k_c in range(window.k_min, k_ref - r + 1):
        side_c = window.len_units(k_c)
        off = t % side_c
        per_axis = np.minimum(off, side_c - off - side)
        thresh = (2.0 ** (k_c - k_ref)) ** theta * side_c
        bad |= per_axis.min(axis=1) <= thresh
    return bad


def pi_bad_estimate(window: Window, r: int, theta: float, samples: int,
                    seed, k_ref: int | None = None) -> GoodnessReport:
    """Monte Carlo badness frequency for a generation-k_ref reference cube.

    Verifies along the way that several reference positions give the same
    frequency within 3 standard errors (they agree exactly in distribution;
    the check guards the implementation, not the model).
    """
    w = window
    if k_ref is None:
        k_ref = max((w.k_min + w.k_max) // 2, w.k_min + r)
    if k_ref - r < w.k_min:
        raise ScaleRangeError("window has no generation r steps above k_ref")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(samples, w.n_shift_bits, w.d), dtype=np.int64)
    center = (1 << (w.L + k_ref)) // 2 if w.L + k_ref >= 1 else 0
    l_ref = np.full(w.d, center, dtype=np.int64)
    bad = _badness_batch(w, k_ref, r, theta, bits, l_ref)
    hits = int(bad.sum())
    p = hits / samples
    se = float(np.sqrt(max(p * (1.0 - p), 1.0 / samples) / samples))
    # cross-check at shifted reference positions on a sub-sample
    sub = bits[: min(samples, 20_000)]
    p_sub = _badness_batch(w, k_ref, r, theta, sub, l_ref).mean()
    se_sub = max(np.sqrt(p_sub * (1 - p_sub) / sub.shape[0]), 1.0 / sub.shape[0])
    for delta in (1, 3):
        alt = _badness_batch(w, k_ref, r, theta, sub, l_ref + delta).mean()
        if abs(alt - p_sub) > 3.0 * np.sqrt(2.0) * se_sub + 1e-12:
            raise AssertionError(
                f"badness frequency not position-uniform: {p_sub} vs {alt}"
            )
    return GoodnessReport(samples=samples, pi_bad_hat=p, stderr=se,
                          bound=union_bound(w.d, r, theta), r=r, theta=theta, d=w.d)


def pi_bad_exact(window: Window, k_ref: int, r: int, theta: float) -> float:
    """Exact badness probability by enumerating all translation bits that can
    influence badness (generations k_min < j <= k_ref).  Cost 2^((k_ref-k_min)d).
    """
    w = window
    if k_ref - r < w.k_min:
        raise ScaleRangeError("window has no generation r steps above k_ref")
    n_rows = k_ref - w.k_min
    if n_rows * w.d > 24:
        raise ScaleRangeError("exact enumeration too large for this window")
    side = w.len_units(k_ref)
    # offsets T mod side_c run over all multiples of `side`; enumerate T directly
    per_axis_vals = np.arange(1 << n_rows, dtype=np.int64) * side
    grids = np.meshgrid(*([per_axis_vals] * w.d), indexing="ij")
    t = np.stack([g.ravel() for g in grids], axis=1)
    bad = np.zeros(t.shape[0], dtype=bool)
    for k_c in range(w.k_min, k_ref - r + 1):
        side_c = w.len_units(k_c)
        off = t % side_c
        per_axis = np.minimum(off, side_c - off - side)
        thresh = (2.0 ** (k_c - k_ref)) ** theta * side_c
        bad |= per_axis.min(axis=1) <= thresh
    return float(bad.mean())


def independence_table(window: Window, r: int, theta: float, samples: int,
                       seed, k_ref: int | None = None,
                       position_bins: int = 4) -> np.ndarray:
    """2 x bins contingency table of (badness, binned fine position).

    The position feature is the translation applied to the reference cube
    (bits of generation > k_ref); badness reads only bits <= k_ref.
    """
    w = window
    if k_ref is None:
        k_ref = max((w.k_min + w.k_max) // 2, w.k_min + r)
    if w.k_max - k_ref < int(np.log2(position_bins)):
        raise ScaleRangeError("not enough fine generations for the position bins")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(samples, w.n_shift_bits, w.d), dtype=np.int64)
    center = (1 << (w.L + k_ref)) // 2 if w.L + k_ref >= 1 else 0
    l_ref = np.full(w.d, center, dtype=np.int64)
    bad = _badness_batch(w, k_ref, r, theta, bits, l_ref)
    usc = w.unit_exp
    rows_fine = slice(k_ref - w.k_min, w.n_shift_bits)
    j = k_ref + 1 + np.arange(w.n_shift_bits - (k_ref - w.k_min))
    weights = (1 << (usc - j)).astype(np.int64)
    pos = np.einsum("sjd,j->sd", bits[:, rows_fine, :], weights)
    side = w.len_units(k_ref)
    bins = (pos[:, 0] * position_bins) // side
    table = np.zeros((2, position_bins), dtype=np.int64)
    for b in range(position_bins):
        sel = bins == b
        table[0, b] = int((bad & sel).sum())
        table[1, b] = int(((~bad) & sel).sum())
    return table
