"""Five-way classification of cube pairs, normalized shift coefficients,
block averaging operators A_K, and assembled wavelet shifts S^{ij}.

Classification predicates are evaluated in exact integer-unit arithmetic so
class membership never depends on floating-point rounding (the only float is
the threshold len(J) * (len(I)/len(J))^theta, which is exactly representable
whenever theta = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (Cube, DyadicGrid, WindowTruncationError, ancestor_join,
                     box_dist)

CLASSES = ("far", "between", "contained", "equal", "near")


class NormalizationFinding(RuntimeError):
    """A normalized coefficient exceeded the admissible-shift bound."""


@dataclass(frozen=True)
class PairClass:
    kind: str
    K: Cube
    i: int
    j: int


def smaller_of(I: Cube, J: Cube) -> Cube:
    """The smaller cube; ties go to the first argument."""
    return I if I.k >= J.k else J


def classify_kind(grid: DyadicGrid, I: Cube, J: Cube, theta: float, m: int,
                  ) -> str:
    """Class name of an ordered pair with len(I) <= len(J), predicates only.

    far:       dist(I,J) > len(J) (len(I)/len(J))^theta and dist(mI,mJ) > D/2
    between:   first condition holds, second fails
    contained: I strictly inside J
    equal:     I = J
    near:      disjoint but within the theta-threshold
    """
    if I.k < J.k:
        raise ValueError("classification expects len(I) <= len(J)")
    w = grid.window
    if I == J:
        return "equal"
    lo_i, hi_i = grid.cube_box(I)
    lo_j, hi_j = grid.cube_box(J)
    if (lo_j <= lo_i).all() and (hi_i <= hi_j).all():
        return "contained"
    dist = box_dist(lo_i, hi_i, lo_j, hi_j)
    side_j = w.len_units(J.k)
    thresh = (2.0 ** (J.k - I.k)) ** theta * side_j
    if dist <= thresh:
        return "near"
    dlo_i, dhi_i = grid.dilate_box(I, m)
    dlo_j, dhi_j = grid.dilate_box(J, m)
    dil_dist = box_dist(dlo_i, dhi_i, dlo_j, dhi_j)
    side_i = w.len_units(I.k)
    long_dist = side_i + dist + side_j  # D(I,J) in units
    return "far" if 2 * dil_dist > long_dist else "between"


def classify_pair(grid: DyadicGrid, I: Cube, J: Cube, theta: float, m: int,
                  ) -> PairClass:
    """Classify an ordered pair with len(I) <= len(J) and assign the
    containing ancestor (equal pairs borrow a deterministic adjacent cube)."""
    kind = classify_kind(grid, I, J, theta, m)
    if kind == "equal":
        right = Cube(J.k, (J.l[0] + 1,) + J.l[1:])
        adj = right if grid.in_window(right) else Cube(J.k, (J.l[0] - 1,) + J.l[1:])
        K, i, j = ancestor_join(grid, I, adj, m)
    else:
        K, i, j = ancestor_join(grid, I, J, m)
    return PairClass(kind, K, i, j)


def coefficient_scale(i: int, j: int, d: int) -> float:
    """sqrt(|I||J|)/|K| for the (i,j) block geometry."""
    return 2.0 ** (-(i + j) * d / 2.0)


def shift_coefficient(pairing_value: float, i: int, j: int, d: int, s: int,
                      eps: float, bound_const: float, c_emp: float,
                      context: str = "") -> float:
    """a_IJK = pairing / (c_emp (|K|_CZs + |T|) 2^{-max(i,j)(s - 2 eps)}).

    Raises NormalizationFinding when the admissible-shift bound
    |a| <= sqrt(|I||J|)/|K| fails; that is a reportable finding, not a value
    to clip.
    """
    decay = 2.0 ** (-max(i, j) * (s - 2.0 * eps))
    a = pairing_value / (c_emp * bound_const * decay)
    cap = coefficient_scale(i, j, d)
    if abs(a) > cap * (1.0 + 1e-12):
        raise NormalizationFinding(
            f"normalization violated: |a|={abs(a):.6g} > {cap:.6g} "
            f"at (i,j)=({i},{j}) {context}"
        )
    return a


@dataclass
class ShiftOperator:
    i: int
    j: int
    blocks: dict = field(default_factory=dict)  # K -> list[(I, J, a)]
    good: bool = True
    class_filter: tuple = CLASSES
    excluded_badness: int = 0
    excluded_window: int = 0
    c_emp: float = 1.0

    @property
    def coefficient_count(self) -> int:
        return sum(len(v) for v in self.blocks.values())

    def max_normalized_coefficient(self) -> float:
        cap = coefficient_scale(self.i, self.j, 1)
        worst = 0.0
        for entries in self.blocks.values():
            for _, _, a in entries:
                worst = max(worst, abs(a) / cap)
        return worst

    def transpose(self) -> "ShiftOperator":
        """The dual shift: type (j,i) with every block transposed."""
        out = ShiftOperator(i=self.j, j=self.i, good=self.good,
                            class_filter=self.class_filter, c_emp=self.c_emp)
        for K, entries in self.blocks.items():
            out.blocks[K] = [(J, I, a) for (I, J, a) in entries]
        return out

    def manifest(self, seed=None) -> dict:
        return {
            "seed": seed,
            "i": self.i,
            "j": self.j,
            "class_filter": list(self.class_filter),
            "coefficient_count": self.coefficient_count,
            "good": self.good,
            "max_normalized_coefficient": self.max_normalized_coefficient(),
            "c_emp": self.c_emp,
            "excluded_badness": self.excluded_badness,
            "excluded_window": self.excluded_window,
        }


def assemble_shift(grid: DyadicGrid, system, i: int, j: int,
                   classified, pairings, s: int, eps: float,
                   bound_const: float, c_emp: float,
                   class_filter=CLASSES, good_mask=None,
                   excluded_window: int = 0) -> ShiftOperator:
    """Build S^{ij} from classified pairs and their pairing values.

    classified: list of (I, J, PairClass) with len(I) <= len(J); pairings:
    matching list of <psi_J, T psi_I> values; good_mask: optional badness
    filter per pair (False entries are dropped and counted).
    """
    S = ShiftOperator(i=i, j=j, class_filter=tuple(class_filter),
                      excluded_window=excluded_window, c_emp=c_emp)
    m = system.m
    w = grid.window
    d = w.d
    for idx, (I, J, pc) in enumerate(classified):
        if pc.kind not in class_filter or pc.i != i or pc.j != j:
            continue
        if good_mask is not None and not good_mask[idx]:
            S.excluded_badness += 1
            continue
        a = shift_coefficient(pairings[idx], i, j, d, s, eps, bound_const,
                              c_emp, context=f"I={I} J={J}")
        S.blocks.setdefault(pc.K, []).append((I, J, a))
    good = True
    for K, entries in S.blocks.items():
        k_lo, k_hi = grid.cube_box(K)
        for I, J, a in entries:
            if a == 0.0:
                continue
            for c in (I, J):
                d_lo, d_hi = grid.dilate_box(c, m)
                if not ((k_lo <= d_lo).all() and (d_hi <= k_hi).all()):
                    good = False
    S.good = good
    return S


def descendants(grid: DyadicGrid, K: Cube, depth: int) -> list[Cube]:
    """In-window cubes `depth` generations below K and contained in it."""
    k_lo, k_hi = grid.cube_box(K)
    out = []
    for c in grid.cubes_touching(K.k + depth, k_lo, k_hi):
        lo, hi = grid.cube_box(c)
        if (k_lo <= lo).all() and (hi <= k_hi).all():
            out.append(c)
    return out


def calibrate_c_emp(classified, pairings, s: int, eps: float,
                    bound_const: float, d: int) -> float:
    """Smallest normalization constant >= 1 for which every normalized
    coefficient from the sweep obeys the admissible-shift cap.

    Frozen into the run manifest so downstream assemblies with the same
    (operator, system, s, eps) never raise a normalization finding on the
    calibration data.
    """
    worst = 0.0
    for (I, J, pc), v in zip(classified, pairings):
        decay = 2.0 ** (-max(pc.i, pc.j) * (s - 2.0 * eps))
        cap = coefficient_scale(pc.i, pc.j, d)
        worst = max(worst, abs(float(v)) / (bound_const * decay * cap))
    return max(1.0, worst)


def calibration_shift(grid: DyadicGrid, i: int, j: int, Ks,
                      pattern: str = "full") -> ShiftOperator:
    """A synthetic shift with every coefficient at the admissible cap.

    pattern "full" pairs every depth-i cube with every depth-j cube inside
    each block; "diagonal" (requires i == j) keeps only I = J, the identity
    calibration pattern whose norm a dense decomposition can check.
    """
    if pattern == "diagonal" and i != j:
        raise ValueError("diagonal pattern needs i == j")
    S = ShiftOperator(i=i, j=j, class_filter=("calibration",))
    d = grid.window.d
    cap = coefficient_scale(i, j, d)
    for K in Ks:
        eye = descendants(grid, K, i)
        jay = eye if i == j else descendants(grid, K, j)
        if pattern == "diagonal":
            entries = [(I, I, cap) for I in eye]
        else:
            entries = [(I, J, cap) for I in eye for J in jay]
        S.blocks[K] = entries
    return S


@dataclass
class Mesh1D:
    """Midpoint sample mesh x0 + (n + 1/2) h, n = 0..n_pts-1."""

    x0: float
    h: float
    n_pts: int

    @property
    def centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.n_pts) + 0.5) * self.h

    @classmethod
    def cover(cls, lo: float, hi: float, res: int) -> "Mesh1D":
        h = 0.5 ** res
        x0 = math.floor(lo / h) * h
        n = int(math.ceil((hi - x0) / h))
        return cls(x0=x0, h=h, n_pts=n)


def _sample_wavelet(grid: DyadicGrid, system, cube: Cube, x: np.ndarray,
                    ) -> np.ndarray:
    k = cube.k
    shift_scaled = grid.shift_units(k)[0] / grid.window.len_units(k)
    t = x * 2.0 ** k - cube.l[0] - shift_scaled
    return 2.0 ** (k / 2.0) * system.mother(t, "psi")


def apply_averaging(grid: DyadicGrid, system, entries, f: np.ndarray,
                    mesh: Mesh1D) -> np.ndarray:
    """A_K f = sum a <f, psi_I> psi_J on the mesh."""
    x = mesh.centers
    out = np.zeros_like(f, dtype=float)
    for I, J, a in entries:
        if a == 0.0:
            continue
        ci = float(np.sum(_sample_wavelet(grid, system, I, x) * f) * mesh.h)
        out += a * ci * _sample_wavelet(grid, system, J, x)
    return out


def apply_shift(grid: DyadicGrid, system, S: ShiftOperator, f: np.ndarray,
                mesh: Mesh1D) -> np.ndarray:
    out = np.zeros_like(f, dtype=float)
    for K in sorted(S.blocks, key=lambda c: (c.k, c.l)):
        out += apply_averaging(grid, system, S.blocks[K], f, mesh)
    return out


class PowerIterationError(RuntimeError):
    pass


def shift_norm_estimate(grid: DyadicGrid, system, S: ShiftOperator,
                        mesh: Mesh1D, tol: float = 1e-4, max_iter: int = 500,
                        seed: int = 0) -> float:
    """L2 operator norm of S on the mesh by power iteration on S^t S.

    The analysis/synthesis sample matrices are precomputed once, so each
    iteration is two small matrix-vector products.
    """
    entries = [e for K in sorted(S.blocks, key=lambda c: (c.k, c.l))
               for e in S.blocks[K]]
    if not entries:
        return 0.0
    x = mesh.centers
    U = np.stack([_sample_wavelet(grid, system, I, x) for I, _, _ in entries])
    V = np.stack([_sample_wavelet(grid, system, J, x) for _, J, _ in entries])
    a = np.array([e[2] for e in entries])

    def apply(fv):
        return V.T @ (a * (U @ fv * mesh.h))

    def apply_t(fv):
        return U.T @ (a * (V @ fv * mesh.h))

    rng = np.random.default_rng(seed)
    fv = rng.standard_normal(mesh.n_pts)
    fv /= np.linalg.norm(fv)
    prev = 0.0
    for _ in range(max_iter):
        gv = apply_t(apply(fv))
        nrm = float(np.linalg.norm(gv))
        if nrm == 0.0:
            return 0.0
        est = math.sqrt(nrm)
        fv = gv / nrm
        if prev > 0.0 and abs(est - prev) <= tol * prev:
            return est
        prev = est
    raise PowerIterationError("power iteration did not converge")
