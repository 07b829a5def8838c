"""Quantitative experiments: per-class decay audits, the two-sided wavelet
expansion identity, the randomized good-cube expansion, and convergence of
the truncated shift representation.

Pair enumeration is support-localized: only cubes whose m-dilate meets the
support of f (analysis side) or g (synthesis side) can contribute, so deep
negative generations cost a handful of cubes per level instead of an entire
window's worth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (Cube, DyadicGrid, ScaleRangeError, Window,
                     WindowTruncationError, is_bad, union_bound, pi_bad_exact)
from .operators import KernelOp, PairingEngine, apply_multiplier
from .shifts import PairClass, classify_pair, smaller_of
from .wavelets import WaveletSystem


def psi_refinement(t: float, s: int) -> float:
    """Psi(t) = t^s (log(1/t) + 1), the sharper contained/between modulus."""
    if t <= 0.0 or t > 1.0:
        raise ValueError("Psi is defined on (0, 1]")
    return t ** s * (math.log(1.0 / t) + 1.0)


def localized_cubes(grid: DyadicGrid, system: WaveletSystem,
                    span: tuple[float, float], k_range=None) -> list[Cube]:
    """Window cubes whose m-dilate overlaps the span, all generations."""
    w = grid.window
    unit = 2.0 ** w.unit_exp
    lo_u = math.floor(span[0] * unit)
    hi_u = math.ceil(span[1] * unit)
    half = (system.m - 1) // 2
    ks = range(w.k_min, w.k_max + 1) if k_range is None else k_range
    out = []
    for k in ks:
        grow = half * w.len_units(k)
        for c in grid.cubes_touching(k, np.array([lo_u - grow]),
                                     np.array([hi_u + grow])):
            out.append(c)
    return out


def localized_coefficient(grid: DyadicGrid, system: WaveletSystem,
                          cube: Cube, func, q_loc: int) -> float:
    """<psi_cube, func> on a mesh fine enough for both the wavelet and the
    function (func must expose .support)."""
    from .operators import support_interval
    a_w, b_w = support_interval(grid, system, cube)
    a_f, b_f = func.support
    a, b = max(a_w, a_f), min(b_w, b_f)
    if a >= b:
        return 0.0
    k_func = max(0, math.ceil(-math.log2(b_f - a_f)) + 1)
    res = q_loc + max(cube.k, k_func)
    h = 0.5 ** res
    # Anchor the mesh on the absolute h-lattice so wavelet jump points (all
    # dyadic rationals) fall on cell boundaries; both factors vanish outside
    # [a, b], so the overhang cells contribute nothing.
    x0 = math.floor(a / h) * h
    n = int(math.ceil((b - x0) / h))
    x = x0 + (np.arange(n) + 0.5) * h
    shift_scaled = grid.shift_units(cube.k)[0] / grid.window.len_units(cube.k)
    t = x * 2.0 ** cube.k - cube.l[0] - shift_scaled
    vals = 2.0 ** (cube.k / 2.0) * system.mother(t, "psi")
    return float(np.sum(vals * func(x)) * h)


def ground_truth(op: KernelOp, f, g, res: int, pad_factor: int = 8) -> float:
    """<g, T f> by the multiplier path on a fine mesh, frozen per run."""
    lo = min(f.support[0], g.support[0]) - 0.5
    hi = max(f.support[1], g.support[1]) + 0.5
    h = 0.5 ** res
    n = int(math.ceil((hi - lo) / h))
    x = lo + (np.arange(n) + 0.5) * h
    tf = apply_multiplier(op, f(x), h, lo, pad_factor=pad_factor,
                          corrections=True)
    return float(np.sum(g(x) * tf) * h)


def plain_inner_product(f, g, res: int = 14) -> float:
    lo = min(f.support[0], g.support[0])
    hi = max(f.support[1], g.support[1])
    h = 0.5 ** res
    n = int(math.ceil((hi - lo) / h))
    x = lo + (np.arange(n) + 0.5) * h
    return float(np.sum(f(x) * g(x)) * h)


# ---------------------------------------------------------------------------
# decay audit


@dataclass
class DecayAuditRow:
    kind: str
    i: int
    j: int
    pair_count: int
    max_pairing: float
    bound: float
    ratio: float
    psi_bound: float | None = None
    psi_ratio: float | None = None


def class_bound(kind: str, i: int, j: int, d: int, s: int, eps: float,
                theta: float, czs: float, op_norm: float) -> float:
    if kind == "far":
        return (czs * 2.0 ** (-(i + j) * d / 2.0)
                * (2.0 ** (-i * theta)) ** (-(d + s)) * 2.0 ** (-i * s))
    if kind in ("between", "contained"):
        gap = i - j
        return ((czs + op_norm) * 2.0 ** (-gap * d / 2.0)
                * 2.0 ** (-gap * (s - eps)))
    return op_norm  # equal / near


def decay_audit(op: KernelOp, system: WaveletSystem, grid: DyadicGrid,
                s: int, eps: float, theta: float, i_max: int, j_max: int,
                q_loc: int = 10, r: int | None = None,
                span: tuple[float, float] | None = None,
                ) -> tuple[list[DecayAuditRow], dict]:
    """Tabulate max |<psi_J, T psi_I>| against the per-class bound for every
    window pair with len(I) <= len(J) whose assigned (i,j) fits the caps.

    With r given, pairs whose smaller cube is bad are dropped (cubes too
    coarse to be classified count as good).  With a span, only cubes whose
    m-dilate meets it enter, which keeps wide-filter audits tractable.
    Returns (rows, info) where info holds excluded-pair counters.
    """
    w = grid.window
    if span is None:
        cubes = [c for k in range(w.k_min, w.k_max + 1)
                 for c in grid.cubes_at_scale(k)]
    else:
        cubes = localized_cubes(grid, system, span)
    czs = op.czs_seminorm(s)
    op_norm = op.l2_norm
    selected = []   # (I, J, PairClass)
    info = {"window_truncated": 0, "badness_excluded": 0, "pairs_seen": 0}
    for I in cubes:
        for J in cubes:
            if I.k < J.k:
                continue
            info["pairs_seen"] += 1
            try:
                pc = classify_pair(grid, I, J, theta, system.m)
            except WindowTruncationError:
                info["window_truncated"] += 1
                continue
            if pc.i > i_max or pc.j > j_max:
                continue
            if r is not None and not safe_is_good(grid, smaller_of(I, J), r,
                                                  theta):
                info["badness_excluded"] += 1
                continue
            selected.append((I, J, pc))
    engine = PairingEngine(op, grid, system, q_loc=q_loc)
    values = engine.pairings([(I, J) for I, J, _ in selected])
    cells: dict = {}
    for (I, J, pc), v in zip(selected, values):
        key = (pc.kind, pc.i, pc.j)
        cur = cells.setdefault(key, [0, 0.0])
        cur[0] += 1
        cur[1] = max(cur[1], abs(float(v)))
    rows = []
    for (kind, i, j), (count, mx) in sorted(cells.items()):
        bound = class_bound(kind, i, j, w.d, s, eps, theta, czs, op_norm)
        row = DecayAuditRow(kind=kind, i=i, j=j, pair_count=count,
                            max_pairing=mx, bound=bound, ratio=mx / bound)
        if kind in ("between", "contained") and i > j:
            t = 2.0 ** (-(i - j))
            pb = (czs + op_norm) * 2.0 ** (-(i - j) * w.d / 2.0) \
                * psi_refinement(t, s)
            row.psi_bound = pb
            row.psi_ratio = mx / pb
        rows.append(row)
    return rows, info


def audit_rows_csv(rows) -> str:
    lines = ["class,i,j,pair_count,max_pairing,bound,ratio,psi_bound,psi_ratio"]
    for r in rows:
        pb = "" if r.psi_bound is None else f"{r.psi_bound:.10g}"
        pr = "" if r.psi_ratio is None else f"{r.psi_ratio:.10g}"
        lines.append(f"{r.kind},{r.i},{r.j},{r.pair_count},"
                     f"{r.max_pairing:.10g},{r.bound:.10g},{r.ratio:.10g},"
                     f"{pb},{pr}")
    return "\n".join(lines) + "\n"


def safe_is_good(grid: DyadicGrid, cube: Cube, r: int, theta: float) -> bool:
    """Goodness with the window convention: cubes too coarse to have an
    admissible ancestor r generations up are vacuously good."""
    try:
        return not is_bad(grid, cube, r, theta)
    except ScaleRangeError:
        return True


# ---------------------------------------------------------------------------
# expansion identity and randomized expansion


def _overlaps(grid, system, a: Cube, b: Cube) -> bool:
    from .operators import support_interval
    lo_a, hi_a = support_interval(grid, system, a)
    lo_b, hi_b = support_interval(grid, system, b)
    return max(lo_a, lo_b) < min(hi_a, hi_b)


def expansion_identity(op: KernelOp, system: WaveletSystem, grid: DyadicGrid,
                       f, g, q_loc: int = 10, truth: float | None = None,
                       ) -> dict:
    """Defect of the double wavelet expansion of <g, T f> over the window.

    For the identity calibration the cross terms vanish with the supports, so
    only overlapping-support pairs are evaluated; for singular operators all
    localized pairs enter.
    """
    cubes_f = localized_cubes(grid, system, f.support)
    cubes_g = localized_cubes(grid, system, g.support)
    cf = {c: localized_coefficient(grid, system, c, f, q_loc) for c in cubes_f}
    cg = {c: localized_coefficient(grid, system, c, g, q_loc) for c in cubes_g}
    if not op.singular:
        pairs = [(I, J) for I in cubes_f for J in cubes_g
                 if _overlaps(grid, system, I, J)]
        truth_val = plain_inner_product(f, g) if truth is None else truth
    else:
        pairs = [(I, J) for I in cubes_f for J in cubes_g]
        truth_val = ground_truth(op, f, g, res=q_loc + 2) if truth is None \
            else truth
    engine = PairingEngine(op, grid, system, q_loc=q_loc)
    values = engine.pairings(pairs)
    total = 0.0
    for (I, J), v in sorted(zip(pairs, values),
                            key=lambda t: (t[0][0].k, t[0][0].l,
                                           t[0][1].k, t[0][1].l)):
        total += cf[I] * float(v) * cg[J]
    return {"defect": abs(truth_val - total), "sum": total,
            "truth": truth_val, "pair_count": len(pairs)}


def _pi_good_by_scale(window: Window, r: int, theta: float) -> dict:
    out = {}
    for k in range(window.k_min, window.k_max + 1):
        if k - r < window.k_min:
            out[k] = 1.0  # no admissible coarser generation: vacuously good
        else:
            out[k] = 1.0 - pi_bad_exact(window, k, r, theta)
    return out


@dataclass
class OmegaSample:
    """Per-sample pair data for the randomized experiments."""

    weighted: np.ndarray        # goodness-filtered, pi-divided X values
    levels: np.ndarray          # max(i,j) per pair; -1 when unclassifiable
    excluded_window: int


def _sample_pairs(op, system, window, f, g, r, theta, q_loc, seed_tuple,
                  classify: bool, pi_good: dict) -> OmegaSample:
    grid = DyadicGrid.random(window, seed_tuple)
    cubes_f = localized_cubes(grid, system, f.support)
    cubes_g = localized_cubes(grid, system, g.support)
    cf = {c: localized_coefficient(grid, system, c, f, q_loc) for c in cubes_f}
    cg = {c: localized_coefficient(grid, system, c, g, q_loc) for c in cubes_g}
    good = {c: safe_is_good(grid, c, r, theta)
            for c in set(cubes_f) | set(cubes_g)}
    pairs = [(I, J) for I in cubes_f for J in cubes_g]
    engine = PairingEngine(op, grid, system, q_loc=q_loc)
    values = engine.pairings(pairs)
    weighted = np.zeros(len(pairs))
    levels = np.full(len(pairs), -1, dtype=int)
    excluded = 0
    for idx, (I, J) in enumerate(pairs):
        sm = smaller_of(I, J)
        if not good[sm]:
            continue
        x = cf[I] * float(values[idx]) * cg[J]
        weighted[idx] = x / pi_good[sm.k]
        if classify:
            fine, coarse = (I, J) if I.k >= J.k else (J, I)
            try:
                pc = classify_pair(grid, fine, coarse, theta, system.m)
                levels[idx] = max(pc.i, pc.j)
            except WindowTruncationError:
                excluded += 1
    return OmegaSample(weighted=weighted, levels=levels,
                       excluded_window=excluded)


def randomized_expansion(op: KernelOp, system: WaveletSystem, window: Window,
                         f, g, r: int, theta: float, n_omega: int, seed: int,
                         q_loc: int = 9) -> dict:
    """Monte Carlo good-cube expansion of <g, T f> (per-generation exact
    goodness probabilities divide each retained pair)."""
    if n_omega < 1:
        raise ValueError("n_omega must be >= 1")
    if 1.0 - union_bound(window.d, r, theta) <= 0.0:
        raise ScaleRangeError(
            "pi_good too small: the union bound cannot certify positivity "
            f"at r={r}, theta={theta}")
    pi_good = _pi_good_by_scale(window, r, theta)
    sums = np.empty(n_omega)
    for w_idx in range(n_omega):
        sample = _sample_pairs(op, system, window, f, g, r, theta, q_loc,
                               (seed, w_idx), classify=False, pi_good=pi_good)
        sums[w_idx] = float(sample.weighted.sum())
    estimate = float(sums.mean())
    stderr = float(sums.std(ddof=1) / math.sqrt(n_omega)) if n_omega > 1 else 0.0
    truth = ground_truth(op, f, g, res=q_loc + 2)
    return {"estimate": estimate, "stderr": stderr, "truth": truth,
            "n_omega": n_omega, "pi_good": pi_good,
            "per_sample": sums.tolist()}


@dataclass
class ConvergenceCurve:
    points: list = field(default_factory=list)   # (N, e_N, stderr_N)
    slope: float = math.nan
    n_omega: int = 0
    pi_good: dict = field(default_factory=dict)
    truth: float = 0.0
    fit_range: tuple = ()
    excluded_window: int = 0

    def csv(self) -> str:
        lines = ["N,e_N,stderr"]
        for N, e, se in self.points:
            lines.append(f"{N},{e:.10g},{se:.10g}")
        return "\n".join(lines) + "\n"


class NoiseFloorError(RuntimeError):
    pass


def convergence_experiment(op: KernelOp, system: WaveletSystem,
                           window: Window, f, g, s: int, eps: float,
                           N_max: int, n_omega: int, seed: int,
                           r: int | None = None, theta: float | None = None,
                           q_loc: int = 9) -> ConvergenceCurve:
    """Truncation error of the shift representation against max(i,j) <= N.

    The default r is large enough that goodness is vacuous on the window
    (zero Monte Carlo variance); pass a finite r for the filtered regime.
    """
    if theta is None:
        theta = eps / (window.d + s)
    if r is None:
        r = window.k_max - window.k_min + 1  # vacuous: nothing classifiable
    pi_good = _pi_good_by_scale(window, r, theta)
    partials = np.zeros((n_omega, N_max + 1))
    excluded = 0
    for w_idx in range(n_omega):
        smp = _sample_pairs(op, system, window, f, g, r, theta, q_loc,
                            (seed, w_idx), classify=True, pi_good=pi_good)
        excluded += smp.excluded_window
        for N in range(N_max + 1):
            sel = (smp.levels >= 0) & (smp.levels <= N)
            partials[w_idx, N] = float(smp.weighted[sel].sum())
    truth = ground_truth(op, f, g, res=q_loc + 2)
    curve = ConvergenceCurve(n_omega=n_omega, pi_good=pi_good, truth=truth,
                             excluded_window=excluded)
    means = partials.mean(axis=0)
    if n_omega > 1:
        ses = partials.std(axis=0, ddof=1) / math.sqrt(n_omega)
    else:
        ses = np.zeros(N_max + 1)
    for N in range(1, N_max + 1):
        curve.points.append((N, abs(truth - means[N]), float(ses[N])))
    floor = curve.points[-1][1]
    # The noise floor of the curve is the Monte Carlo uncertainty of the
    # untruncated sum: below it, e_N reflects sampling noise rather than
    # truncation.  The per-N spread of the truncation error itself is not
    # noise (different grids genuinely truncate differently), so it does not
    # enter the guard.
    floor_se = float(ses[N_max])
    # Stable range, chosen by two conditions on e_N alone.  Truncation has
    # engaged only once the partial sum captures at least half of the target
    # (below the first populated level, around log2 of the support diameter,
    # the partial sum is empty and e_N just repeats |truth|).  At the other
    # end, points within 3 floor standard errors of zero or within a factor
    # 2 of the terminal error measure the floor, not the decay.
    half_mass = 0.5 * abs(truth)
    fit = [(N, e) for N, e, se in curve.points
           if e <= half_mass and e > max(3.0 * floor_se, 2.0 * floor)
           and e > 0.0]
    if len(fit) < 3:
        raise NoiseFloorError(
            "curve dominated by noise: fewer than 3 points above the noise "
            "floor; increase n_omega or reduce N_max")
    xs = np.array([n for n, _ in fit], dtype=float)
    ys = np.log2([e for _, e in fit])
    curve.slope = float(np.polyfit(xs, ys, 1)[0])
    curve.fit_range = (int(xs[0]), int(xs[-1]))
    return curve
