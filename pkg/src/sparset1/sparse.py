"""Sparse collections, sparse forms and the complexity forms B^{u,v}.

Cubes in a sparse collection are stored as integer boxes in mesh-cell units
relative to the window corner, so cubes of shifted grids that stick out of
the window are represented exactly.  Functions vanish outside the window,
and averages over a box divide by the full box measure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .function import (GeometryMismatch, GridFunction, block_sum, components, martingale_differences,
                       upsample)
from .grid import Cube, GridError, GridGeometry


class SparsityError(GridError):
    pass


@dataclass(frozen=True)
class Box:
    lo: tuple[int, ...]
    size: int

    @property
    def hi(self) -> tuple[int, ...]:
        return tuple(x + self.size for x in self.lo)

    def cells(self, d: int | None = None) -> int:
        return self.size ** len(self.lo)

    def contains(self, other: "Box") -> bool:
        return all(a <= b and b + other.size <= a + self.size for a, b in zip(self.lo, other.lo))

    def dilate(self, factor: int) -> "Box":
        """factor * box about its center (odd factors keep it on the mesh)."""
        pad = (factor - 1) * self.size // 2
        return Box(tuple(x - pad for x in self.lo), self.size * factor)

    @classmethod
    def of(cls, geometry: GridGeometry, Q: Cube) -> "Box":
        lo, w = geometry.cell_box(Q)
        return cls(lo, w)


@dataclass
class SparseEntry:
    box: Box
    removed: list[Box] = field(default_factory=list)
    grid: str = "standard"
    scale: int | None = None

    def carve_cells(self) -> int:
        return self.box.cells() - sum(b.cells() for b in self.removed)


@dataclass
class SparseCollection:
    geometry: GridGeometry
    entries: list[SparseEntry]
    c: float

    def __len__(self) -> int:
        return len(self.entries)

    def boxes(self) -> list[Box]:
        return [e.box for e in self.entries]

    def to_json(self) -> str:
        g = self.geometry
        out = []
        for e in self.entries:
            s = e.scale if e.scale is not None else g.scale_min + int(round(math.log2(e.box.size)))
            mask = carve_mask(e, g.d)
            out.append({"cube": {"s": s, "lo": list(e.box.lo), "grid": e.grid},
                        "carve": rle_encode(mask.ravel())})
        return json.dumps({"geometry": g.to_dict(), "c": self.c, "entries": out})

    @classmethod
    def from_json(cls, text: str) -> "SparseCollection":
        doc = json.loads(text)
        g = GridGeometry(**doc["geometry"])
        entries = []
        for item in doc["entries"]:
            s = item["cube"]["s"]
            size = 1 << (s - g.scale_min)
            box = Box(tuple(item["cube"]["lo"]), size)
            mask = rle_decode(item["carve"]).reshape((size,) * g.d)
            removed = [Box(tuple(a + b for a, b in zip(box.lo, lo)), w)
                       for lo, w in _mask_components(~mask)]
            entries.append(SparseEntry(box, removed, item["cube"]["grid"], s))
        return cls(g, entries, doc["c"])


def rle_encode(bits: np.ndarray) -> list[int]:
    """Run lengths of a flat boolean mask, starting with a run of True."""
    bits = np.asarray(bits, dtype=bool)
    runs = []
    cur, n = True, 0
    for b in bits:
        if b == cur:
            n += 1
        else:
            runs.append(n)
            cur, n = b, 1
    runs.append(n)
    return runs


def rle_decode(runs: Sequence[int]) -> np.ndarray:
    out = []
    cur = True
    for n in runs:
        out.extend([cur] * n)
        cur = not cur
    return np.array(out, dtype=bool)


def _mask_components(mask: np.ndarray) -> list[tuple[tuple[int, ...], int]]:
    n = mask.shape[0]
    out = []
    for k, idx in components(mask):
        w = n >> k
        out.append((tuple(i * w for i in idx), w))
    return out


def carve_mask(entry: SparseEntry, d: int) -> np.ndarray:
    mask = np.ones((entry.box.size,) * d, dtype=bool)
    for r in entry.removed:
        if not entry.box.contains(r):
            raise SparsityError(f"carve-out piece {r} is not inside {entry.box}")
        sl = tuple(slice(a - b, a - b + r.size) for a, b in zip(r.lo, entry.box.lo))
        mask[sl] = False
    return mask


class BoxSums:
    """Exact sums of a window function over arbitrary integer boxes."""

    def __init__(self, values: np.ndarray):
        self.n = values.shape[0]
        self.d = values.ndim
        c = np.asarray(values, dtype=float)
        for ax in range(self.d):
            c = np.cumsum(c, axis=ax)
        self.cum = np.pad(c, [(1, 0)] * self.d)

    def query(self, lo: np.ndarray, size: np.ndarray) -> np.ndarray:
        """Sum over boxes [lo, lo + size) clipped to the window; lo shape (m, d)."""
        lo = np.atleast_2d(np.asarray(lo, dtype=np.int64))
        size = np.broadcast_to(np.asarray(size, dtype=np.int64), lo.shape[:1])
        a = np.clip(lo, 0, self.n)
        b = np.clip(lo + size[:, None], 0, self.n)
        total = np.zeros(lo.shape[0])
        for corner in np.ndindex(*(2,) * self.d):
            idx = tuple(np.where(corner[i], b[:, i], a[:, i]) for i in range(self.d))
            sign = (-1) ** (self.d - sum(corner))
            total += sign * self.cum[idx]
        return total

    def averages(self, boxes: Sequence[Box], dilation: int = 1) -> np.ndarray:
        if not boxes:
            return np.zeros(0)
        bb = [b.dilate(dilation) if dilation != 1 else b for b in boxes]
        lo = np.array([b.lo for b in bb])
        size = np.array([b.size for b in bb])
        return self.query(lo, size) / size.astype(float) ** self.d


def lambda_eval(S: SparseCollection, f: GridFunction, g: GridFunction, dilation: int = 1) -> float:
    """Lambda(f, g) = sum_S <f>_S <g>_S |S| (averages over ``dilation`` * S if set)."""
    if f.geometry != S.geometry or g.geometry != S.geometry:
        raise GeometryMismatch("collection and functions use different geometries")
    if not S.entries:
        return 0.0
    boxes = S.boxes()
    af = BoxSums(f.values).averages(boxes, dilation)
    ag = BoxSums(g.values).averages(boxes, dilation)
    meas = np.array([b.cells() for b in boxes], dtype=float) * S.geometry.cell_measure
    return float(np.sum(af * ag * meas))


class _Canvas:
    """Difference-array accumulation of weighted boxes on compressed coordinates.

    Breakpoints are the box faces plus the window faces, so huge boxes of
    coarse shifted cubes cost nothing extra.
    """

    def __init__(self, d: int, boxes: Iterable[Box], n: int):
        boxes = list(boxes)
        self.d = d
        self.coords = []
        for ax in range(d):
            pts = {0, n}
            for bx in boxes:
                pts.add(bx.lo[ax])
                pts.add(bx.lo[ax] + bx.size)
            self.coords.append(np.array(sorted(pts), dtype=np.int64))
        self.diff = np.zeros(tuple(len(c) for c in self.coords))

    def add(self, box: Box, weight: float) -> None:
        a = [int(np.searchsorted(c, x)) for c, x in zip(self.coords, box.lo)]
        b = [int(np.searchsorted(c, x + box.size)) for c, x in zip(self.coords, box.lo)]
        for corner in np.ndindex(*(2,) * self.d):
            idx = tuple(b[i] if corner[i] else a[i] for i in range(self.d))
            self.diff[idx] += weight * (-1) ** sum(corner)

    def result(self) -> np.ndarray:
        """Value on every compressed cell."""
        out = self.diff
        for ax in range(self.d):
            out = np.cumsum(out, axis=ax)
        return out[(slice(0, -1),) * self.d]

    def volumes(self) -> np.ndarray:
        """Number of mesh cells in every compressed cell."""
        vol = np.ones(())
        for c in self.coords:
            vol = np.multiply.outer(vol, np.diff(c).astype(float))
        return vol


@dataclass
class SparsityCertificate:
    min_carve_ratio: float
    max_overlap: float
    c: float

    @property
    def passes(self) -> bool:
        return self.min_carve_ratio > self.c and self.max_overlap <= 1.0 / self.c + 1e-12

    def to_dict(self) -> dict:
        return {"min_carve_ratio": self.min_carve_ratio, "max_overlap": self.max_overlap,
                "c": self.c, "passes": self.passes}


def overlap_function(S: SparseCollection) -> tuple[np.ndarray, _Canvas]:
    d = S.geometry.d
    cv = _Canvas(d, [e.box for e in S.entries], S.geometry.n)
    for e in S.entries:
        cv.add(e.box, 1.0)
        for r in e.removed:
            cv.add(r, -1.0)
    return cv.result(), cv


def verify_sparsity(S: SparseCollection, c: float | None = None) -> SparsityCertificate:
    """Exact mesh computation of the smallest carve ratio and the largest overlap."""
    c = S.c if c is None else c
    if not S.entries:
        return SparsityCertificate(1.0, 0.0, c)
    ratios = []
    for e in S.entries:
        for r in e.removed:
            if not e.box.contains(r):
                raise SparsityError(f"carve-out piece {r} is not inside {e.box}")
        ratios.append(e.carve_cells() / e.box.cells())
    cover, cv = overlap_function(S)
    cover = cover[cv.volumes() > 0]
    if cover.min() < -1e-9:
        raise SparsityError("removed pieces overlap inside a carve-out")
    return SparsityCertificate(float(min(ratios)), float(cover.max()), c)


def pointwise_lambda(S: SparseCollection, f: GridFunction, g: GridFunction,
                     use_carve: bool = False) -> float:
    """Integral of sum_S <f>_S <g>_S 1_S (or 1_{E_S}) accumulated on the mesh."""
    if not S.entries:
        return 0.0
    boxes = S.boxes()
    w = BoxSums(f.values).averages(boxes) * BoxSums(g.values).averages(boxes)
    cv = _Canvas(S.geometry.d, boxes, S.geometry.n)
    for e, wt in zip(S.entries, w):
        cv.add(e.box, wt)
        if use_carve:
            for r in e.removed:
                cv.add(r, -wt)
    return float((cv.result() * cv.volumes()).sum() * S.geometry.cell_measure)


# ------------------------------------------------------- complexity forms

def _neighbor_sum(a: np.ndarray) -> np.ndarray:
    """Sum over the 3**d block neighbourhood, zero outside."""
    p = np.pad(a, 1)
    out = np.zeros_like(a)
    n = a.shape[0]
    for off in np.ndindex(*(3,) * a.ndim):
        out += p[tuple(slice(o, o + n) for o in off)]
    return out


def triple_averages(f: GridFunction, u: int) -> list[np.ndarray]:
    """``a[k]`` = <|D_{i_P - u} f|>_{3P} for every level-k cube P of the window."""
    g = f.geometry
    L = g.levels
    if u < 0 or u > L:
        raise GridError(f"offset u={u} exceeds the mesh depth {L}")
    D = martingale_differences(f)
    out = []
    for k in range(L + 1):
        shape = (1 << k,) * g.d
        j = k + u
        if j >= L:
            out.append(np.zeros(shape))
            continue
        w = 1 << (L - k)
        s = block_sum(np.abs(D[j]), w)
        out.append(_neighbor_sum(s) / float((3 * w) ** g.d))
    return out


def buv_eval(f: GridFunction, g: GridFunction, u: int, v: int) -> float:
    """B^{u,v}(f, g) summed over the window cubes."""
    if f.geometry != g.geometry:
        raise GeometryMismatch("f and g live on different geometries")
    a = triple_averages(f, u)
    b = triple_averages(g, v)
    geo = f.geometry
    total = 0.0
    for k in range(geo.levels + 1):
        total += float(np.sum(a[k] * b[k])) * (geo.side / (1 << k)) ** geo.d
    return total


def _square_stack(a: list[np.ndarray], L: int) -> list[np.ndarray]:
    """``T[k]`` = sum over levels >= k of a[level]**2, at cell resolution."""
    T = [None] * (L + 2)
    T[L + 1] = np.zeros_like(upsample(a[L], 1))
    for k in range(L, -1, -1):
        T[k] = T[k + 1] + upsample(a[k] ** 2, 1 << (L - k))
    return T[: L + 1]


def square_function(f: GridFunction, u: int) -> GridFunction:
    """S_u f with (S_u f)^2 = sum_P <|D_{i_P - u} f|>_{3P}^2 1_P over window cubes."""
    a = triple_averages(f, u)
    L = f.geometry.levels
    return GridFunction(f.geometry, np.sqrt(_square_stack(a, L)[0]))


@dataclass
class BuvDomination:
    collection: SparseCollection
    constant: float  # largest level-set constant C used
    u: int
    v: int
    node_constants: list[float]

    @property
    def factor(self) -> float:
        return self.constant ** 2 * (1 + self.u) * (1 + self.v)

    def check(self, f: GridFunction, g: GridFunction) -> tuple[float, float]:
        """(B^{u,v}(f,g), factor * Lambda_3(|f|,|g|)) for a post-hoc comparison."""
        lhs = buv_eval(f, g, self.u, self.v)
        rhs = self.factor * lambda_eval(self.collection, f.abs(), g.abs(), dilation=3)
        return lhs, rhs


def sparse_dominate_buv(f: GridFunction, g: GridFunction, u: int, v: int,
                        measure_fraction: float = 0.25) -> BuvDomination:
    """Level-set recursion producing a sparse collection that dominates B^{u,v}.

    At a node P the exceptional set is where the localized square function of
    f (or g) exceeds C (1 + u) <|f|>_{3P}; C starts at 1 and doubles until
    the set has measure at most ``measure_fraction * |P|``.  P is emitted
    with carve-out P minus that set, and the recursion continues on its
    maximal dyadic components.
    """
    geo = f.geometry
    if g.geometry != geo:
        raise GeometryMismatch("f and g live on different geometries")
    L = geo.levels
    Tf = _square_stack(triple_averages(f, u), L)
    Tg = _square_stack(triple_averages(g, v), L)
    sf = BoxSums(np.abs(f.values))
    sg = BoxSums(np.abs(g.values))
    entries = []
    consts = []
    stack = [(0, (0,) * geo.d)]
    while stack:
        k, idx = stack.pop()
        w = geo.n >> k
        box = Box(tuple(i * w for i in idx), w)
        sl = tuple(slice(a, a + w) for a in box.lo)
        avf = sf.averages([box], 3)[0]
        avg_ = sg.averages([box], 3)[0]
        Sf = np.sqrt(Tf[k][sl])
        Sg = np.sqrt(Tg[k][sl])
        C = 1.0
        while True:
            E = (Sf > C * (1 + u) * avf) | (Sg > C * (1 + v) * avg_)
            if E.sum() <= measure_fraction * E.size:
                break
            C *= 2.0
        consts.append(C)
        removed = []
        for kk, sub in components(E) if E.any() else []:
            ww = w >> kk
            rb = Box(tuple(a + i * ww for a, i in zip(box.lo, sub)), ww)
            removed.append(rb)
            stack.append((k + kk, tuple(a // ww for a in rb.lo)))
        entries.append(SparseEntry(box, removed, "standard", geo.scale_max - k))
    coll = SparseCollection(geo, entries, 0.5)
    return BuvDomination(coll, max(consts), u, v, consts)


# ---------------------------------------------------------- shifted grids

@dataclass(frozen=True)
class ShiftedGrid:
    """Dyadic grid shifted by (-1)**s * t/3 of the side length at scale s.

    ``thirds`` holds t in {0, 1, 2} per axis; offsets are rounded to the mesh
    by one common sub-cell translation, which keeps the grid nested.
    """

    geometry: GridGeometry
    thirds: tuple[int, ...]

    @property
    def name(self) -> str:
        return "shift" + "".join(str(t) for t in self.thirds)

    def offset(self, s: int) -> tuple[int, ...]:
        n = 1 << (s - self.geometry.scale_min)
        sign = 1 if s % 2 == 0 else -1
        return tuple(math.floor(Fraction(sign * t * n, 3)) for t in self.thirds)

    def cube_box(self, s: int, j: Sequence[int]) -> Box:
        n = 1 << (s - self.geometry.scale_min)
        return Box(tuple(o + i * n for o, i in zip(self.offset(s), j)), n)


def shifted_grid_family(geometry: GridGeometry) -> list[ShiftedGrid]:
    return [ShiftedGrid(geometry, tuple(int(x) for x in t)) for t in np.ndindex(*(3,) * geometry.d)]


@dataclass
class _Level:
    s: int
    start: np.ndarray  # cell position of block 0 per axis
    prod: np.ndarray


def _grid_levels(grid: ShiftedGrid, fs: BoxSums, gs: BoxSums, top: int, bottom: int | None = None) -> list[_Level]:
    geo = grid.geometry
    N = geo.n
    out = []
    for s in range(geo.scale_min if bottom is None else bottom, top + 1):
        n = 1 << (s - geo.scale_min)
        off = grid.offset(s)
        first = [(0 - o) // n for o in off]
        last = [(N - 1 - o) // n for o in off]
        shape = tuple(b - a + 1 for a, b in zip(first, last))
        idx = np.indices(shape).reshape(geo.d, -1)
        lo = np.stack([o + (a + idx[i]) * n for i, (o, a) in enumerate(zip(off, first))], axis=1)
        meas = float(n ** geo.d)
        prod = (fs.query(lo, n) / meas) * (gs.query(lo, n) / meas)
        start = np.array([o + a * n for o, a in zip(off, first)])
        out.append(_Level(s, start, prod.reshape(shape)))
    return out


def _parent_index(lv: _Level, up: _Level, n: int, idx: np.ndarray) -> np.ndarray:
    pos = lv.start[:, None] + idx * n
    return (pos - up.start[:, None]) // (2 * n)


@dataclass
class UniversalResult:
    collection: SparseCollection
    levels: list[int]              # level k of every entry
    products: list[float]          # <f>_Q <g>_Q of every entry
    k_range: tuple[int, int]

    def level_bound_violations(self) -> int:
        """Entries outside 8**(2dk) <= <f>_Q <g>_Q <= 8**(2dk + 2d/3)."""
        d = self.collection.geometry.d
        bad = 0
        for k, p in zip(self.levels, self.products):
            lo = 8.0 ** (2 * d * k)
            hi = lo * 4.0 ** d
            bad += not (lo * (1 - 1e-12) <= p <= hi * (1 + 1e-12))
        return bad


def universal_sparse(f: GridFunction, g: GridFunction, grids: Sequence[ShiftedGrid] | None = None) -> UniversalResult:
    """Universal dominating collection built from level sets of <f>_Q <g>_Q.

    For each grid, U_k is the set of maximal cubes with product >= 8**(2dk);
    each cube is kept once at its largest k, with carve-out Q minus the cubes
    of U_{k+1} strictly inside it.
    """
    geo = f.geometry
    if np.any(f.values < 0) or np.any(g.values < 0):
        raise ValueError("universal_sparse needs nonnegative f and g")
    grids = list(grids) if grids is not None else shifted_grid_family(geo)
    base = 64.0 ** geo.d
    entries: list[SparseEntry] = []
    levels: list[int] = []
    prods: list[float] = []
    per_grid = []
    kmin_all, kmax_all = None, None
    fs = BoxSums(f.values)
    gs = BoxSums(g.values)
    for grid in grids:
        lv = _grid_levels(grid, fs, gs, geo.scale_max)
        # first scale at which one cube covers the whole window
        while lv[-1].prod.size > 1:
            lv += _grid_levels(grid, fs, gs, lv[-1].s + 1, lv[-1].s + 1)
        pos = np.concatenate([x.prod[x.prod > 0].ravel() for x in lv])
        if pos.size == 0:
            continue
        kmin = math.floor(math.log(pos.min()) / math.log(base))
        kmax = math.floor(math.log(pos.max()) / math.log(base))
        # coarser parents until nothing at the top can qualify at kmin
        while lv[-1].prod.max() >= base ** kmin:
            lv += _grid_levels(grid, fs, gs, lv[-1].s + 1, lv[-1].s + 1)
        per_grid.append((grid, lv, kmin, kmax))
        kmin_all = kmin if kmin_all is None else min(kmin_all, kmin)
        kmax_all = kmax if kmax_all is None else max(kmax_all, kmax)

    for grid, lv, kmin, kmax in per_grid:
        best: dict[tuple[int, tuple[int, ...]], int] = {}
        maximal_by_k: dict[int, list[tuple[int, tuple[int, ...]]]] = {}
        for k in range(kmin, kmax + 2):
            thr = base ** k
            covered_up = None
            found = []
            for li in range(len(lv) - 1, -1, -1):
                level = lv[li]
                marked = level.prod >= thr
                if covered_up is None:
                    cov_parent = np.zeros_like(marked)
                else:
                    n = 1 << (level.s - geo.scale_min)
                    idx = np.indices(marked.shape).reshape(geo.d, -1)
                    par = _parent_index(level, lv[li + 1], n, idx)
                    cov_parent = covered_up[tuple(par)].reshape(marked.shape)
                new = marked & ~cov_parent
                for ix in zip(*np.nonzero(new)):
                    found.append((li, tuple(int(i) for i in ix)))
                covered_up = marked | cov_parent
            maximal_by_k[k] = found
            for key in found:
                best[key] = k
        # carve-outs: members of U_{k+1} strictly inside Q
        def box_of(key):
            li, ix = key
            level = lv[li]
            n = 1 << (level.s - geo.scale_min)
            return Box(tuple(int(a + i * n) for a, i in zip(level.start, ix)), n)

        kept = {key: k for key, k in best.items()}
        removed: dict[tuple[int, tuple[int, ...]], list[Box]] = {key: [] for key in kept}
        for k, members in maximal_by_k.items():
            if k - 1 < kmin:
                continue
            for key in members:
                li, ix = key
                # walk up ancestors, stop at the first kept cube whose level is k - 1
                cur_li, cur_ix = li, np.array(ix)
                while cur_li + 1 < len(lv):
                    level = lv[cur_li]
                    n = 1 << (level.s - geo.scale_min)
                    par = _parent_index(level, lv[cur_li + 1], n, cur_ix[:, None])[:, 0]
                    cur_li, cur_ix = cur_li + 1, par
                    anc = (cur_li, tuple(int(i) for i in cur_ix))
                    if kept.get(anc) == k - 1:
                        removed[anc].append(box_of(key))
                        break
        for key, k in kept.items():
            li, ix = key
            entries.append(SparseEntry(box_of(key), removed[key], grid.name, lv[li].s))
            levels.append(k)
            prods.append(float(lv[li].prod[ix]))
    coll = SparseCollection(geo, entries, 3.0 ** (-geo.d))
    kr = (kmin_all, kmax_all) if kmin_all is not None else (0, -1)
    return UniversalResult(coll, levels, prods, kr)


def approximation_check(geometry: GridGeometry, grids: Sequence[ShiftedGrid] | None = None) -> dict:
    """Check every mesh-aligned cube in the window against the shifted grids.

    Returns counts for the two properties: (a) some family cube P with
    l(P) <= 6 l(Q) and Q inside 6P, and (b) the stronger Q inside P with
    l(P) <= 6 l(Q).
    """
    grids = list(grids) if grids is not None else shifted_grid_family(geometry)
    d, N = geometry.d, geometry.n
    total = weak_ok = strong_ok = 0
    sizes = range(1, N + 1)
    for w in sizes:
        for lo in np.ndindex(*(N - w + 1,) * d):
            total += 1
            found_weak = found_strong = False
            for grid in grids:
                for s in range(geometry.scale_min, geometry.scale_max + 4):
                    n = 1 << (s - geometry.scale_min)
                    if n > 6 * w:
                        break
                    off = grid.offset(s)
                    j = [(a - o) // n for a, o in zip(lo, off)]
                    P = grid.cube_box(s, j)
                    if P.contains(Box(tuple(lo), w)):
                        found_strong = found_weak = True
                        break
                    if _inside_dilate(P, Box(tuple(lo), w), 6):
                        found_weak = True
                if found_strong:
                    break
            weak_ok += found_weak
            strong_ok += found_strong
    return {"cubes": total, "weak_ok": weak_ok, "strong_ok": strong_ok}


def _inside_dilate(P: Box, Q: Box, factor: int) -> bool:
    # factor * P about its center, in half-cell units to stay exact
    return all(2 * p - (factor - 1) * P.size <= 2 * q and 2 * q + 2 * Q.size <= 2 * p + (factor + 1) * P.size
               for p, q in zip(P.lo, Q.lo))


def random_sparse_collection(geometry: GridGeometry, rng: np.random.Generator, c: float = 0.5,
                             layers: int = 2, max_depth: int | None = None) -> SparseCollection:
    """Random standard-grid collection with carve ratio > c and overlap <= 1/c.

    Builds ``layers`` independent stopping-style trees, each with pairwise
    disjoint carve-outs; their union has overlap at most ``layers``.
    """
    if layers > 1.0 / c:
        raise ValueError("too many layers for the requested sparsity constant")
    d, N = geometry.d, geometry.n
    max_depth = geometry.levels if max_depth is None else max_depth
    entries = []
    for _ in range(layers):
        k0 = int(rng.integers(0, max(1, geometry.levels // 2)))
        w0 = N >> k0
        roots = [tuple(int(i) * w0 for i in idx) for idx in np.ndindex(*(1 << k0,) * d)
                 if rng.random() < 0.7]
        stack = [(Box(lo, w0), 0) for lo in roots]
        while stack:
            box, depth = stack.pop()
            budget = (1.0 - c) * rng.random() * box.cells()
            kids: list[Box] = []
            used = 0
            if box.size > 1 and depth < max_depth:
                for _try in range(8):
                    kk = int(rng.integers(1, int(math.log2(box.size)) + 1))
                    w = box.size >> kk
                    off = tuple(int(a + rng.integers(0, 1 << kk) * w) for a in box.lo)
                    cand = Box(off, w)
                    if used + cand.cells() >= (1.0 - c) * box.cells() or used + cand.cells() > budget:
                        continue
                    if any(_boxes_meet(cand, q) for q in kids):
                        continue
                    kids.append(cand)
                    used += cand.cells()
            entries.append(SparseEntry(box, kids, "standard",
                                       geometry.scale_min + int(round(math.log2(box.size)))))
            stack.extend((q, depth + 1) for q in kids)
    return SparseCollection(geometry, entries, c)


def _boxes_meet(a: Box, b: Box) -> bool:
    return all(x < y + b.size and y < x + a.size for x, y in zip(a.lo, b.lo))
