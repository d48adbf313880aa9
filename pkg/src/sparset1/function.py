"""Piecewise-constant functions on the mesh and their dyadic machinery.

Everything here is a finite sum over mesh cells, so identities such as
Haar reconstruction or Plancherel hold to rounding error.  Cubes are the
standard dyadic cubes of the window; level ``k`` means ``k`` halvings below
the window, so level-``k`` data is an array of shape ``(2**k,) * d``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .grid import Cube, GridError, GridGeometry, ScaleRangeError, ContainmentError


class GeometryMismatch(GridError):
    pass


def block_sum(a: np.ndarray, b: int) -> np.ndarray:
    """Sum over non-overlapping blocks of side ``b`` along every axis."""
    if b == 1:
        return a
    d = a.ndim
    shape = []
    for n in a.shape:
        shape += [n // b, b]
    return a.reshape(shape).sum(axis=tuple(range(1, 2 * d, 2)))


def block_mean(a: np.ndarray, b: int) -> np.ndarray:
    return block_sum(a, b) / float(b ** a.ndim)


def upsample(a: np.ndarray, b: int) -> np.ndarray:
    """Inverse of block reduction: repeat every entry into a block of side b."""
    for ax in range(a.ndim):
        a = np.repeat(a, b, axis=ax)
    return a


def mean_pyramid(values: np.ndarray) -> list[np.ndarray]:
    """Averages over every dyadic cube: ``pyr[k]`` has shape ``(2**k,)*d``."""
    L = int(round(np.log2(values.shape[0])))
    pyr = [None] * (L + 1)
    pyr[L] = np.asarray(values, dtype=float)
    for k in range(L - 1, -1, -1):
        pyr[k] = block_mean(pyr[k + 1], 2)
    return pyr


def maximal_cubes(mark: list[np.ndarray]) -> list[tuple[int, tuple[int, ...]]]:
    """Maximal marked cubes of a pyramid of boolean marks.

    ``mark[k]`` flags cubes at level k; returns (level, index) pairs of marked
    cubes with no marked ancestor, coarse to fine.
    """
    out = []
    covered = np.zeros(mark[0].shape, dtype=bool)
    for k, m in enumerate(mark):
        if k > 0:
            covered = upsample(covered, 2)
        new = m & ~covered
        for idx in zip(*np.nonzero(new)):
            out.append((k, tuple(int(i) for i in idx)))
        covered = covered | m
    return out


def components(mask: np.ndarray) -> list[tuple[int, tuple[int, ...]]]:
    """Maximal dyadic cubes (level, index) contained in a cell mask."""
    L = int(round(np.log2(mask.shape[0])))
    full = [None] * (L + 1)
    full[L] = mask.astype(bool)
    for k in range(L - 1, -1, -1):
        full[k] = block_sum(full[k + 1].astype(np.int64), 2) == 2 ** mask.ndim
    return maximal_cubes(full)


@dataclass
class GridFunction:
    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size == self.geometry.n ** self.geometry.d and self.values.shape != self.geometry.shape:
            self.values = self.values.reshape(self.geometry.shape)
        if self.values.shape != self.geometry.shape:
            raise GeometryMismatch(f"expected {self.geometry.shape} values, got {self.values.shape}")

    # construction helpers
    @classmethod
    def zeros(cls, geometry: GridGeometry) -> "GridFunction":
        return cls(geometry, np.zeros(geometry.shape))

    @classmethod
    def constant(cls, geometry: GridGeometry, c: float) -> "GridFunction":
        return cls(geometry, np.full(geometry.shape, float(c)))

    @classmethod
    def from_callable(cls, geometry: GridGeometry, fn: Callable[..., np.ndarray]) -> "GridFunction":
        """Sample ``fn`` at cell centers (one coordinate array per axis)."""
        h = geometry.cell_size
        c = (np.arange(geometry.n) + 0.5) * h
        grids = np.meshgrid(*([c] * geometry.d), indexing="ij")
        return cls(geometry, np.broadcast_to(fn(*grids), geometry.shape).astype(float))

    @classmethod
    def indicator(cls, geometry: GridGeometry, lo: Iterable[float], hi: Iterable[float],
                  height: float = 1.0) -> "GridFunction":
        """height * 1_[lo, hi) for a mesh-aligned box given in window coordinates."""
        h = geometry.cell_size
        v = np.zeros(geometry.shape)
        sl = tuple(slice(int(round(a / h)), int(round(b / h))) for a, b in zip(lo, hi))
        v[sl] = height
        return cls(geometry, v)

    def _check(self, other: "GridFunction") -> None:
        if other.geometry != self.geometry:
            raise GeometryMismatch("functions live on different geometries")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.geometry, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.geometry, self.values - other.values)

    def __mul__(self, c) -> "GridFunction":
        if isinstance(c, GridFunction):
            self._check(c)
            return GridFunction(self.geometry, self.values * c.values)
        return GridFunction(self.geometry, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.geometry, -self.values)

    def abs(self) -> "GridFunction":
        return GridFunction(self.geometry, np.abs(self.values))

    def copy(self) -> "GridFunction":
        return GridFunction(self.geometry, self.values.copy())

    # integrals and norms
    def integral(self) -> float:
        return float(self.values.sum() * self.geometry.cell_measure)

    def inner(self, other: "GridFunction") -> float:
        self._check(other)
        return float(np.vdot(self.values, other.values) * self.geometry.cell_measure)

    def norm(self, p: float = 2.0) -> float:
        if p == np.inf:
            return float(np.max(np.abs(self.values)))
        return float((np.sum(np.abs(self.values) ** p) * self.geometry.cell_measure) ** (1.0 / p))

    def weighted_norm(self, weight: "GridFunction", p: float) -> float:
        self._check(weight)
        return float((np.sum(np.abs(self.values) ** p * weight.values) * self.geometry.cell_measure) ** (1.0 / p))

    def restrict(self, Q: Cube) -> np.ndarray:
        return self.values[self.geometry.slices(Q)]

    def pyramid(self) -> list[np.ndarray]:
        return mean_pyramid(self.values)

    # serialization
    def to_json(self) -> str:
        return json.dumps({"geometry": self.geometry.to_dict(), "values": self.values.ravel().tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        doc = json.loads(text)
        g = GridGeometry(**doc["geometry"])
        return cls(g, np.array(doc["values"], dtype=float).reshape(g.shape))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        g = self.geometry
        w.writerow(["d", "scale_min", "scale_max"])
        w.writerow([g.d, g.scale_min, g.scale_max])
        w.writerow(["value"])
        for v in self.values.ravel():
            w.writerow([repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        rows = list(csv.reader(io.StringIO(text)))
        d, smin, smax = (int(x) for x in rows[1])
        g = GridGeometry(d, smin, smax)
        vals = np.array([float(r[0]) for r in rows[3:]], dtype=float)
        return cls(g, vals.reshape(g.shape))


def average(f: GridFunction, Q: Cube) -> float:
    """Exact mean of f over a window cube."""
    try:
        block = f.restrict(Q)
    except ContainmentError as exc:
        raise GridError(f"{Q} does not lie in the window") from exc
    return float(block.mean())


def _haar_level(pyr: list[np.ndarray], k: int) -> np.ndarray:
    """Cell-resolution sum of Delta_Q f over all cubes Q at level k."""
    L = len(pyr) - 1
    diff = pyr[k + 1] - upsample(pyr[k], 2)
    return upsample(diff, 1 << (L - k - 1))


def martingale_differences(f: GridFunction) -> list[np.ndarray]:
    """``D[k]`` = sum of Delta_Q f over level-k cubes, at cell resolution.

    Levels run 0..L-1; mesh cells carry no difference.
    """
    pyr = f.pyramid()
    return [_haar_level(pyr, k) for k in range(f.geometry.levels)]


@dataclass
class HaarDifference:
    cube: Cube
    function: GridFunction


def haar_difference(f: GridFunction, Q: Cube) -> HaarDifference:
    """Delta_Q f: child averages minus the cube average, supported on Q."""
    g = f.geometry
    if Q.scale == g.scale_min:
        raise ScaleRangeError("mesh cells have no Haar difference")
    block = f.restrict(Q)
    half = block.shape[0] // 2
    local = upsample(block_mean(block, half), half) - block.mean()
    out = np.zeros(g.shape)
    out[g.slices(Q)] = local
    return HaarDifference(Q, GridFunction(g, out))


def _level_selector(geometry: GridGeometry, predicate) -> list[np.ndarray]:
    """Evaluate a cube function into per-level float arrays."""
    if callable(predicate):
        sel = []
        for k in range(geometry.levels):
            s = geometry.scale_max - k
            shape = (1 << k,) * geometry.d
            arr = np.zeros(shape)
            for idx in np.ndindex(*shape):
                arr[idx] = float(predicate(Cube(s, tuple(int(i) for i in idx))))
            sel.append(arr)
        return sel
    sel = [np.asarray(p, dtype=float) for p in predicate]
    if len(sel) < geometry.levels:
        raise GridError("selector needs one array per non-mesh level")
    return sel[: geometry.levels]


def martingale_transform(f: GridFunction, coefficients) -> GridFunction:
    """sum_Q eps_Q Delta_Q f.

    ``coefficients`` is either a callable ``Cube -> float`` or a list with one
    array per level (shape ``(2**k,)*d``); cubes at the mesh level are ignored.
    """
    g = f.geometry
    eps = _level_selector(g, coefficients)
    pyr = f.pyramid()
    out = np.zeros(g.shape)
    for k in range(g.levels):
        e = np.asarray(eps[k], dtype=float)
        if not np.any(e):
            continue
        D = pyr[k + 1] - upsample(pyr[k], 2)
        D = D * upsample(e, 2)
        out += upsample(D, 1 << (g.levels - k - 1))
    return GridFunction(g, out)


def project(f: GridFunction, predicate) -> GridFunction:
    """sum of Delta_Q f over the cubes selected by ``predicate``."""
    g = f.geometry
    sel = _level_selector(g, predicate)
    return martingale_transform(f, [np.asarray(s, dtype=bool).astype(float) for s in sel])


def good_bad_projections(f: GridFunction, goodness: list[np.ndarray]) -> tuple[GridFunction, GridFunction]:
    """(P_good f, P_bad f); undecidable cubes (code -1) go to the bad part."""
    g = f.geometry
    good = [goodness[k] == 1 for k in range(g.levels)]
    bad = [~x for x in good]
    return project(f, good), project(f, bad)


def conditional_expectation(phi: GridFunction, S: Cube, family: Iterable[Cube]) -> GridFunction:
    """E(phi | F_S): phi on S minus the family, the family averages on each member."""
    g = phi.geometry
    family = list(family)
    out = np.zeros(g.shape)
    sl = g.slices(S)
    out[sl] = phi.values[sl]
    used = np.zeros(g.shape, dtype=bool)
    for Q in family:
        if not S.contains(Q):
            raise ContainmentError(f"{Q} is not inside {S}")
        q = g.slices(Q)
        if used[q].any():
            raise GridError("conditional expectation family overlaps")
        used[q] = True
        out[q] = phi.values[q].mean()
    return GridFunction(g, out)


def maximal_function(f: GridFunction) -> GridFunction:
    """Dyadic maximal function over window cubes, at cell resolution."""
    g = f.geometry
    pyr = mean_pyramid(np.abs(f.values))
    M = upsample(pyr[0], g.n)
    for k in range(1, g.levels + 1):
        M = np.maximum(M, upsample(pyr[k], 1 << (g.levels - k)))
    return GridFunction(g, M)


@dataclass
class CZDecomposition:
    good: GridFunction
    atoms: list[tuple[Cube, GridFunction]]
    height: float
    degenerate: bool = False

    @property
    def bad(self) -> GridFunction:
        out = GridFunction.zeros(self.good.geometry)
        for _, b in self.atoms:
            out = out + b
        return out

    def bad_measure(self) -> float:
        return float(sum(Q.measure for Q, _ in self.atoms))


def cz_decompose(f: GridFunction, height: float) -> CZDecomposition:
    """Calderon-Zygmund decomposition over the maximal cubes with <|f|>_Q > height."""
    if height <= 0:
        raise ValueError("height must be positive")
    g = f.geometry
    pyr = mean_pyramid(np.abs(f.values))
    marks = [p > height for p in pyr]
    good = f.values.copy()
    atoms = []
    for k, idx in maximal_cubes(marks):
        Q = Cube(g.scale_max - k, idx)
        sl = g.slices(Q)
        avg = f.values[sl].mean()
        b = np.zeros(g.shape)
        b[sl] = f.values[sl] - avg
        good[sl] = avg
        atoms.append((Q, GridFunction(g, b)))
    return CZDecomposition(GridFunction(g, good), atoms, height, degenerate=bool(marks[0].any()))
