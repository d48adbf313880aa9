"""Dyadic grids, shifted cubes and good/bad classification.

Scales are indexed so that a cube of scale ``s`` has side length ``2**s``.
The window ``P0`` is the cube ``[0, 2**scale_max)^d`` and the finest mesh
cells have side ``2**scale_min``.  Inside the window every cube is addressed
by its integer index ``m`` at its scale, so cube ``(s, m)`` covers the cells
``[m * 2**(s - scale_min), (m + 1) * 2**(s - scale_min))`` along each axis.

Goodness is decided from the *position digits* of a cube: the digit at level
``j >= s`` along an axis says whether the level-``j`` ancestor of the cube is
the lower (0) or upper (1) half of the level-``j + 1`` ancestor.  A run of
equal digits from level ``s + floor((1 - gamma) t)`` up to level ``s + t``
means the cube hugs the boundary of its level-``s + t + 1`` ancestor, which
is what makes it bad.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


class GridError(ValueError):
    pass


class ScaleRangeError(GridError):
    pass


class ContainmentError(GridError):
    pass


class GridMismatchError(GridError):
    pass


class UndecidableGoodness(GridError):
    """Raised (in strict mode) when the omega window is too short to decide goodness."""


class Goodness(enum.Enum):
    GOOD = "good"
    BAD = "bad"
    UNDECIDABLE = "undecidable"


class Relation(enum.Enum):
    INSIDE = "inside"
    NEAR = "near"
    FAR = "far"
    NEIGHBOR = "neighbor"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class GridGeometry:
    d: int
    scale_min: int
    scale_max: int

    def __post_init__(self):
        if self.d < 1:
            raise GridError("dimension must be positive")
        if not self.scale_min < self.scale_max:
            raise GridError("need scale_min < scale_max")

    @property
    def levels(self) -> int:
        """Mesh depth L = scale_max - scale_min."""
        return self.scale_max - self.scale_min

    @property
    def n(self) -> int:
        """Cells per axis."""
        return 1 << self.levels

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_size(self) -> float:
        return 2.0 ** self.scale_min

    @property
    def cell_measure(self) -> float:
        return self.cell_size ** self.d

    @property
    def side(self) -> float:
        return 2.0 ** self.scale_max

    def cells_per_side(self, s: int) -> int:
        self.check_scale(s)
        return 1 << (s - self.scale_min)

    def check_scale(self, s: int) -> None:
        if not self.scale_min <= s <= self.scale_max:
            raise ScaleRangeError(f"scale {s} outside [{self.scale_min}, {self.scale_max}]")

    def level_of(self, s: int) -> int:
        """Depth below the window: 0 for P0, L for mesh cells."""
        self.check_scale(s)
        return self.scale_max - s

    def window(self) -> "Cube":
        return Cube(self.scale_max, (0,) * self.d)

    def cubes(self, s: int) -> Iterator["Cube"]:
        """All cubes of scale ``s`` inside the window, in row-major order."""
        k = 1 << self.level_of(s)
        for idx in np.ndindex(*(k,) * self.d):
            yield Cube(s, tuple(int(i) for i in idx))

    def all_cubes(self) -> Iterator["Cube"]:
        for s in range(self.scale_max, self.scale_min - 1, -1):
            yield from self.cubes(s)

    def cell_box(self, Q: "Cube") -> tuple[tuple[int, ...], int]:
        """(lower corner in cells, side in cells) of a standard cube."""
        w = self.cells_per_side(Q.scale)
        return tuple(m * w for m in Q.index), w

    def slices(self, Q: "Cube") -> tuple[slice, ...]:
        lo, w = self.cell_box(Q)
        if any(x < 0 or x + w > self.n for x in lo):
            raise ContainmentError(f"{Q} is not inside the window")
        return tuple(slice(x, x + w) for x in lo)

    def to_dict(self) -> dict:
        return {"d": self.d, "scale_min": self.scale_min, "scale_max": self.scale_max}


@dataclass(frozen=True, order=True)
class Cube:
    scale: int
    index: tuple[int, ...]
    grid_id: str = "standard"

    @property
    def d(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** self.scale

    @property
    def measure(self) -> float:
        return self.side ** self.d

    def corner(self) -> np.ndarray:
        return np.array(self.index, dtype=float) * self.side

    def parent(self) -> "Cube":
        return Cube(self.scale + 1, tuple(m >> 1 for m in self.index), self.grid_id)

    def ancestor(self, scale: int) -> "Cube":
        k = scale - self.scale
        if k < 0:
            raise ScaleRangeError("ancestor must be at a coarser scale")
        return Cube(scale, tuple(m >> k for m in self.index), self.grid_id)

    def children(self) -> list["Cube"]:
        out = []
        for bits in np.ndindex(*(2,) * self.d):
            out.append(Cube(self.scale - 1, tuple(2 * m + b for m, b in zip(self.index, bits)), self.grid_id))
        return out

    def contains(self, other: "Cube") -> bool:
        return other.scale <= self.scale and other.ancestor(self.scale).index == self.index


@dataclass(frozen=True)
class GoodnessParams:
    gamma: float
    r: int

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise GridError("gamma must lie in (0, 1)")
        if self.r < self.min_r(self.gamma):
            raise GridError(f"r={self.r} below the admissible minimum {self.min_r(self.gamma)}")

    @staticmethod
    def min_r(gamma: float) -> int:
        return max(math.ceil(1.0 / (1.0 - gamma)), math.ceil(1.0 / gamma))

    def run_start(self, t: int) -> int:
        """Offset (in levels above the cube) where the length-t run starts."""
        return math.floor((1.0 - self.gamma) * t)


@dataclass
class ShiftSequence:
    """Binary shift vectors omega_j in {0,1}^d, one per level j in [lo, hi).

    ``bits[j - lo]`` is the vector attached to level ``j``; it contributes
    ``2**j * omega_j`` to the corner of every cube of scale greater than ``j``.
    """

    lo: int
    bits: np.ndarray  # shape (hi - lo, d), dtype uint8
    seed: int | None = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise GridError("omega must be a 2-D array (levels x d)")
        if np.any(self.bits > 1):
            raise GridError("omega entries must be binary")

    @property
    def hi(self) -> int:
        return self.lo + self.bits.shape[0]

    @property
    def d(self) -> int:
        return self.bits.shape[1]

    def at(self, level: int) -> np.ndarray:
        if not self.lo <= level < self.hi:
            raise ScaleRangeError(f"omega has no entry at level {level}")
        return self.bits[level - self.lo]

    @classmethod
    def zeros(cls, lo: int, hi: int, d: int) -> "ShiftSequence":
        return cls(lo, np.zeros((hi - lo, d), dtype=np.uint8))

    @classmethod
    def random(cls, lo: int, hi: int, d: int, seed: int | None = None,
               rng: np.random.Generator | None = None) -> "ShiftSequence":
        if rng is None:
            rng = np.random.default_rng(seed)
        return cls(lo, rng.integers(0, 2, size=(hi - lo, d), dtype=np.uint8), seed)

    @classmethod
    def from_pattern(cls, lo: int, hi: int, d: int, pattern: Sequence[int]) -> "ShiftSequence":
        """Repeat ``pattern`` over the levels, the same bit in every coordinate."""
        col = np.array([pattern[(j - lo) % len(pattern)] for j in range(lo, hi)], dtype=np.uint8)
        return cls(lo, np.repeat(col[:, None], d, axis=1))

    def offset_integer(self, start: int, count: int) -> np.ndarray:
        """W = sum_{i < count} 2**i * omega_{start + i}, per axis (exact ints)."""
        w = np.zeros(self.d, dtype=object)
        for i in range(count):
            w = w + (1 << i) * self.at(start + i).astype(object)
        return w


def shift_cube(Q: Cube, omega: ShiftSequence, geometry: GridGeometry | None = None) -> tuple[np.ndarray, float]:
    """Corner and side of the realized cube ``Q + sum_{j < s} 2**j omega_j``.

    Levels below the finest mesh (or below the start of omega) contribute
    nothing, i.e. the shift is truncated at the finest scale.
    """
    if geometry is not None:
        geometry.check_scale(Q.scale)
        lo = max(omega.lo, geometry.scale_min)
    else:
        lo = omega.lo
    corner = Q.corner()
    for j in range(lo, min(Q.scale, omega.hi)):
        corner = corner + (2.0 ** j) * omega.at(j)
    return corner, Q.side


def position_digits(Q: Cube, omega: ShiftSequence, count: int) -> np.ndarray:
    """Position digits of the realized cube at levels Q.scale .. Q.scale+count-1.

    The realized cube sits at relative index ``(m - W) mod 2**count`` inside
    its realized ancestor of scale ``Q.scale + count``, where W collects the
    omega bits at those levels.  Returns an int array of shape (count, d).
    """
    W = omega.offset_integer(Q.scale, count)
    out = np.zeros((count, Q.d), dtype=np.int64)
    for a in range(Q.d):
        rel = (Q.index[a] - int(W[a])) % (1 << count)
        for i in range(count):
            out[i, a] = (rel >> i) & 1
    return out


def _run_is_bad(digits: np.ndarray, params: GoodnessParams, t_max: int) -> bool:
    for t in range(params.r, t_max + 1):
        a = params.run_start(t)
        seg = digits[a:t + 1]
        if np.any(np.all(seg == seg[0], axis=0)):
            return True
    return False


def max_run_length(Q: Cube, omega: ShiftSequence) -> int:
    """Largest t whose run (levels up to Q.scale + t) fits inside omega."""
    return omega.hi - 1 - Q.scale


def classify_good(Q: Cube, omega: ShiftSequence, params: GoodnessParams,
                  strict: bool = False) -> Goodness:
    """Good/bad label of the realized cube, or UNDECIDABLE if omega is too short.

    Bad iff for some t in [r, t_max] and some axis, the position digits at
    levels ``s + floor((1-gamma) t) .. s + t`` all agree.
    """
    if Q.scale < omega.lo:
        raise ScaleRangeError("cube is finer than the omega window")
    t_max = max_run_length(Q, omega)
    if t_max < params.r:
        if strict:
            raise UndecidableGoodness(f"{Q}: omega reaches only t={t_max} < r={params.r}")
        return Goodness.UNDECIDABLE
    digits = position_digits(Q, omega, t_max + 1)
    return Goodness.BAD if _run_is_bad(digits, params, t_max) else Goodness.GOOD


def window_goodness(geometry: GridGeometry, omega: ShiftSequence,
                    params: GoodnessParams) -> list[np.ndarray]:
    """Goodness labels for every window cube, one int8 array per level.

    The window is taken to be the realized cube of scale ``scale_max`` with
    index 0; cubes inside it have standard relative indices, and digits above
    the window come from omega.  Codes: 1 good, 0 bad, -1 undecidable.
    Returns ``out[level]`` of shape ``(2**level,) * d``.
    """
    if omega.hi <= geometry.scale_max:
        top_digits = np.zeros((0, geometry.d), dtype=np.int64)
    else:
        top = Cube(geometry.scale_max, (0,) * geometry.d)
        top_digits = position_digits(top, omega, omega.hi - geometry.scale_max)
    E = top_digits.shape[0]
    top_int = np.zeros(geometry.d, dtype=np.int64)
    for i in range(E):
        top_int += top_digits[i].astype(np.int64) << i
    out = []
    for level in range(geometry.levels + 1):
        s = geometry.scale_max - level
        k = 1 << level
        t_max = (geometry.scale_max + E) - 1 - s
        shape = (k,) * geometry.d
        if t_max < params.r:
            out.append(np.full(shape, -1, dtype=np.int8))
            continue
        idx = np.indices(shape, dtype=np.int64)
        # full relative index R inside the realized ancestor of scale s + t_max + 1
        R = [idx[a] + (top_int[a] << level) for a in range(geometry.d)]
        bad = np.zeros(shape, dtype=bool)
        for t in range(params.r, t_max + 1):
            a0 = params.run_start(t)
            mask = (1 << (t - a0 + 1)) - 1
            for a in range(geometry.d):
                seg = (R[a] >> a0) & mask
                bad |= (seg == 0) | (seg == mask)
        out.append(np.where(bad, 0, 1).astype(np.int8))
    return out


def _boxes(P: Cube, Q: Cube) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    pl = P.corner()
    ql = Q.corner()
    return pl, pl + P.side, ql, ql + Q.side


def skeleton_distance(Q: Cube, P: Cube) -> float:
    """Distance from Q to the union of the boundaries of P's children."""
    if Q.grid_id != P.grid_id:
        raise GridMismatchError("cubes from different grids")
    if not P.contains(Q):
        raise ContainmentError(f"{Q} is not contained in {P}")
    if Q.scale == P.scale:
        return 0.0
    child = Q.ancestor(P.scale - 1)
    return boundary_distance(Q, child)


def boundary_distance(Q: Cube, P: Cube) -> float:
    """Distance from Q (inside P) to the boundary of P."""
    if not P.contains(Q):
        raise ContainmentError(f"{Q} is not contained in {P}")
    pl, ph, ql, qh = _boxes(P, Q)
    return float(min(np.min(ql - pl), np.min(ph - qh)))


def relation(P: Cube, Q: Cube, r: int) -> Relation:
    """Which of the four pair classes (inside/near/far/neighbor) (P, Q) falls in.

    Boundary case ``l(P) = 2**r l(Q)`` is assigned to inside/near, so the
    neighbor class requires ``l(P) < 2**r l(Q)``.
    """
    if P.grid_id != Q.grid_id:
        raise GridMismatchError("cubes from different grids")
    if Q.scale > P.scale:
        return Relation.NOT_APPLICABLE
    pl, ph, ql, qh = _boxes(P, Q)
    tl, th = pl - P.side, ph + P.side
    meets_3p = bool(np.all(ql < th) and np.all(qh > tl))
    if not meets_3p:
        return Relation.FAR
    deep = P.scale - Q.scale >= r
    if not deep:
        return Relation.NEIGHBOR
    if P.contains(Q):
        return Relation.INSIDE
    return Relation.NEAR


def grid_to_json(geometry: GridGeometry, params: GoodnessParams | None,
                 omega: ShiftSequence) -> str:
    doc = {
        "d": geometry.d,
        "scale_min": geometry.scale_min,
        "scale_max": geometry.scale_max,
        "gamma": None if params is None else params.gamma,
        "r": None if params is None else params.r,
        "omega_lo": omega.lo,
        "omega": omega.bits.astype(int).tolist(),
        "seed": omega.seed,
    }
    return json.dumps(doc)


def grid_from_json(text: str) -> tuple[GridGeometry, GoodnessParams | None, ShiftSequence]:
    doc = json.loads(text)
    geometry = GridGeometry(doc["d"], doc["scale_min"], doc["scale_max"])
    params = None
    if doc.get("gamma") is not None:
        params = GoodnessParams(float(doc["gamma"]), int(doc["r"]))
    bits = np.array(doc["omega"], dtype=np.uint8).reshape(-1, geometry.d)
    omega = ShiftSequence(int(doc.get("omega_lo", geometry.scale_min)), bits, doc.get("seed"))
    return geometry, params, omega
