"""Stopping trees, corona coefficients and the pair decomposition of <T f, g>."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse as sp

from .function import (GridFunction, components, martingale_differences, martingale_transform, maximal_cubes,
                       mean_pyramid)
from .grid import Cube, GridError, GridGeometry
from .operator import DiscreteOperator, bilinear_form, testing_estimate
from .sparse import (Box, SparseCollection, SparseEntry, lambda_eval, universal_sparse,
                     verify_sparsity)

log = logging.getLogger(__name__)

MAX_DOUBLINGS = 20


class StoppingError(GridError):
    pass


@dataclass
class TreeNode:
    cube: Cube
    level: int
    sigma_f: float
    sigma_g: float
    C0: float
    parent: int | None
    children: list[int] = field(default_factory=list)
    F1: list[Cube] = field(default_factory=list)
    F2: list[Cube] = field(default_factory=list)
    F3: list[Cube] = field(default_factory=list)
    F: list[Cube] = field(default_factory=list)   # dyadic components of F1 u F2 u F3
    stopped_measure: float = 0.0


@dataclass
class StoppingTree:
    geometry: GridGeometry
    nodes: list[TreeNode]
    C0: float
    testing_level: float
    r: int
    doublings: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def collection(self) -> SparseCollection:
        g = self.geometry
        entries = []
        for nd in self.nodes:
            lo, w = g.cell_box(nd.cube)
            removed = [Box(*g.cell_box(Q)) for Q in nd.F]
            entries.append(SparseEntry(Box(lo, w), removed, "standard", nd.cube.scale))
        return SparseCollection(g, entries, 0.5)

    def owner_levels(self) -> list[np.ndarray]:
        """``own[k][idx]`` = the smallest node containing the level-k cube idx."""
        g = self.geometry
        own = [np.full((1 << k,) * g.d, -1, dtype=np.int64) for k in range(g.levels + 1)]
        for i, nd in enumerate(self.nodes):  # parents precede children
            for k in range(nd.level, g.levels + 1):
                w = 1 << (k - nd.level)
                sl = tuple(slice(m * w, (m + 1) * w) for m in nd.cube.index)
                own[k][sl] = i
        return own

    def tau_levels(self) -> list[np.ndarray]:
        """Node index of Q^tau for every window cube Q, per level.

        Q^tau is the smallest node S with Q inside S and 2**r l(Q) <= l(S);
        cubes too large for any such S attach to the root.
        """
        g = self.geometry
        own = self.owner_levels()
        out = []
        for k in range(g.levels + 1):
            j = k - self.r
            if j < 0:
                out.append(np.zeros((1 << k,) * g.d, dtype=np.int64))
                continue
            arr = own[j]
            for ax in range(g.d):
                arr = np.repeat(arr, 1 << self.r, axis=ax)
            out.append(arr)
        return out


def _local_marks(values: np.ndarray, threshold: float) -> list[np.ndarray]:
    return [p > threshold for p in mean_pyramid(values)]


def _mask_from_marks(marks: list[np.ndarray]) -> np.ndarray:
    """Cell mask of the union of all marked cubes."""
    L = len(marks) - 1
    mask = np.zeros_like(marks[L], dtype=bool)
    for k, m in enumerate(marks):
        if m.any():
            w = 1 << (L - k)
            for ax in range(m.ndim):
                m = np.repeat(m, w, axis=ax)
            mask |= m
    return mask


def _maximal(marks: list[np.ndarray], S: Cube) -> list[Cube]:
    out = []
    for k, idx in maximal_cubes(marks):
        out.append(Cube(S.scale - k, tuple(m * (1 << k) + i for m, i in zip(S.index, idx))))
    return out


def build_stopping_tree(T: DiscreteOperator, f: GridFunction, g: GridFunction, P0: Cube | None = None,
                        C0: float = 4.0, r: int = 3, testing_level: float | None = None) -> StoppingTree:
    """Stopping cubes from the three conditions on |f|, |g| and |T 1_S|.

    Stopping values are the node's own averages of |f| and |g|.  If a node
    would lose half its measure, its C0 is doubled locally (logged); more
    than MAX_DOUBLINGS doublings abort.
    """
    geo = T.geometry
    P0 = geo.window() if P0 is None else P0
    if P0.scale != geo.scale_max:
        sl = geo.slices(P0)
        outside = np.ones(geo.shape, dtype=bool)
        outside[sl] = False
        if np.any(f.values[outside]) or np.any(g.values[outside]):
            raise StoppingError("f and g must be supported in the root cube")
    Tlev = testing_estimate(T) if testing_level is None else testing_level
    af = np.abs(f.values)
    ag = np.abs(g.values)
    nodes: list[TreeNode] = []
    stack = [(P0, None)]
    total_doublings = 0
    cells = np.arange(geo.n ** geo.d).reshape(geo.shape)
    while stack:
        S, parent = stack.pop()
        sl = geo.slices(S)
        fS, gS = af[sl], ag[sl]
        sf, sg = float(fS.mean()), float(gS.mean())
        ind = np.zeros(geo.n ** geo.d)
        ind[cells[sl].ravel()] = 1.0
        TS = np.abs((T.matrix @ ind).reshape(geo.shape)[sl]) / geo.cell_measure
        C = C0
        doublings = 0
        while True:
            m1 = _local_marks(fS, C * sf)
            m2 = _local_marks(gS, C * sg)
            m3 = _local_marks(TS, C * Tlev)
            mask = _mask_from_marks(m1) | _mask_from_marks(m2) | _mask_from_marks(m3)
            if mask.sum() < 0.5 * mask.size:
                break
            doublings += 1
            if doublings > MAX_DOUBLINGS:
                raise StoppingError(f"C0 doubled {MAX_DOUBLINGS} times at {S}; "
                                    f"<|f|>={sf:.3g} <|g|>={sg:.3g} T={Tlev:.3g}")
            C *= 2.0
            log.info("doubling C0 to %g at %s (stopped fraction %.3f)", C, S, mask.mean())
        total_doublings += doublings
        level = geo.scale_max - S.scale
        nd = TreeNode(S, level, sf, sg, C, parent,
                      F1=_maximal(m1, S), F2=_maximal(m2, S),
                      F3=_maximal(m3, S), stopped_measure=float(mask.mean()) * S.measure)
        nd.F = [Cube(S.scale - k, tuple(m * (1 << k) + i for m, i in zip(S.index, idx)))
                for k, idx in (components(mask) if mask.any() else [])]
        me = len(nodes)
        nodes.append(nd)
        if parent is not None:
            nodes[parent].children.append(me)
        for Q in reversed(nd.F):
            stack.append((Q, me))
    return StoppingTree(geo, nodes, C0, Tlev, r, total_doublings)


def epsilon_levels(tree: StoppingTree, f: GridFunction, node: int) -> list[np.ndarray]:
    """Per-level arrays of eps_Q for cubes with Q^tau = node (nan elsewhere).

    eps_Q <|f|>_S telescopes the Haar averages <Delta_P f>_{P_Q} over P with
    Q strongly inside P and P inside S, which leaves <f>_{Q^(r-1)} - <f>_S.
    """
    geo = tree.geometry
    S = tree.nodes[node]
    if S.sigma_f == 0:
        raise StoppingError(f"<|f|> vanishes on {S.cube}; eps is undefined there")
    pyr = f.pyramid()
    tau = tree.tau_levels()
    meanS = float(pyr[S.level][S.cube.index]) if S.level <= geo.levels else 0.0
    out = []
    r = tree.r
    for k in range(geo.levels + 1):
        arr = np.full((1 << k,) * geo.d, np.nan)
        sel = tau[k] == node
        j = k - (r - 1)
        if sel.any() and k - r >= S.level:
            anc = pyr[j]
            for ax in range(geo.d):
                anc = np.repeat(anc, 1 << (r - 1), axis=ax)
            arr[sel] = (anc[sel] - meanS) / S.sigma_f
        out.append(arr)
    return out


def epsilon_coefficients(tree: StoppingTree, f: GridFunction, node: int) -> dict[Cube, float]:
    geo = tree.geometry
    out = {}
    for k, arr in enumerate(epsilon_levels(tree, f, node)):
        for idx in zip(*np.nonzero(~np.isnan(arr))):
            out[Cube(geo.scale_max - k, tuple(int(i) for i in idx))] = float(arr[idx])
    return out


def epsilon_telescoped(tree: StoppingTree, f: GridFunction, node: int, Q: Cube) -> float:
    """Direct sum of <Delta_P f>_{P_Q} over the ancestor chain (oracle for eps)."""
    geo = tree.geometry
    S = tree.nodes[node]
    total = 0.0
    P = Q.ancestor(Q.scale + tree.r)
    while S.cube.contains(P):
        PQ = Q.ancestor(P.scale - 1)
        total += float(f.restrict(PQ).mean() - f.restrict(P).mean())
        if P.scale >= S.cube.scale:
            break
        P = P.parent()
    return total / S.sigma_f


def corona_transform(tree: StoppingTree, f: GridFunction, g: GridFunction, node: int) -> GridFunction:
    """Pi^eps_S g = sum over Q^tau = S of eps_Q Delta_Q g."""
    eps = epsilon_levels(tree, f, node)
    return martingale_transform(g, [np.nan_to_num(e, nan=0.0) for e in eps[: g.geometry.levels]])


# -------------------------------------------------------------- decomposition

@dataclass
class _Cubes:
    level: np.ndarray
    lo: np.ndarray     # (m, d) cell corner
    width: np.ndarray
    good: np.ndarray


def _enumerate_cubes(geo: GridGeometry, goodness: list[np.ndarray] | None) -> _Cubes:
    lv, lo, w, good = [], [], [], []
    for k in range(geo.levels):
        wk = geo.n >> k
        idx = np.indices((1 << k,) * geo.d).reshape(geo.d, -1).T
        lv.append(np.full(len(idx), k))
        lo.append(idx * wk)
        w.append(np.full(len(idx), wk))
        gk = np.ones(len(idx), dtype=bool) if goodness is None else (np.asarray(goodness[k]).ravel() == 1)
        good.append(gk)
    return _Cubes(np.concatenate(lv), np.concatenate(lo), np.concatenate(w), np.concatenate(good))


def haar_matrix(f: GridFunction, cubes: _Cubes) -> sp.csr_matrix:
    """Rows are the cell vectors of Delta_P f for the enumerated cubes."""
    geo = f.geometry
    D = martingale_differences(f)
    cellidx = np.arange(geo.n ** geo.d).reshape(geo.shape)
    rows, cols, vals = [], [], []
    for i, (k, lo, w) in enumerate(zip(cubes.level, cubes.lo, cubes.width)):
        sl = tuple(slice(a, a + w) for a in lo)
        c = cellidx[sl].ravel()
        rows.append(np.full(c.size, i))
        cols.append(c)
        vals.append(D[k][sl].ravel())
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(len(cubes.level), geo.n ** geo.d))


def pair_classes(cubes: _Cubes, r: int) -> dict[str, np.ndarray]:
    """Boolean masks (rows Q, columns P) of the four classes for l(Q) <= l(P)."""
    kP = cubes.level[None, :]
    kQ = cubes.level[:, None]
    valid = kQ >= kP
    deep = kQ - kP >= r
    meets = np.ones(valid.shape, dtype=bool)
    inside = np.ones(valid.shape, dtype=bool)
    for ax in range(cubes.lo.shape[1]):
        pl = cubes.lo[None, :, ax]
        pw = cubes.width[None, :]
        ql = cubes.lo[:, None, ax]
        qw = cubes.width[:, None]
        meets &= (ql < pl + 2 * pw) & (ql + qw > pl - pw)
        inside &= (ql >= pl) & (ql + qw <= pl + pw)
    return {
        "inside": valid & meets & deep & inside,
        "near": valid & meets & deep & ~inside,
        "far": valid & ~meets,
        "neighbor": valid & meets & ~deep,
    }


@dataclass
class HalfReport:
    inside: float
    near: float
    far: float
    neighbor: float
    total: float

    @property
    def bucket_sum(self) -> float:
        return self.inside + self.near + self.far + self.neighbor

    @property
    def residual(self) -> float:
        scale = max(abs(self.total), abs(self.inside) + abs(self.near) + abs(self.far) + abs(self.neighbor))
        return abs(self.bucket_sum - self.total) / scale if scale > 0 else 0.0

    def to_dict(self) -> dict:
        return {"inside": self.inside, "near": self.near, "far": self.far, "neighbor": self.neighbor,
                "total": self.total, "residual": self.residual}


@dataclass
class DecompositionReport:
    primary: HalfReport      # pairs with l(Q) <= l(P)
    dual: HalfReport         # pairs with l(Q) > l(P), through the transpose
    full_total: float        # <T P_good f, P_good g>
    far_profile: dict[tuple[int, int], float]

    @property
    def residual(self) -> float:
        s = self.primary.bucket_sum + self.dual.bucket_sum
        scale = max(abs(self.full_total), abs(self.primary.total) + abs(self.dual.total))
        return abs(s - self.full_total) / scale if scale > 0 else 0.0

    def to_dict(self) -> dict:
        return {"primary": self.primary.to_dict(), "dual": self.dual.to_dict(),
                "full_total": self.full_total, "residual": self.residual,
                "far_profile": {f"{u},{v}": x for (u, v), x in sorted(self.far_profile.items())}}


def _far_parameters(cubes: _Cubes) -> tuple[np.ndarray, np.ndarray]:
    """(u, v) of every pair: l(P) = 2**v l(Q) and Q inside 3**(u+1) P but not 3**u P."""
    v = cubes.level[:, None] - cubes.level[None, :]
    dev = np.zeros(v.shape)
    for ax in range(cubes.lo.shape[1]):
        c = cubes.lo[None, :, ax] + cubes.width[None, :] / 2.0
        ql = cubes.lo[:, None, ax]
        qh = ql + cubes.width[:, None]
        dev = np.maximum(dev, np.maximum(np.abs(ql - c), np.abs(qh - c)))
    m = 2.0 * dev / cubes.width[None, :]
    with np.errstate(divide="ignore"):
        u = np.ceil(np.log(np.maximum(m, 1.0)) / math.log(3.0) - 1e-12) - 1
    return u.astype(int), v


def _half(A: np.ndarray, f: GridFunction, g: GridFunction, cubes: _Cubes, r: int, strict: bool,
          profile: dict | None = None) -> tuple[dict[str, float], np.ndarray]:
    Hf = haar_matrix(f, cubes)
    Hg = haar_matrix(g, cubes)
    M = (Hg @ (Hf @ A.T).T)     # M[Q, P] = <T Delta_P f, Delta_Q g>
    M = np.asarray(M)
    good = cubes.good[:, None] & cubes.good[None, :]
    cls = pair_classes(cubes, r)
    if strict:
        eq = cubes.level[:, None] == cubes.level[None, :]
        cls = {k: m & ~eq for k, m in cls.items()}
    out = {k: float(M[m & good].sum()) for k, m in cls.items()}
    if profile is not None:
        u, v = _far_parameters(cubes)
        far = cls["far"] & good
        for uu, vv, x in zip(u[far], v[far], np.abs(M[far])):
            profile[(int(uu), int(vv))] = profile.get((int(uu), int(vv)), 0.0) + float(x)
    return out, M


def _direct_half(T: DiscreteOperator, f: GridFunction, g: GridFunction, goodness, strict: bool) -> float:
    """sum over levels kP of <T (good Delta at kP) f, (good Delta at levels >= kP) g>."""
    geo = f.geometry
    L = geo.levels
    good = [np.ones((1 << k,) * geo.d) if goodness is None else (goodness[k] == 1).astype(float)
            for k in range(L)]
    zero = [np.zeros((1 << k,) * geo.d) for k in range(L)]
    total = 0.0
    for kp in range(L):
        selP = [good[k] if k == kp else zero[k] for k in range(L)]
        start = kp + 1 if strict else kp
        selQ = [good[k] if k >= start else zero[k] for k in range(L)]
        total += bilinear_form(T, martingale_transform(f, selP), martingale_transform(g, selQ))
    return total


def decompose_form(T: DiscreteOperator, f: GridFunction, g: GridFunction, r: int,
                   goodness: list[np.ndarray] | None = None) -> DecompositionReport:
    """Bucket <T Delta_P f, Delta_Q g> over good pairs into inside/near/far/neighbor.

    The l(Q) <= l(P) half is the primary report; the other half is the same
    computation for (g, f) with the transposed operator.
    """
    geo = T.geometry
    cubes = _enumerate_cubes(geo, goodness)
    A = T.matrix
    profile: dict[tuple[int, int], float] = {}
    prim, _ = _half(A, f, g, cubes, r, strict=False, profile=profile)
    dual, _ = _half(A.T, g, f, cubes, r, strict=True)
    Tt = T.transpose()
    primary = HalfReport(**prim, total=_direct_half(T, f, g, goodness, strict=False))
    dualr = HalfReport(**dual, total=_direct_half(Tt, g, f, goodness, strict=True))
    good = [np.ones((1 << k,) * geo.d) if goodness is None else (goodness[k] == 1).astype(float)
            for k in range(geo.levels)]
    full = bilinear_form(T, martingale_transform(f, good), martingale_transform(g, good))
    return DecompositionReport(primary, dualr, full, profile)


# ---------------------------------------------------------- verification

class DominationFailure(RuntimeError):
    pass


@dataclass
class BoundReport:
    kernel: str
    geometry: dict
    seed: int | None
    B_T: float
    lambda_universal: float
    lambda_stopping: float
    certificates: dict
    timings: dict

    @property
    def ratio(self) -> float:
        return abs(self.B_T) / self.lambda_universal if self.lambda_universal > 0 else 0.0

    @property
    def ratio_stopping(self) -> float:
        return abs(self.B_T) / self.lambda_stopping if self.lambda_stopping > 0 else 0.0

    def to_dict(self) -> dict:
        return {"kernel": self.kernel, "geometry": self.geometry, "seed": self.seed, "B_T": self.B_T,
                "lambda_universal": self.lambda_universal, "lambda_stopping": self.lambda_stopping,
                "ratio": self.ratio, "ratio_stopping": self.ratio_stopping,
                "certificates": self.certificates, "timings": self.timings}


def in_half_window(f: GridFunction) -> bool:
    """Whether f vanishes outside the middle half of the window."""
    geo = f.geometry
    q = geo.n // 4
    inner = np.zeros(geo.shape, dtype=bool)
    inner[(slice(q, geo.n - q),) * geo.d] = True
    return not np.any(f.values[~inner])


def sparse_bound_verify(T: DiscreteOperator, f: GridFunction, g: GridFunction, C0: float = 4.0,
                        r: int = 3, seed: int | None = None, testing_level: float | None = None) -> BoundReport:
    """|B_T(f, g)| against the universal and stopping-tree sparse forms of (|f|, |g|)."""
    if not (in_half_window(f) and in_half_window(g)):
        raise ValueError("f and g must be supported in the middle half of the window")
    t0 = time.perf_counter()
    B = bilinear_form(T, f, g)
    t1 = time.perf_counter()
    af, ag = f.abs(), g.abs()
    uni = universal_sparse(af, ag)
    lam0 = lambda_eval(uni.collection, af, ag)
    t2 = time.perf_counter()
    tree = build_stopping_tree(T, f, g, C0=C0, r=r, testing_level=testing_level)
    coll = tree.collection()
    lam1 = lambda_eval(coll, af, ag)
    t3 = time.perf_counter()
    if B != 0 and (lam0 == 0 or lam1 == 0):
        raise DominationFailure("sparse form vanishes while the bilinear form does not")
    certs = {
        "universal": verify_sparsity(uni.collection).to_dict()
        | {"level_bound_violations": uni.level_bound_violations(), "cubes": len(uni.collection)},
        "stopping": verify_sparsity(coll).to_dict()
        | {"nodes": len(tree), "doublings": tree.doublings, "testing_level": tree.testing_level},
    }
    return BoundReport(T.kernel.name, T.geometry.to_dict(), seed, B, lam0, lam1, certs,
                       {"form": t1 - t0, "universal": t2 - t1, "stopping": t3 - t2})
