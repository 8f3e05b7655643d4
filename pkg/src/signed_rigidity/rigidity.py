"""Rigidity functions, their Jacobians, and rank-based classification.

Every row family is the analytic gradient of one rigidity-function entry:

* distance      ``1/2 |p_i - p_j|^2``
* cosine        ``u_j . u_k`` with bearings ``u_x = (p_x - p_i) / |p_x - p_i|``
* signed angle  ``det[u_j u_k] = u_j^T J u_k`` (2D)
* signed volume ``u_j . (u_k x u_l)`` (3D)

For the angle-type families only the ``j``/``k``/``l`` blocks are
differentiated; the block of the apex ``i`` is minus their sum, which keeps
every row exactly translation invariant.
"""
from __future__ import annotations

import enum
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import orth

from .framework import Framework, FrameworkError, Graph

# Perpendicular matrix: u^T J w = det[u w].
J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
# Rotation generators in R^3 (J_sigma x = e_sigma x x).
J3 = np.array([
    [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
    [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
    [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
])

DEFAULT_REL_TOL = 1e-10
# |S| or |V| below this marks a (near) collinear / coplanar constraint.
DEGENERATE_TOL = 1e-9


class RigidityError(FrameworkError):
    """Raised when a rigidity kind does not fit the framework."""


class RigidityKind(str, enum.Enum):
    DISTANCE_ONLY = "DistanceOnly"
    WEAK_DISTANCE_ANGLE = "WeakDistanceAngle"
    DISTANCE_SIGN_2D = "DistanceSign2D"
    ANGLE_SIGN_2D = "AngleSign2D"
    DISTANCE_VOLUME_3D = "DistanceVolume3D"
    ANGLE_VOLUME_3D = "AngleVolume3D"

    @property
    def families(self) -> tuple[str, ...]:
        return _FAMILIES[self]

    @property
    def dim(self) -> int | None:
        """Required dimension, or None if the kind works in 2D and 3D."""
        return _DIMS.get(self)

    @property
    def scales(self) -> bool:
        """True when uniform scaling is a trivial motion for this kind."""
        return self in (RigidityKind.ANGLE_SIGN_2D, RigidityKind.ANGLE_VOLUME_3D)

    @property
    def is_signed(self) -> bool:
        return self.dim is not None


_FAMILIES = {
    RigidityKind.DISTANCE_ONLY: ("edge",),
    RigidityKind.WEAK_DISTANCE_ANGLE: ("edge", "angle"),
    RigidityKind.DISTANCE_SIGN_2D: ("edge", "signed_angle"),
    RigidityKind.ANGLE_SIGN_2D: ("angle", "signed_angle"),
    RigidityKind.DISTANCE_VOLUME_3D: ("edge", "signed_volume"),
    RigidityKind.ANGLE_VOLUME_3D: ("angle", "signed_volume"),
}
_DIMS = {
    RigidityKind.DISTANCE_SIGN_2D: 2,
    RigidityKind.ANGLE_SIGN_2D: 2,
    RigidityKind.DISTANCE_VOLUME_3D: 3,
    RigidityKind.ANGLE_VOLUME_3D: 3,
}


def check_kind(kind: RigidityKind, dim: int) -> RigidityKind:
    kind = RigidityKind(kind)
    if kind.dim is not None and kind.dim != dim:
        raise RigidityError(f"{kind.value} requires dim = {kind.dim}, framework has dim = {dim}")
    return kind


def trivial_dimension(kind: RigidityKind, dim: int, graph: Graph) -> int:
    """Dimension of the trivial-motion space (translations, rotations, maybe scaling)."""
    kind = RigidityKind(kind)
    base = dim * (dim + 1) // 2
    if kind.scales:
        return base + 1
    if kind is RigidityKind.WEAK_DISTANCE_ANGLE and not graph.edges:
        return base + 1
    return base


def target_rank(kind: RigidityKind, dim: int, graph: Graph) -> int:
    return max(dim * graph.n - trivial_dimension(kind, dim, graph), 0)


def constraint_count(kind: RigidityKind, graph: Graph) -> int:
    kind = RigidityKind(kind)
    counts = {"edge": graph.m_d, "angle": graph.m_a,
              "signed_angle": graph.m_s, "signed_volume": graph.m_v}
    return sum(counts[f] for f in kind.families)


# -- rigidity-function entries ------------------------------------------------

@lru_cache(maxsize=256)
def _index_cached(items: tuple, width: int):
    if not items:
        cols = [np.zeros(0, dtype=int) for _ in range(width)]
    else:
        a = np.asarray(items, dtype=int)
        cols = [a[:, c].copy() for c in range(width)]
    for c in cols:
        c.setflags(write=False)
    return cols


def _index(items, width):
    return _index_cached(tuple(items), width)


def _bearings(P, I, X):
    z = P[X] - P[I]
    nrm = np.sqrt(np.einsum("ij,ij->i", z, z))
    return z, nrm, z / nrm[:, None]


def _project(a, u, nrm):
    """Batched ``a^T P_u / |z|`` with ``P_u = I - u u^T``."""
    return (a - np.sum(a * u, axis=1)[:, None] * u) / nrm[:, None]


def distance_values(graph: Graph, P: np.ndarray) -> np.ndarray:
    I, Jx = _index(graph.edges, 2)
    z = P[I] - P[Jx]
    return 0.5 * np.sum(z * z, axis=1)


def cosine_values(graph: Graph, P: np.ndarray) -> np.ndarray:
    I, Jx, K = _index(graph.angles, 3)
    _, _, uj = _bearings(P, I, Jx)
    _, _, uk = _bearings(P, I, K)
    return np.sum(uj * uk, axis=1)


def signed_angle_values(graph: Graph, P: np.ndarray) -> np.ndarray:
    if not graph.signed_angles:
        return np.zeros(0)
    I, Jx, K = _index(graph.signed_angles, 3)
    _, _, uj = _bearings(P, I, Jx)
    _, _, uk = _bearings(P, I, K)
    return np.einsum("ma,ab,mb->m", uj, J2, uk)


def signed_volume_values(graph: Graph, P: np.ndarray) -> np.ndarray:
    if not graph.signed_volumes:
        return np.zeros(0)
    I, Jx, K, L = _index(graph.signed_volumes, 4)
    _, _, uj = _bearings(P, I, Jx)
    _, _, uk = _bearings(P, I, K)
    _, _, ul = _bearings(P, I, L)
    return np.sum(uj * np.cross(uk, ul), axis=1)


_VALUES = {
    "edge": distance_values,
    "angle": cosine_values,
    "signed_angle": signed_angle_values,
    "signed_volume": signed_volume_values,
}


def family_values(family: str, graph: Graph, P: np.ndarray) -> np.ndarray:
    return _VALUES[family](graph, P)


# -- Jacobian rows ---------------------------------------------------------------

def _empty_rows(m, n, d):
    return np.zeros((m, n, d))


def _distance_rows(graph: Graph, P: np.ndarray) -> np.ndarray:
    n, d = P.shape
    I, Jx = _index(graph.edges, 2)
    R = _empty_rows(len(I), n, d)
    r = np.arange(len(I))
    z = P[I] - P[Jx]
    R[r, I] = z
    R[r, Jx] = -z
    return R.reshape(len(I), n * d)


def _apex_rows(P, I, others, blocks):
    n, d = P.shape
    m = len(I)
    R = _empty_rows(m, n, d)
    r = np.arange(m)
    total = np.zeros((m, d))
    for X, B in zip(others, blocks):
        R[r, X] = B
        total += B
    R[r, I] = -total
    return R.reshape(m, n * d)


def _cosine_rows(graph: Graph, P: np.ndarray) -> np.ndarray:
    I, Jx, K = _index(graph.angles, 3)
    _, nj, uj = _bearings(P, I, Jx)
    _, nk, uk = _bearings(P, I, K)
    bj = _project(uk, uj, nj)
    bk = _project(uj, uk, nk)
    return _apex_rows(P, I, (Jx, K), (bj, bk))


def _signed_angle_rows(graph: Graph, P: np.ndarray) -> np.ndarray:
    I, Jx, K = _index(graph.signed_angles, 3)
    _, nj, uj = _bearings(P, I, Jx)
    _, nk, uk = _bearings(P, I, K)
    # block k: u_j^T J P_{z_k}/|z_k| ; block j: u_k^T J^T P_{z_j}/|z_j|
    bk = _project(uj @ J2, uk, nk)
    bj = _project(uk @ J2.T, uj, nj)
    return _apex_rows(P, I, (Jx, K), (bj, bk))


def cross_matrix(x: np.ndarray) -> np.ndarray:
    """Skew matrix with ``cross_matrix(x) @ y == x x y``; batched over leading axes."""
    x = np.asarray(x)
    M = np.zeros(x.shape[:-1] + (3, 3))
    M[..., 0, 1], M[..., 0, 2] = -x[..., 2], x[..., 1]
    M[..., 1, 0], M[..., 1, 2] = x[..., 2], -x[..., 0]
    M[..., 2, 0], M[..., 2, 1] = -x[..., 1], x[..., 0]
    return M


def _signed_volume_rows(graph: Graph, P: np.ndarray) -> np.ndarray:
    I, Jx, K, L = _index(graph.signed_volumes, 4)
    _, nj, uj = _bearings(P, I, Jx)
    _, nk, uk = _bearings(P, I, K)
    _, nl, ul = _bearings(P, I, L)
    bj = _project(np.cross(uk, ul), uj, nj)
    bk = _project(-np.einsum("ma,mab->mb", uj, cross_matrix(ul)), uk, nk)
    bl = _project(np.einsum("ma,mab->mb", uj, cross_matrix(uk)), ul, nl)
    return _apex_rows(P, I, (Jx, K, L), (bj, bk, bl))


_ROWS = {
    "edge": _distance_rows,
    "angle": _cosine_rows,
    "signed_angle": _signed_angle_rows,
    "signed_volume": _signed_volume_rows,
}


def family_rows(family: str, graph: Graph, P: np.ndarray) -> np.ndarray:
    return _ROWS[family](graph, P)


def distance_rows(fw: Framework) -> np.ndarray:
    """Gradient of ``1/2 |z_ij|^2`` for every edge: ``z^T`` at i, ``-z^T`` at j."""
    return _distance_rows(fw.graph, fw.positions)


def cosine_rows(fw: Framework) -> np.ndarray:
    return _cosine_rows(fw.graph, fw.positions)


def signed_angle_rows(fw: Framework) -> np.ndarray:
    check_kind(RigidityKind.DISTANCE_SIGN_2D, fw.dim)
    return _signed_angle_rows(fw.graph, fw.positions)


def signed_volume_rows(fw: Framework) -> np.ndarray:
    check_kind(RigidityKind.DISTANCE_VOLUME_3D, fw.dim)
    return _signed_volume_rows(fw.graph, fw.positions)


# -- stacking -----------------------------------------------------------------

def _row_scale(kind: RigidityKind, family: str, gain_k: float, graph: Graph) -> float:
    if family in ("signed_angle", "signed_volume"):
        return gain_k
    if kind is RigidityKind.WEAK_DISTANCE_ANGLE and family == "edge":
        return 2.0
    return 1.0


def rigidity_values(graph: Graph, P: np.ndarray, kind: RigidityKind, gain_k: float = 1.0) -> np.ndarray:
    """Stacked rigidity function of ``kind`` (signed entries scaled by ``gain_k``)."""
    kind = RigidityKind(kind)
    parts = [_row_scale(kind, f, gain_k, graph) * _VALUES[f](graph, P) for f in kind.families]
    return np.concatenate(parts) if parts else np.zeros(0)


def rigidity_rows(graph: Graph, P: np.ndarray, kind: RigidityKind, gain_k: float = 1.0) -> np.ndarray:
    kind = RigidityKind(kind)
    n, d = P.shape
    parts = [_row_scale(kind, f, gain_k, graph) * _ROWS[f](graph, P) for f in kind.families]
    return np.vstack(parts) if parts else np.zeros((0, n * d))


def rigidity_function(fw: Framework, kind: RigidityKind, gain_k: float = 1.0) -> np.ndarray:
    kind = check_kind(kind, fw.dim)
    return rigidity_values(fw.graph, fw.positions, kind, gain_k)


_LABEL = {"edge": "d", "angle": "a", "signed_angle": "s", "signed_volume": "v"}
_LIST = {"edge": "edges", "angle": "angles", "signed_angle": "signed_angles",
         "signed_volume": "signed_volumes"}


def row_labels(graph: Graph, kind: RigidityKind) -> tuple[str, ...]:
    labels = []
    for fam in kind.families:
        for idx in getattr(graph, _LIST[fam]):
            one = [i + 1 for i in idx]
            if fam == "edge":
                labels.append(f"d({one[0]},{one[1]})")
            else:
                labels.append(f"{_LABEL[fam]}({one[0]};{','.join(map(str, one[1:]))})")
    return tuple(labels)


@dataclass(frozen=True, eq=False)
class RigidityMatrix:
    kind: RigidityKind
    rows: np.ndarray = field(repr=False)
    row_labels: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape


def assemble_rigidity_matrix(fw: Framework, kind: RigidityKind, gain_k: float = 1.0) -> RigidityMatrix:
    """Stack the row families of ``kind``; signed rows come last, scaled by ``gain_k``."""
    kind = check_kind(kind, fw.dim)
    if not gain_k > 0:
        raise RigidityError("gain_k must be positive")
    R = rigidity_rows(fw.graph, fw.positions, kind, gain_k)
    return RigidityMatrix(kind, R, row_labels(fw.graph, kind))


# -- rank and null space --------------------------------------------------------

def rank_threshold(singular_values: np.ndarray, shape: tuple[int, int],
                   rel_tol: float = DEFAULT_REL_TOL) -> float:
    smax = float(singular_values.max()) if singular_values.size else 0.0
    return rel_tol * smax * max(shape)


def numerical_rank(matrix, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Count singular values above ``rel_tol * s_max * max(m, dn)``."""
    A = matrix.rows if isinstance(matrix, RigidityMatrix) else np.asarray(matrix, float)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    tau = rank_threshold(s, A.shape, rel_tol)
    return int(np.count_nonzero(s > tau))


def trivial_motion_columns(fw: Framework, kind: RigidityKind) -> np.ndarray:
    """Raw (non-orthonormal) trivial motions: translations, rotations, maybe scaling."""
    kind = check_kind(kind, fw.dim)
    n, d = fw.n, fw.dim
    P = fw.positions
    cols = [np.tile(np.eye(d)[a], n) for a in range(d)]
    if d == 2:
        cols.append((P @ J2.T).reshape(-1))
    else:
        cols.extend((P @ J3[s].T).reshape(-1) for s in range(3))
    if trivial_dimension(kind, d, fw.graph) > d * (d + 1) // 2:
        cols.append(P.reshape(-1).copy())
    return np.column_stack(cols)


def trivial_motion_basis(fw: Framework, kind: RigidityKind) -> np.ndarray:
    """Orthonormal basis (columns) of the trivial motions of ``kind`` at ``fw``."""
    return orth(trivial_motion_columns(fw, kind))


# -- classification -----------------------------------------------------------------

@dataclass(frozen=True)
class RigidityReport:
    kind: RigidityKind
    numerical_rank: int
    rank_threshold: float
    nullity: int
    trivial_residuals: float
    is_rigid: bool
    is_minimal: bool
    proposition_check: bool | None
    target_rank: int
    constraint_count: int
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "numerical_rank": self.numerical_rank,
            "rank_threshold": self.rank_threshold,
            "nullity": self.nullity,
            "trivial_residuals": self.trivial_residuals,
            "is_rigid": self.is_rigid,
            "is_minimal": self.is_minimal,
            "proposition_check": self.proposition_check,
            "target_rank": self.target_rank,
            "constraint_count": self.constraint_count,
            "warnings": list(self.warnings),
        }


def _classical_kind(kind: RigidityKind) -> RigidityKind | None:
    if kind in (RigidityKind.DISTANCE_SIGN_2D, RigidityKind.DISTANCE_VOLUME_3D):
        return RigidityKind.DISTANCE_ONLY
    if kind.scales:
        return RigidityKind.WEAK_DISTANCE_ANGLE
    return None


def _rank_of(graph, P, kind, rel_tol):
    return numerical_rank(rigidity_rows(graph, P, kind), rel_tol)


def classical_rigidity(fw: Framework, kind: RigidityKind, rel_tol: float = DEFAULT_REL_TOL) -> bool | None:
    """Rank test of the unsigned sub-framework backing ``kind``.

    Distance kinds use the distance rigidity matrix; angle kinds use the weak
    rigidity matrix of the angle set alone (no edges, so scaling is trivial).
    """
    kind = check_kind(kind, fw.dim)
    classical = _classical_kind(kind)
    if classical is None:
        return None
    g = fw.graph
    if classical is RigidityKind.WEAK_DISTANCE_ANGLE:
        g = Graph(n=g.n, angles=g.angles)
    return _rank_of(g, fw.positions, classical, rel_tol) == target_rank(classical, fw.dim, g)


def _warnings(fw: Framework, kind: RigidityKind, is_rigid: bool, classical: bool | None) -> list[str]:
    g, P = fw.graph, fw.positions
    out = []
    if "angle" in kind.families and g.angles:
        A = cosine_values(g, P)
        for t, a in zip(g.angles, A):
            if abs(a) >= 1.0 - 1e-12:
                out.append(f"degenerate angle a({t[0] + 1};{t[1] + 1},{t[2] + 1}): collinear")
    signed = None
    if "signed_angle" in kind.families and g.signed_angles:
        signed = ("s", g.signed_angles, signed_angle_values(g, P))
    elif "signed_volume" in kind.families and g.signed_volumes:
        signed = ("v", g.signed_volumes, signed_volume_values(g, P))
    if signed is not None:
        tag, items, vals = signed
        for idx, v in zip(items, vals):
            if abs(v) <= DEGENERATE_TOL:
                label = ",".join(str(i + 1) for i in idx[1:])
                out.append(f"degenerate signed constraint {tag}({idx[0] + 1};{label}): zero area/volume")
        if is_rigid and classical is False and np.any(np.abs(vals) < 1.0 - 1e-12):
            out.append("sine ambiguity: a signed value with |value| < 1 is not backed "
                       "by classical rigidity of the unsigned constraints")
    return out


def classify(fw: Framework, kind: RigidityKind, rel_tol: float = DEFAULT_REL_TOL) -> RigidityReport:
    """Rank-based IRDS / IRAS (or classical) verdict for ``fw`` under ``kind``."""
    kind = check_kind(kind, fw.dim)
    g, d = fw.graph, fw.dim
    R = rigidity_rows(g, fw.positions, kind)
    dn = d * g.n
    if R.size:
        s = np.linalg.svd(R, compute_uv=False)
        tau = rank_threshold(s, R.shape, rel_tol)
        rank = int(np.count_nonzero(s > tau))
    else:
        tau, rank = 0.0, 0
    basis = trivial_motion_basis(fw, kind)
    resid = float(np.abs(R @ basis).max()) if R.size and basis.size else 0.0
    target = target_rank(kind, d, g)
    count = constraint_count(kind, g)
    is_rigid = rank == target
    classical = classical_rigidity(fw, kind, rel_tol)
    prop = None if classical is None else bool(classical and is_rigid)
    return RigidityReport(
        kind=kind,
        numerical_rank=rank,
        rank_threshold=tau,
        nullity=dn - rank,
        trivial_residuals=resid,
        is_rigid=is_rigid,
        is_minimal=is_rigid and count == target,
        proposition_check=prop,
        target_rank=target,
        constraint_count=count,
        warnings=tuple(_warnings(fw, kind, is_rigid, classical)),
    )


def default_kind(graph: Graph, dim: int) -> RigidityKind:
    """The kind a framework's constraint families naturally select."""
    if dim == 2:
        if graph.signed_angles:
            return RigidityKind.ANGLE_SIGN_2D if graph.angles and not graph.edges else RigidityKind.DISTANCE_SIGN_2D
    else:
        if graph.signed_volumes:
            return RigidityKind.ANGLE_VOLUME_3D if graph.angles and not graph.edges else RigidityKind.DISTANCE_VOLUME_3D
    if graph.angles:
        return RigidityKind.WEAK_DISTANCE_ANGLE
    if graph.edges:
        return RigidityKind.DISTANCE_ONLY
    return RigidityKind.DISTANCE_SIGN_2D if dim == 2 else RigidityKind.DISTANCE_VOLUME_3D
