"""Brute-force checks for the analytic rigidity matrices.

Nothing here calls into the analytic row code: entries are re-evaluated
from their definitions (explicit 2x2 / 3x3 determinants) in extended
precision, differentiated by central differences, and compared.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .framework import Framework, make_graph, validate_framework
from .rigidity import RigidityKind, check_kind, rank_threshold, rigidity_rows

ABS_SWITCH = 1e-8

ScalarField = Callable[[np.ndarray], float]


class OracleError(ArithmeticError):
    pass


@dataclass(frozen=True)
class JacobianCheckResult:
    max_abs_error: float
    max_rel_error: float
    worst_entry: tuple[int, int]
    step_used: float

    def to_dict(self) -> dict:
        return asdict(self)


def finite_difference_jacobian(scalar_field: ScalarField, p, h: float = 1e-6,
                               dtype=np.longdouble) -> np.ndarray:
    """Central-difference gradient ``(f(p + h e_q) - f(p - h e_q)) / 2h``."""
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.array(p, dtype=dtype).reshape(-1)
    hh = dtype(h)
    out = np.zeros(x.size)
    for q in range(x.size):
        xp = x.copy()
        xp[q] += hh
        xm = x.copy()
        xm[q] -= hh
        fp, fm = scalar_field(xp), scalar_field(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise OracleError(f"non-finite evaluation at coordinate {q}")
        out[q] = float((fp - fm) / (2 * hh))
    return out


def _unit(v):
    return v / np.sqrt(np.sum(v * v))


def _det2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _det3(a, b, c):
    return (a[0] * (b[1] * c[2] - b[2] * c[1])
            - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]))


def entry_fields(graph, dim: int, kind: RigidityKind, gain_k: float = 1.0) -> list[ScalarField]:
    """One scalar field per row of ``kind``'s rigidity function, in row order."""
    kind = check_kind(kind, dim)
    fields: list[ScalarField] = []

    def pts(x):
        return x.reshape(graph.n, dim)

    for fam in kind.families:
        if fam == "edge":
            w = 2.0 if kind is RigidityKind.WEAK_DISTANCE_ANGLE else 1.0
            for i, j in graph.edges:
                fields.append(lambda x, i=i, j=j, w=w: w * 0.5 * np.sum((pts(x)[i] - pts(x)[j]) ** 2))
        elif fam == "angle":
            for i, j, k in graph.angles:
                def f(x, i=i, j=j, k=k):
                    P = pts(x)
                    return np.sum(_unit(P[j] - P[i]) * _unit(P[k] - P[i]))
                fields.append(f)
        elif fam == "signed_angle":
            for i, j, k in graph.signed_angles:
                def f(x, i=i, j=j, k=k):
                    P = pts(x)
                    return gain_k * _det2(_unit(P[j] - P[i]), _unit(P[k] - P[i]))
                fields.append(f)
        else:
            for i, j, k, l in graph.signed_volumes:
                def f(x, i=i, j=j, k=k, l=l):
                    P = pts(x)
                    return gain_k * _det3(_unit(P[j] - P[i]), _unit(P[k] - P[i]), _unit(P[l] - P[i]))
                fields.append(f)
    return fields


def compare(analytic: np.ndarray, reference: np.ndarray, h: float) -> JacobianCheckResult:
    """Max abs / rel error; entries with |reference| < 1e-8 count absolutely."""
    analytic = np.atleast_2d(analytic)
    reference = np.atleast_2d(reference)
    if analytic.shape != reference.shape:
        raise ValueError(f"shape mismatch {analytic.shape} vs {reference.shape}")
    if analytic.size == 0:
        return JacobianCheckResult(0.0, 0.0, (0, 0), h)
    abs_err = np.abs(analytic - reference)
    mag = np.abs(reference)
    rel_err = np.where(mag < ABS_SWITCH, abs_err, abs_err / np.where(mag < ABS_SWITCH, 1.0, mag))
    worst = np.unravel_index(int(np.argmax(rel_err)), rel_err.shape)
    return JacobianCheckResult(float(abs_err.max()), float(rel_err.max()),
                               (int(worst[0]), int(worst[1])), h)


def check_jacobian(fw: Framework, kind: RigidityKind, h: float = 1e-6,
                   gain_k: float = 1.0) -> JacobianCheckResult:
    """Analytic rigidity matrix of ``kind`` versus finite differences at ``fw``."""
    kind = check_kind(kind, fw.dim)
    R = rigidity_rows(fw.graph, fw.positions, kind, gain_k)
    fields = entry_fields(fw.graph, fw.dim, kind, gain_k)
    if not fields:
        return compare(R, R, h)
    fd = np.vstack([finite_difference_jacobian(f, fw.p, h) for f in fields])
    return compare(R, fd, h)


def brute_force_nullspace(matrix, tol: float | None = None) -> np.ndarray:
    """Right singular vectors whose singular value is at most ``tol``.

    With ``tol=None`` the rank threshold of :func:`rigidity.numerical_rank`
    is used, so the basis size is ``columns - numerical_rank``.
    """
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    q = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(q)
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    full = np.zeros(q)
    full[: s.size] = s
    if tol is None:
        keep = full <= rank_threshold(s, A.shape)
    else:
        keep = full <= tol
    return Vt[keep].T


# -- random non-degenerate frameworks ----------------------------------------------

def _random_positions(rng, n, dim, min_sep=0.25):
    while True:
        P = rng.uniform(-1.0, 1.0, size=(n, dim))
        diff = P[:, None, :] - P[None, :, :]
        dist = np.sqrt(np.sum(diff ** 2, axis=-1)) + np.eye(n) * 10
        if dist.min() >= min_sep:
            return P


def _sample_tuples(rng, n, size, count, accept):
    out, seen, tries = [], set(), 0
    while len(out) < count and tries < 2000:
        tries += 1
        t = tuple(int(a) for a in rng.choice(n, size=size, replace=False))
        if t in seen or not accept(t):
            continue
        seen.add(t)
        out.append(t)
    return out


def _random_constraints(kind, rng, n, dim):
    P = _random_positions(rng, n, dim)

    def unit(v):
        return v / np.linalg.norm(v)

    def well_angled(t):
        i, j, k = t
        return abs(np.dot(unit(P[j] - P[i]), unit(P[k] - P[i]))) <= 0.95

    def well_signed(t):
        i, j, k = t
        return abs(_det2(unit(P[j] - P[i]), unit(P[k] - P[i]))) >= 0.1

    def well_volumed(t):
        i, j, k, l = t
        return abs(_det3(unit(P[j] - P[i]), unit(P[k] - P[i]), unit(P[l] - P[i]))) >= 0.1

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    fams = kind.families
    edges, angles, signed, volumes = [], [], [], []
    if "edge" in fams:
        count = int(rng.integers(1, len(pairs) + 1))
        edges = [pairs[c] for c in rng.choice(len(pairs), size=count, replace=False)]
    if "angle" in fams:
        angles = _sample_tuples(rng, n, 3, int(rng.integers(1, 2 * n)), well_angled)
    if "signed_angle" in fams:
        signed = _sample_tuples(rng, n, 3, int(rng.integers(1, n + 1)), well_signed)
    if "signed_volume" in fams:
        volumes = _sample_tuples(rng, n, 4, int(rng.integers(1, n + 1)), well_volumed)
    return P, edges, angles, signed, volumes


def random_framework(kind: RigidityKind, rng: np.random.Generator, n: int | None = None) -> Framework:
    """A random framework carrying ``kind``'s constraint families, away from degeneracy."""
    kind = RigidityKind(kind)
    dim = kind.dim or int(rng.choice([2, 3]))
    if n is None:
        n = int(rng.integers(dim + 1, 8))
    while True:
        P, edges, angles, signed, volumes = _random_constraints(kind, rng, n, dim)
        counts = {"edge": edges, "angle": angles, "signed_angle": signed, "signed_volume": volumes}
        if all(counts[f] for f in kind.families):
            break
    g = make_graph(n, edges, angles, signed, volumes)
    fw = Framework(g, dim, P)
    validate_framework(fw)
    return fw


def jacobian_sweep(kinds: Sequence[RigidityKind] = tuple(RigidityKind), cases: int = 100,
                   seed: int = 0, h: float = 1e-6) -> dict[str, JacobianCheckResult]:
    """Worst-case :class:`JacobianCheckResult` per kind over ``cases`` random frameworks."""
    rng = np.random.default_rng(seed)
    results = {}
    for kind in kinds:
        kind = RigidityKind(kind)
        worst = None
        for _ in range(cases):
            res = check_jacobian(random_framework(kind, rng), kind, h)
            if worst is None or res.max_rel_error > worst.max_rel_error:
                worst = res
        results[kind.value] = worst
    return results
