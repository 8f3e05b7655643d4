"""Signed Henneberg construction: forward extension and reverse-peeling validation.

A step attaches a new vertex to ``dim`` existing anchors with ``dim`` links of
one family (distances, or unsigned angles) plus exactly one signed
constraint on the new vertex and its anchors.  Bases are a triangle (2D) or
tetrahedron (3D) carrying one signed constraint.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .framework import Framework, FrameworkError, Graph, make_graph, normalize_edge, validate_framework
from .rigidity import DEGENERATE_TOL, signed_angle_values, signed_volume_values

FAMILIES = ("distance", "angle")


class HennebergError(FrameworkError):
    pass


@dataclass(frozen=True)
class HennebergStep:
    """Attach ``new_vertex`` to ``anchors`` (0-based indices)."""

    new_vertex: int
    anchors: tuple[int, ...]
    family: str = "distance"
    signed_constraint: tuple[int, ...] | None = None

    def signed(self) -> tuple[int, ...]:
        if self.signed_constraint is not None:
            return tuple(self.signed_constraint)
        return (self.new_vertex, *self.anchors)


def step_links(step: HennebergStep, dim: int) -> tuple[list, list]:
    """The ``(edges, angles)`` a step adds."""
    v, A = step.new_vertex, step.anchors
    if step.family == "distance":
        return [normalize_edge(v, a) for a in A], []
    a, b = A[0], A[1]
    angles = [(a, b, v), (b, a, v)]
    if dim == 3:
        angles.append((a, A[2], v))
    return [], angles


def _check_step(fw: Framework, step: HennebergStep) -> None:
    d = fw.dim
    if step.family not in FAMILIES:
        raise HennebergError(f"unknown step family {step.family!r}")
    if step.new_vertex != fw.n:
        raise HennebergError(f"new vertex must be {fw.n + 1}, got {step.new_vertex + 1}")
    if len(step.anchors) != d or len(set(step.anchors)) != d:
        raise HennebergError(f"a {d}D step needs {d} distinct anchors")
    for a in step.anchors:
        if not 0 <= a < fw.n:
            raise HennebergError(f"anchor {a + 1} is not a vertex of the base framework")
    signed = step.signed()
    if len(signed) != d + 1 or set(signed) != {step.new_vertex, *step.anchors}:
        raise HennebergError("the signed constraint must use exactly the new vertex and its anchors")


def henneberg_extend(fw: Framework, step: HennebergStep, placement) -> Framework:
    """Add ``step.new_vertex`` at ``placement`` with its links and signed constraint."""
    _check_step(fw, step)
    placement = np.asarray(placement, dtype=float).reshape(fw.dim)
    P = np.vstack([fw.positions, placement])
    g = fw.graph
    edges, angles = step_links(step, fw.dim)
    signed = step.signed()
    new = make_graph(
        g.n + 1,
        edges=list(g.edges) + edges,
        angles=list(g.angles) + angles,
        signed_angles=list(g.signed_angles) + ([signed] if fw.dim == 2 else []),
        signed_volumes=list(g.signed_volumes) + ([signed] if fw.dim == 3 else []),
    )
    probe = make_graph(g.n + 1, signed_angles=[signed]) if fw.dim == 2 \
        else make_graph(g.n + 1, signed_volumes=[signed])
    out = Framework(new, fw.dim, P)
    validate_framework(out)
    val = (signed_angle_values if fw.dim == 2 else signed_volume_values)(probe, P)[0]
    if abs(val) <= DEGENERATE_TOL:
        raise HennebergError("degenerate placement: zero signed area/volume with the anchors")
    return out


# -- validation --------------------------------------------------------------------

@dataclass
class HennebergCertificate:
    is_henneberg: bool
    peel_order: list[int] = field(default_factory=list)
    step_families: list[str] = field(default_factory=list)
    base: list[int] = field(default_factory=list)
    base_family: str | None = None
    mixed: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def global_uniqueness(self) -> str:
        return "certified" if self.is_henneberg else "unknown"

    def to_dict(self) -> dict:
        return {
            "is_henneberg": self.is_henneberg,
            "peel_order": [v + 1 for v in self.peel_order],
            "step_families": list(self.step_families),
            "base": [v + 1 for v in self.base],
            "base_family": self.base_family,
            "mixed": self.mixed,
            "global_uniqueness": self.global_uniqueness,
            "notes": list(self.notes),
        }


def _constraints(g: Graph, dim: int) -> list[tuple[str, tuple[int, ...]]]:
    out = [("distance", e) for e in g.edges] + [("angle", t) for t in g.angles]
    signed = g.signed_angles if dim == 2 else g.signed_volumes
    return out + [("signed", s) for s in signed]


def _peel_family(v: int, alive: frozenset, cons, dim: int) -> str | None:
    """Family of the step that added ``v`` last, or None if ``v`` is not peelable."""
    touching = [(f, idx) for f, idx in cons if v in idx and set(idx) <= alive]
    signed = [idx for f, idx in touching if f == "signed"]
    links = [(f, idx) for f, idx in touching if f != "signed"]
    if len(signed) != 1 or len(links) != dim:
        return None
    fams = {f for f, _ in links}
    if len(fams) != 1:
        return None
    anchors = set(signed[0]) - {v}
    if len(anchors) != dim:
        return None
    family = fams.pop()
    if family == "distance":
        reached = {a for _, e in links for a in e} - {v}
        if reached != anchors:
            return None
    else:
        covered = set()
        for _, t in links:
            if not set(t) <= anchors | {v}:
                return None
            covered |= set(t)
        if covered != anchors | {v}:
            return None
    return family


def _base_family(alive: frozenset, cons, dim: int) -> str | None:
    if len(alive) != dim + 1:
        return None
    live = [(f, idx) for f, idx in cons if set(idx) <= alive]
    signed = [idx for f, idx in live if f == "signed"]
    dist = [idx for f, idx in live if f == "distance"]
    ang = [idx for f, idx in live if f == "angle"]
    if len(signed) != 1:
        return None
    full = (dim + 1) * dim // 2
    if len(dist) == full and not ang:
        return "distance"
    angle_count = 2 if dim == 2 else 5
    if len(ang) == angle_count and not dist:
        return "angle"
    return None


def _live(alive, cons):
    return [(f, idx) for f, idx in cons if set(idx) <= alive]


def validate_signed_henneberg(fw: Framework) -> HennebergCertificate:
    """Greedy reverse peeling; on success the framework is a signed Henneberg construction.

    At each round the highest-index peelable vertex is removed.  A constraint
    is consumed by the first of its vertices to be peeled, so a successful
    peel accounts for every constraint exactly once.
    """
    d = fw.dim
    cons = _constraints(fw.graph, d)
    alive = frozenset(range(fw.n))
    order, fams = [], []
    while len(alive) > d + 1:
        live = _live(alive, cons)
        pick = None
        for v in sorted(alive, reverse=True):
            fam = _peel_family(v, alive, live, d)
            if fam is not None:
                pick = (v, fam)
                break
        if pick is None:
            return HennebergCertificate(False, order, fams,
                                        notes=[f"no peelable vertex among {sorted(x + 1 for x in alive)}"])
        order.append(pick[0])
        fams.append(pick[1])
        alive = alive - {pick[0]}
    base = _base_family(alive, _live(alive, cons), d)
    if base is None:
        return HennebergCertificate(False, order, fams, sorted(alive),
                                    notes=["remaining vertices do not form a signed base"])
    mixed = len(set(fams) | {base}) > 1
    notes = ["mixed distance/angle construction"] if mixed else []
    return HennebergCertificate(True, order, fams, sorted(alive), base, mixed, notes)


def exhaustive_peel(fw: Framework) -> bool:
    """True if ANY peel order reaches a signed base (exponential; meant for small n)."""
    d = fw.dim
    cons = _constraints(fw.graph, d)
    memo: dict[frozenset, bool] = {}

    def search(alive: frozenset) -> bool:
        if alive in memo:
            return memo[alive]
        live = _live(alive, cons)
        if len(alive) == d + 1:
            ok = _base_family(alive, live, d) is not None
        else:
            ok = any(_peel_family(v, alive, live, d) is not None and search(alive - {v})
                     for v in alive)
        memo[alive] = ok
        return ok

    if fw.n < d + 1:
        return False
    return search(frozenset(range(fw.n)))


# -- generators -----------------------------------------------------------------------

def henneberg_base(dim: int, family: str, positions) -> Framework:
    """Triangle (2D) or tetrahedron (3D) with its signed constraint."""
    P = np.asarray(positions, dtype=float)
    if family == "distance":
        pairs = list(combinations(range(dim + 1), 2))
        angles = []
    elif dim == 2:
        pairs = []
        angles = [(0, 1, 2), (2, 0, 1)]
    else:
        pairs = []
        angles = [(0, 1, 2), (2, 0, 1), (1, 3, 0), (3, 0, 1), (3, 1, 2)]
    if dim == 2:
        g = make_graph(3, pairs, angles, signed_angles=[(1, 0, 2)])
    else:
        g = make_graph(4, pairs, angles, signed_volumes=[(3, 0, 1, 2)])
    fw = Framework(g, dim, P)
    validate_framework(fw)
    return fw


def _signed_of(P, idx, dim):
    g = make_graph(len(P), signed_angles=[idx]) if dim == 2 else make_graph(len(P), signed_volumes=[idx])
    return (signed_angle_values if dim == 2 else signed_volume_values)(g, P)[0]


def _well_placed(P, idx, dim, min_sep, min_signed, max_signed=1.0):
    diff = P[:, None, :] - P[None, :, :]
    dist = np.sqrt(np.sum(diff ** 2, axis=-1)) + np.eye(len(P)) * 1e9
    s = abs(_signed_of(P, idx, dim))
    return dist.min() >= min_sep and min_signed <= s <= max_signed


def random_signed_henneberg(n: int, dim: int, rng: np.random.Generator, family: str = "distance",
                            min_sep: float = 0.3, min_signed: float = 0.2, max_signed: float = 1.0,
                            scale: float = 1.0) -> Framework:
    """Grow a random signed Henneberg framework with ``n`` vertices.

    Positions are drawn around the unit box and then multiplied by ``scale``.
    ``min_signed``/``max_signed`` bound the magnitude of every signed value;
    values near 1 (right angles, orthogonal triads) make the signed rows lose
    rank, so simulations usually cap them.
    """
    if n < dim + 1:
        raise HennebergError(f"need at least {dim + 1} vertices in {dim}D")
    while True:
        P = rng.uniform(-1, 1, size=(dim + 1, dim))
        idx = (1, 0, 2) if dim == 2 else (3, 0, 1, 2)
        if _well_placed(P, idx, dim, min_sep, min_signed, max_signed):
            break
    fw = henneberg_base(dim, family, P)
    while fw.n < n:
        anchors = tuple(int(a) for a in rng.choice(fw.n, size=dim, replace=False))
        step = HennebergStep(fw.n, anchors, family)
        center = fw.positions[list(anchors)].mean(axis=0)
        for _ in range(1000):
            x = center + rng.uniform(-1.5, 1.5, size=dim)
            trial = np.vstack([fw.positions, x])
            if _well_placed(trial, step.signed(), dim, min_sep, min_signed, max_signed):
                break
        else:
            continue
        fw = henneberg_extend(fw, step, x)
    return fw if scale == 1.0 else fw.with_positions(scale * fw.positions)
