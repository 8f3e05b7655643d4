"""Gradient-flow formation control ``p' = -R^T(p) e(p)`` and ambiguity diagnostics."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .framework import Framework, FrameworkError, Graph
from .rigidity import (
    RigidityKind,
    check_kind,
    family_values,
    rigidity_rows,
    rigidity_values,
)


class SimulationError(FrameworkError):
    pass


class Controller(str, enum.Enum):
    DISTANCE_ONLY_BASELINE = "DistanceOnlyBaseline"
    WEAK_BASELINE = "WeakBaseline"
    DISTANCE_SIGNED = "DistanceSigned"
    ANGLE_SIGNED = "AngleSigned"

    def kind(self, dim: int) -> RigidityKind:
        if self is Controller.DISTANCE_ONLY_BASELINE:
            return RigidityKind.DISTANCE_ONLY
        if self is Controller.WEAK_BASELINE:
            return RigidityKind.WEAK_DISTANCE_ANGLE
        if self is Controller.DISTANCE_SIGNED:
            return RigidityKind.DISTANCE_SIGN_2D if dim == 2 else RigidityKind.DISTANCE_VOLUME_3D
        return RigidityKind.ANGLE_SIGN_2D if dim == 2 else RigidityKind.ANGLE_VOLUME_3D


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    HORIZON_REACHED = "HorizonReached"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class ConstraintTargets:
    """Desired constraint values; signed entries are raw sines / normalized volumes."""

    distance_sq_half: tuple[float, ...] = ()
    cosines: tuple[float, ...] = ()
    signed_sines: tuple[float, ...] = ()
    signed_volumes: tuple[float, ...] = ()
    gain_k: float = 1.0

    def __post_init__(self):
        for name in ("distance_sq_half", "cosines", "signed_sines", "signed_volumes"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if not self.gain_k > 0:
            raise SimulationError("gain_k must be positive")
        for name in ("cosines", "signed_sines", "signed_volumes"):
            vals = getattr(self, name)
            if any(abs(v) > 1.0 + 1e-12 for v in vals):
                raise SimulationError(f"{name} must lie in [-1, 1]")
        if any(v <= 0 for v in self.distance_sq_half):
            raise SimulationError("desired distances must be positive")

    def check_lengths(self, graph: Graph) -> None:
        pairs = [("distance_sq_half", graph.m_d), ("cosines", graph.m_a),
                 ("signed_sines", graph.m_s), ("signed_volumes", graph.m_v)]
        for name, m in pairs:
            if len(getattr(self, name)) != m:
                raise SimulationError(f"{name} has {len(getattr(self, name))} values, graph has {m} constraints")

    def to_dict(self) -> dict:
        return {
            "distance_sq_half": list(self.distance_sq_half),
            "cosines": list(self.cosines),
            "signed_sines": list(self.signed_sines),
            "signed_volumes": list(self.signed_volumes),
            "gain_k": self.gain_k,
        }


def measure_targets(fw: Framework, gain_k: float = 1.0) -> ConstraintTargets:
    """Read desired values off a realization (e.g. a reference formation)."""
    g, P = fw.graph, fw.positions
    return ConstraintTargets(
        distance_sq_half=family_values("edge", g, P),
        cosines=family_values("angle", g, P),
        signed_sines=family_values("signed_angle", g, P),
        signed_volumes=family_values("signed_volume", g, P),
        gain_k=gain_k,
    )


_TARGET_FIELD = {"edge": "distance_sq_half", "angle": "cosines",
                 "signed_angle": "signed_sines", "signed_volume": "signed_volumes"}


def target_vector(targets: ConstraintTargets, kind: RigidityKind) -> np.ndarray:
    """Desired values stacked like :func:`rigidity.rigidity_values` for ``kind``."""
    parts = []
    for fam in kind.families:
        vals = np.asarray(getattr(targets, _TARGET_FIELD[fam]), dtype=float)
        if fam in ("signed_angle", "signed_volume"):
            vals = targets.gain_k * vals
        elif fam == "edge" and kind is RigidityKind.WEAK_DISTANCE_ANGLE:
            vals = 2.0 * vals
        parts.append(vals)
    return np.concatenate(parts) if parts else np.zeros(0)


def check_controller(graph: Graph, dim: int, controller: Controller) -> RigidityKind:
    """The kind ``controller`` drives, after checking the graph carries its constraint families."""
    controller = Controller(controller)
    kind = check_kind(controller.kind(dim), dim)
    signed = graph.m_s if dim == 2 else graph.m_v
    if kind.is_signed and signed == 0:
        raise SimulationError(f"{controller.value} needs at least one signed constraint")
    if "angle" in kind.families and "edge" not in kind.families and graph.m_a == 0:
        raise SimulationError(f"{controller.value} needs angle constraints")
    if "edge" in kind.families and "angle" not in kind.families and graph.m_d == 0:
        raise SimulationError(f"{controller.value} needs distance constraints")
    if graph.m_d + graph.m_a == 0:
        raise SimulationError(f"{controller.value} needs distance or angle constraints")
    return kind


def _setup(fw: Framework, targets: ConstraintTargets, controller: Controller):
    kind = check_controller(fw.graph, fw.dim, controller)
    targets.check_lengths(fw.graph)
    return kind, target_vector(targets, kind)


def formation_error(fw: Framework, targets: ConstraintTargets, controller: Controller) -> np.ndarray:
    """``e(p)``: current minus desired, in rigidity-matrix row order."""
    kind, star = _setup(fw, targets, controller)
    return rigidity_values(fw.graph, fw.positions, kind, targets.gain_k) - star


def potential(fw: Framework, targets: ConstraintTargets, controller: Controller) -> float:
    e = formation_error(fw, targets, controller)
    return 0.5 * float(e @ e)


def control_velocity(fw: Framework, targets: ConstraintTargets, controller: Controller) -> np.ndarray:
    """``u = -R^T e`` with the gain-scaled rigidity matrix of the controller."""
    kind, star = _setup(fw, targets, controller)
    g, P = fw.graph, fw.positions
    e = rigidity_values(g, P, kind, targets.gain_k) - star
    return -rigidity_rows(g, P, kind, targets.gain_k).T @ e


# -- integration --------------------------------------------------------------

@dataclass(frozen=True)
class Integrator:
    step: float = 1e-3
    horizon: float = 30.0
    method: str = "rk4"

    def __post_init__(self):
        if not self.step > 0:
            raise SimulationError("integrator step must be positive")
        if self.horizon < self.step:
            raise SimulationError("horizon must be at least one step")
        if self.method != "rk4":
            raise SimulationError(f"unsupported integrator {self.method!r}")


@dataclass(frozen=True)
class SimulationConfig:
    framework: Framework
    targets: ConstraintTargets
    controller: Controller
    integrator: Integrator = Integrator()
    stop_tolerance: float = 1e-8
    divergence_factor: float = 1e6

    def __post_init__(self):
        object.__setattr__(self, "controller", Controller(self.controller))
        if not self.stop_tolerance > 0:
            raise SimulationError("stop_tolerance must be positive")
        _setup(self.framework, self.targets, self.controller)


@dataclass
class Trajectory:
    """Samples ``(t, p(t), e(p(t)), |e|)`` on the integrator grid."""

    times: np.ndarray
    positions: np.ndarray  # (T, n, d)
    errors: np.ndarray  # (T, m)
    error_norms: np.ndarray
    status: Status
    framework: Framework = field(repr=False)
    controller: Controller = Controller.DISTANCE_SIGNED

    @property
    def samples(self):
        return zip(self.times, self.positions, self.errors, self.error_norms)

    @property
    def final_framework(self) -> Framework:
        return self.framework.with_positions(self.positions[-1], validate=False)

    @property
    def potentials(self) -> np.ndarray:
        return 0.5 * self.error_norms ** 2

    def __len__(self):
        return len(self.times)


def static_trajectory(fw: Framework, targets: ConstraintTargets, controller: Controller) -> Trajectory:
    """A one-sample trajectory holding ``fw`` as its terminal state."""
    controller = Controller(controller)
    e = formation_error(fw, targets, controller)
    nrm = float(np.linalg.norm(e))
    return Trajectory(np.zeros(1), fw.positions[None].copy(), e[None], np.array([nrm]),
                      Status.HORIZON_REACHED, fw, controller)


def simulate(config: SimulationConfig) -> Trajectory:
    """Fixed-step RK4 on the gradient flow, stopping on convergence or divergence."""
    fw = config.framework
    g, n, d = fw.graph, fw.n, fw.dim
    kind, star = _setup(fw, config.targets, config.controller)
    k = config.targets.gain_k

    def field(x):
        P = x.reshape(n, d)
        e = rigidity_values(g, P, kind, k) - star
        return e, -(rigidity_rows(g, P, kind, k).T @ e)

    def velocity(x):
        return field(x)[1]

    h = config.integrator.step
    steps = int(round(config.integrator.horizon / h))
    x = fw.p.astype(float).copy()
    e, u = field(x)
    times, xs, es, norms = [0.0], [x.copy()], [e], [float(np.linalg.norm(e))]
    limit = config.divergence_factor * max(norms[0], config.stop_tolerance)
    status = Status.HORIZON_REACHED
    if norms[0] <= config.stop_tolerance:
        status = Status.CONVERGED
    else:
        with np.errstate(all="ignore"):
            for step in range(1, steps + 1):
                # classical RK4; the first stage doubles as the error of the current state
                k2 = velocity(x + 0.5 * h * u)
                k3 = velocity(x + 0.5 * h * k2)
                k4 = velocity(x + h * k3)
                x = x + (h / 6.0) * (u + 2 * k2 + 2 * k3 + k4)
                if not np.all(np.isfinite(x)):
                    status = Status.DIVERGED
                    break
                e, u = field(x)
                nrm = float(np.linalg.norm(e))
                if not np.isfinite(nrm):
                    status = Status.DIVERGED
                    break
                times.append(step * h)
                xs.append(x.copy())
                es.append(e)
                norms.append(nrm)
                if nrm <= config.stop_tolerance:
                    status = Status.CONVERGED
                    break
                if nrm > limit:
                    status = Status.DIVERGED
                    break
    return Trajectory(
        times=np.asarray(times),
        positions=np.asarray(xs).reshape(len(xs), n, d),
        errors=np.asarray(es),
        error_norms=np.asarray(norms),
        status=status,
        framework=fw,
        controller=Controller(config.controller),
    )


def energy_increase(traj: Trajectory) -> float:
    """Largest step-to-step increase of ``phi = |e|^2 / 2`` (<= 0 for a monotone run)."""
    phi = traj.potentials
    if phi.size < 2:
        return 0.0
    return float(np.max(np.diff(phi)))


def centroid_drift(traj: Trajectory) -> float:
    c = traj.positions.mean(axis=1)
    return float(np.abs(c - c[0]).max())


def tail_decay_slope(traj: Trajectory) -> float:
    """Least-squares slope of ``log|e|`` against ``t`` over the last half of the samples."""
    t, en = traj.times, traj.error_norms
    half = len(t) // 2
    t, en = t[half:], en[half:]
    mask = en > 0
    if mask.sum() < 2:
        return float("-inf") if len(en) and en[-1] == 0 else float("nan")
    return float(np.polyfit(t[mask], np.log(en[mask]), 1)[0])


def perturb(positions, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Displace every agent uniformly inside a ball of radius ``fraction * diameter``."""
    P = np.asarray(positions, dtype=float)
    n, d = P.shape
    diam = max(np.linalg.norm(a - b) for a, b in combinations(P, 2)) if n > 1 else 1.0
    dirs = rng.normal(size=(n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = fraction * diam * rng.uniform(0, 1, size=(n, 1)) ** (1.0 / d)
    return P + dirs * radii


# -- ambiguity diagnostics -------------------------------------------------------------

def pairwise_distances(P: np.ndarray) -> np.ndarray:
    diff = P[:, None, :] - P[None, :, :]
    return np.sqrt(np.sum(diff ** 2, axis=-1))


def _orientations(P: np.ndarray) -> tuple[list, np.ndarray]:
    n, d = P.shape
    simplices = list(combinations(range(n), d + 1))
    if not simplices:
        return [], np.zeros(0)
    idx = np.array(simplices)
    base = P[idx[:, 1:]] - P[idx[:, :1]]
    return simplices, np.linalg.det(base)


def orientation_mismatches(P: np.ndarray, Q: np.ndarray, rel_tol: float = 1e-6) -> list[tuple[int, ...]]:
    """Simplices (triangles / tetrahedra) whose orientation differs between P and Q.

    Simplices that are degenerate in the reference ``Q`` are skipped.
    """
    simplices, oq = _orientations(Q)
    _, op = _orientations(P)
    if not simplices:
        return []
    scale = np.max(np.abs(oq))
    keep = np.abs(oq) > rel_tol * scale
    bad = keep & (np.sign(op) != np.sign(oq))
    return [simplices[i] for i in np.flatnonzero(bad)]


def congruent(P: np.ndarray, Q: np.ndarray, rel_tol: float = 1e-6, similar: bool = False) -> bool:
    """Same shape up to proper rigid motion (and scale when ``similar``).

    Compares the full pairwise distance matrices, then rules out mirror
    images by checking every simplex orientation.
    """
    DP, DQ = pairwise_distances(P), pairwise_distances(Q)
    if similar:
        DP = DP / DP.max()
        DQ = DQ / DQ.max()
    ok = np.max(np.abs(DP - DQ)) <= rel_tol * DQ.max()
    return bool(ok and not orientation_mismatches(P, Q, rel_tol))


@dataclass
class AmbiguityReport:
    residuals: list[float]
    residual_labels: list[str]
    residuals_met: bool
    signed_values: list[float]
    sign_agreement: list[bool]
    congruent_to_reference: bool | None
    orientation_mismatches: int | None
    flip: bool
    flex: bool

    def to_dict(self) -> dict:
        return {
            "residuals": dict(zip(self.residual_labels, self.residuals)),
            "residuals_met": self.residuals_met,
            "signed_values": self.signed_values,
            "sign_agreement": self.sign_agreement,
            "congruent_to_reference": self.congruent_to_reference,
            "orientation_mismatches": self.orientation_mismatches,
            "flip": self.flip,
            "flex": self.flex,
        }


def ambiguity_metrics(traj: Trajectory, targets: ConstraintTargets, reference=None,
                      tol: float = 1e-6) -> AmbiguityReport:
    """Diagnose the final formation of ``traj`` against its targets and a reference.

    A flip is flagged when every unsigned constraint is met but a signed
    quantity has the wrong sign, either a signed target of the graph or a
    simplex orientation of the reference realization.  A flex is flagged when
    the constraints are met, nothing is mirrored, yet the final shape is not
    congruent (similar, for angle controllers) to the reference.
    """
    from .rigidity import row_labels

    P = traj.positions[-1]
    if not np.all(np.isfinite(P)):
        raise SimulationError("trajectory terminal state is not finite")
    fw = traj.framework
    g, dim = fw.graph, fw.dim
    kind = traj.controller.kind(dim)
    e = formation_error(fw.with_positions(P, validate=False), targets, traj.controller)
    labels = list(row_labels(g, kind))
    signed_fam = "signed_angle" if dim == 2 else "signed_volume"
    m_signed = g.m_s if dim == 2 else g.m_v
    unsigned = e[: len(e) - m_signed] if signed_fam in kind.families else e
    residuals_met = bool(np.all(np.abs(unsigned) <= tol))

    signed_vals = family_values(signed_fam, g, P)
    desired = np.asarray(targets.signed_sines if dim == 2 else targets.signed_volumes)
    agreement = [bool(np.sign(a) == np.sign(b)) for a, b in zip(signed_vals, desired)]

    cong, mism = None, None
    if reference is not None:
        Q = np.asarray(reference, dtype=float).reshape(P.shape)
        mism = len(orientation_mismatches(P, Q, tol))
        cong = congruent(P, Q, tol, similar=kind.scales or (
            kind is RigidityKind.WEAK_DISTANCE_ANGLE and not g.edges))
    mirrored = (not all(agreement)) or bool(mism)
    flip = residuals_met and mirrored
    flex = residuals_met and cong is False and not flip
    return AmbiguityReport(
        residuals=[float(x) for x in e],
        residual_labels=labels,
        residuals_met=residuals_met,
        signed_values=[float(x) for x in signed_vals],
        sign_agreement=agreement,
        congruent_to_reference=cong,
        orientation_mismatches=mism,
        flip=flip,
        flex=flex,
    )
