"""Scenario files: strict JSON in, validated frameworks / simulation configs out.

Indices in scenario files are 1-based.  Desired distances are given as
squared lengths ``|z*|^2``; signed targets as raw sines / normalized volumes
or, for signed angles, in degrees.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

from .framework import Framework, FrameworkError, build_framework, normalize_edge
from .henneberg import HennebergStep, henneberg_base, henneberg_extend
from .rigidity import RigidityKind, check_kind, default_kind
from .simulation import (
    ConstraintTargets,
    Controller,
    Integrator,
    SimulationConfig,
    measure_targets,
    perturb,
)

SCHEMA_VERSION = "1"


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario; ``where`` locates the problem."""

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files("signed_rigidity").joinpath("data/scenario.schema.json").read_text("utf-8")
    return json.loads(text)


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _no_duplicate_keys(pairs):
    obj = {}
    for k, v in pairs:
        if k in obj:
            raise ScenarioError(f"duplicate key {k!r}")
        obj[k] = v
    return obj


def _decode(text: str) -> dict:
    try:
        return json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None


def validate_document(doc) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ScenarioError(err.message, _path(err.absolute_path))


@dataclass
class ScenarioFile:
    name: str
    framework: Framework  # initial state (after any seeded perturbation)
    reference: np.ndarray | None
    targets: ConstraintTargets | None
    controller: Controller | None
    integrator: Integrator
    stop_tolerance: float
    kinds: tuple[RigidityKind, ...]
    henneberg_steps: list[HennebergStep] | None
    seed: int
    outputs: dict
    document: dict = field(repr=False)
    version: str = SCHEMA_VERSION

    @property
    def is_simulation(self) -> bool:
        return self.controller is not None

    def simulation_config(self) -> SimulationConfig:
        if self.controller is None:
            raise ScenarioError("scenario has no controller", "$.controller")
        try:
            return SimulationConfig(self.framework, self.targets, self.controller,
                                    self.integrator, self.stop_tolerance)
        except FrameworkError as exc:
            raise ScenarioError(str(exc), "$.targets") from None


def _check_undirected(doc) -> None:
    edges = doc.get("framework", {}).get("edges", [])
    seen = {}
    for k, (i, j) in enumerate(edges):
        key = normalize_edge(i, j)
        if key in seen:
            raise ScenarioError(f"edge {[i, j]} duplicates edge {edges[seen[key]]} (edges are undirected)",
                                _path(["framework", "edges", k]))
        seen[key] = k


def _build_henneberg(script) -> tuple[Framework, list[HennebergStep]]:
    dim, family = script["dim"], script["family"]
    try:
        fw = henneberg_base(dim, family, script["base_positions"])
    except (FrameworkError, ValueError) as exc:
        raise ScenarioError(str(exc), "$.henneberg.base_positions") from None
    steps = []
    for k, raw in enumerate(script["steps"]):
        where = _path(["henneberg", "steps", k])
        signed = raw.get("signed")
        step = HennebergStep(fw.n, tuple(a - 1 for a in raw["anchors"]), raw.get("family", family),
                             None if signed is None else tuple(a - 1 for a in signed))
        try:
            fw = henneberg_extend(fw, step, raw["position"])
        except (FrameworkError, ValueError) as exc:
            raise ScenarioError(str(exc), where) from None
        steps.append(step)
    return fw, steps


def _targets(section: dict, fw: Framework, source: np.ndarray) -> ConstraintTargets:
    measured = measure_targets(fw.with_positions(source, validate=False), section.get("gain_k", 1.0))
    g = fw.graph

    def pick(key, expected, default):
        if key not in section:
            return default
        vals = section[key]
        if len(vals) != expected:
            raise ScenarioError(f"{len(vals)} values for {expected} constraints", _path(["targets", key]))
        return vals

    dist = pick("distance_sq", g.m_d, None)
    sines = pick("signed_angles", g.m_s, None)
    if "signed_angles_deg" in section:
        sines = [math.sin(math.radians(a)) for a in pick("signed_angles_deg", g.m_s, None)]
    try:
        return ConstraintTargets(
            distance_sq_half=measured.distance_sq_half if dist is None else [0.5 * v for v in dist],
            cosines=pick("cosines", g.m_a, measured.cosines),
            signed_sines=measured.signed_sines if sines is None else sines,
            signed_volumes=pick("signed_volumes", g.m_v, measured.signed_volumes),
            gain_k=section.get("gain_k", 1.0),
        )
    except FrameworkError as exc:
        raise ScenarioError(str(exc), "$.targets") from None


def scenario_from_document(doc: dict) -> ScenarioFile:
    validate_document(doc)
    if "framework" in doc and "henneberg" in doc:
        raise ScenarioError("give either a framework or a henneberg script, not both", "$")
    _check_undirected(doc)
    steps = None
    if "henneberg" in doc:
        base, steps = _build_henneberg(doc["henneberg"])
    else:
        try:
            base = build_framework(doc["framework"])
        except FrameworkError as exc:
            raise ScenarioError(str(exc), "$.framework") from None
    seed = doc.get("seed", 0)
    reference = None
    if "reference_positions" in doc:
        reference = np.asarray(doc["reference_positions"], dtype=float)
        if reference.shape != base.positions.shape:
            raise ScenarioError(f"expected shape {base.positions.shape}, got {reference.shape}",
                                "$.reference_positions")
    start = base.positions
    frac = doc.get("initial_perturbation", 0.0)
    if frac > 0:
        if reference is None:
            reference = base.positions.copy()
        start = perturb(base.positions, frac, np.random.default_rng(seed))
    try:
        fw = base.with_positions(start)
    except FrameworkError as exc:
        raise ScenarioError(f"perturbed start is invalid: {exc}", "$.initial_perturbation") from None

    controller = Controller(doc["controller"]) if "controller" in doc else None
    targets = None
    if controller is not None or "targets" in doc:
        source = reference if reference is not None else base.positions
        targets = _targets(doc.get("targets", {}), fw, source)
    integ = doc.get("integrator", {})
    integrator = Integrator(step=integ.get("step", 1e-3), horizon=integ.get("horizon", 30.0))
    kinds = tuple(RigidityKind(k) for k in doc.get("kinds", []))
    if not kinds:
        kinds = (controller.kind(fw.dim),) if controller else (default_kind(fw.graph, fw.dim),)
    for k, kind in enumerate(kinds):
        try:
            check_kind(kind, fw.dim)
        except FrameworkError as exc:
            raise ScenarioError(str(exc), _path(["kinds", k])) from None
    sf = ScenarioFile(
        name=doc.get("name", "scenario"),
        framework=fw,
        reference=reference,
        targets=targets,
        controller=controller,
        integrator=integrator,
        stop_tolerance=doc.get("stop_tolerance", 1e-8),
        kinds=kinds,
        henneberg_steps=steps,
        seed=seed,
        outputs=dict(doc.get("outputs", {})),
        document=doc,
    )
    if controller is not None:
        sf.simulation_config()
    return sf


def parse_scenario(text: str) -> ScenarioFile:
    """Parse and validate scenario JSON text."""
    doc = _decode(text)
    return scenario_from_document(doc)


def load_scenario(path) -> ScenarioFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(str(exc), str(path)) from None
    return parse_scenario(text)


def normalized_document(sf: ScenarioFile) -> dict:
    """Canonical form: edges oriented ``i < j``, explicit defaults, raw signed targets."""
    src = sf.document
    doc: dict = {"version": SCHEMA_VERSION, "name": sf.name}
    if "description" in src:
        doc["description"] = src["description"]
    if "henneberg" in src:
        h = src["henneberg"]
        doc["henneberg"] = {
            "dim": h["dim"],
            "family": h["family"],
            "base_positions": h["base_positions"],
            "steps": [dict(s, family=s.get("family", h["family"])) for s in h["steps"]],
        }
    else:
        fw = src["framework"]
        spec = {"n": int(fw.get("n", len(fw["positions"]))), "dim": fw["dim"], "positions": fw["positions"]}
        spec["edges"] = [sorted(e) for e in fw.get("edges", [])]
        for key in ("angles", "signed_angles", "signed_volumes"):
            spec[key] = [list(t) for t in fw.get(key, [])]
        doc["framework"] = spec
    if "reference_positions" in src:
        doc["reference_positions"] = src["reference_positions"]
    if "initial_perturbation" in src:
        doc["initial_perturbation"] = src["initial_perturbation"]
    if sf.targets is not None:
        t = sf.targets
        doc["targets"] = {
            "distance_sq": [2.0 * v for v in t.distance_sq_half],
            "cosines": list(t.cosines),
            "signed_angles": list(t.signed_sines),
            "signed_volumes": list(t.signed_volumes),
            "gain_k": t.gain_k,
        }
    if sf.controller is not None:
        doc["controller"] = sf.controller.value
        doc["integrator"] = {"method": "rk4", "step": sf.integrator.step, "horizon": sf.integrator.horizon}
        doc["stop_tolerance"] = sf.stop_tolerance
    doc["kinds"] = [k.value for k in sf.kinds]
    if sf.outputs:
        doc["outputs"] = dict(sf.outputs)
    doc["seed"] = sf.seed
    return doc


def dump_scenario(sf: ScenarioFile) -> str:
    return json.dumps(normalized_document(sf), indent=2) + "\n"


def bundled_scenarios() -> list[str]:
    root = resources.files("signed_rigidity").joinpath("scenarios")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def bundled_scenario_text(name: str) -> str:
    if not name.endswith(".json"):
        name += ".json"
    return resources.files("signed_rigidity").joinpath("scenarios", name).read_text("utf-8")
