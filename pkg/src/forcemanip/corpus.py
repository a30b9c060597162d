"""Parametric object corpus: file schema, randomized instances, manifests.

Object specs are stored as flat UTF-8 ``key = value`` text files (vectors
are space-separated floats). The default corpus provides desk-scale
drawer/microwave/dishwasher training objects and 13 held-out evaluation
objects split across four appliance classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import ContactRegion, JointKind, JointSpec, ObjectSpec, ValidationError

SPEC_FILE_VERSION = 1

_VEC_KEYS = {"joint.axis", "joint.origin", "base_position",
             "contact_region.box_min", "contact_region.box_max"}
_KNOWN_KEYS = _VEC_KEYS | {
    "version", "id", "joint.kind", "joint.limits", "joint.inertia",
    "joint.damping", "contact_region.anchors", "base_yaw", "goal_fraction",
}


class SpecParseError(ValueError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


def _fmt_vec(v) -> str:
    return " ".join(repr(float(x)) for x in v)


def save_spec(spec: ObjectSpec, path):
    """Write an ObjectSpec in canonical key order; save→load→save is
    byte-identical."""
    lines = [
        f"version = {SPEC_FILE_VERSION}",
        f"id = {spec.id}",
        f"joint.kind = {spec.joint.kind.value}",
        f"joint.axis = {_fmt_vec(spec.joint.axis)}",
        f"joint.origin = {_fmt_vec(spec.joint.origin)}",
        f"joint.limits = {repr(float(spec.joint.q_min))} {repr(float(spec.joint.q_max))}",
        f"joint.inertia = {repr(float(spec.joint.inertia))}",
        f"joint.damping = {repr(float(spec.joint.damping))}",
    ]
    region = spec.contact_region
    if region.is_box:
        lines.append(f"contact_region.box_min = {_fmt_vec(region.box_min)}")
        lines.append(f"contact_region.box_max = {_fmt_vec(region.box_max)}")
    else:
        lines.append("contact_region.anchors = " + " ; ".join(_fmt_vec(a) for a in region.anchors))
    lines += [
        f"base_position = {_fmt_vec(spec.base_position)}",
        f"base_yaw = {repr(float(spec.base_yaw))}",
        f"goal_fraction = {repr(float(spec.goal_fraction))}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_floats(text, n, path, line_no, key):
    parts = text.split()
    if n is not None and len(parts) != n:
        raise SpecParseError(path, line_no, f"{key}: expected {n} values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise SpecParseError(path, line_no, f"{key}: {exc}") from None


def load_spec(path) -> ObjectSpec:
    """Parse and fully validate an object spec file."""
    path = Path(path)
    fields: dict = {}
    line_of: dict = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SpecParseError(path, line_no, f"expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise SpecParseError(path, line_no, f"unknown key {key!r}")
        if key in fields:
            raise SpecParseError(path, line_no, f"duplicate key {key!r}")
        fields[key] = value
        line_of[key] = line_no

    def require(key):
        if key not in fields:
            raise SpecParseError(path, 0, f"missing required key {key!r}")
        return fields[key]

    if require("version") != str(SPEC_FILE_VERSION):
        raise SpecParseError(path, line_of["version"], f"unsupported version {fields['version']!r}")

    kind_text = require("joint.kind")
    try:
        kind = JointKind(kind_text)
    except ValueError:
        raise SpecParseError(path, line_of["joint.kind"],
                             f"joint.kind must be prismatic or revolute, got {kind_text!r}") from None

    def vec3(key):
        return np.array(_parse_floats(require(key), 3, path, line_of[key], key))

    limits = _parse_floats(require("joint.limits"), 2, path, line_of["joint.limits"], "joint.limits")

    if "contact_region.anchors" in fields:
        if "contact_region.box_min" in fields or "contact_region.box_max" in fields:
            raise SpecParseError(path, line_of["contact_region.anchors"],
                                 "contact region must be anchors or a box, not both")
        anchors = []
        for chunk in fields["contact_region.anchors"].split(";"):
            if chunk.strip():
                anchors.append(_parse_floats(chunk, 3, path, line_of["contact_region.anchors"],
                                             "contact_region.anchors"))
        if not anchors:
            raise SpecParseError(path, line_of["contact_region.anchors"],
                                 "contact_region.anchors is empty")
        region = ContactRegion(anchors=tuple(np.array(a) for a in anchors))
    elif "contact_region.box_min" in fields and "contact_region.box_max" in fields:
        region = ContactRegion(box_min=vec3("contact_region.box_min"),
                               box_max=vec3("contact_region.box_max"))
    else:
        raise SpecParseError(path, 0, "missing contact_region (anchors or box_min/box_max)")

    try:
        joint = JointSpec(
            kind=kind,
            axis=vec3("joint.axis"),
            origin=vec3("joint.origin"),
            q_min=limits[0],
            q_max=limits[1],
            inertia=float(require("joint.inertia")),
            damping=float(require("joint.damping")),
        )
        return ObjectSpec(
            id=require("id"),
            joint=joint,
            contact_region=region,
            base_position=vec3("base_position"),
            base_yaw=float(require("base_yaw")),
            goal_fraction=float(require("goal_fraction")),
        )
    except ValidationError as exc:
        raise SpecParseError(path, 0, str(exc)) from None


@dataclass
class RandomizationSpec:
    yaw_range: tuple = (-math.pi, math.pi)
    position: np.ndarray = field(default_factory=lambda: np.array([-1.0, 0.0, 0.0]))

    def __post_init__(self):
        if self.yaw_range[0] > self.yaw_range[1]:
            raise ValueError(f"yaw_range lo > hi: {self.yaw_range}")


def generate_instance(base: ObjectSpec, rand: RandomizationSpec,
                      rng: np.random.Generator, suffix: str = "inst") -> ObjectSpec:
    """Copy the base object with a uniformly random yaw; deterministic per seed."""
    yaw = float(rng.uniform(rand.yaw_range[0], rand.yaw_range[1]))
    return replace(base, base_yaw=yaw, base_position=np.asarray(rand.position, dtype=float),
                   id=f"{base.id}__{suffix}")


@dataclass
class CorpusManifest:
    train: dict   # id -> ObjectSpec
    eval: dict    # id -> ObjectSpec
    object_class: dict  # id -> class name ("cabinet", "trashcan", "microwave", "dishwasher")

    def __post_init__(self):
        overlap = set(self.train) & set(self.eval)
        if overlap:
            raise ValueError(f"train/eval ids overlap: {sorted(overlap)}")

    def train_for_kind(self, kind: JointKind):
        return [s for s in self.train.values() if s.joint.kind is kind]


def _prismatic(obj_id, axis, q_max, inertia, damping, box_min, box_max):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return ObjectSpec(
        id=obj_id,
        joint=JointSpec(kind=JointKind.PRISMATIC, axis=axis, origin=np.zeros(3),
                        q_min=0.0, q_max=q_max, inertia=inertia, damping=damping),
        contact_region=ContactRegion(box_min=np.array(box_min), box_max=np.array(box_max)),
    )


def _revolute(obj_id, axis, origin, q_max, inertia, damping, box_min, box_max):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return ObjectSpec(
        id=obj_id,
        joint=JointSpec(kind=JointKind.REVOLUTE, axis=axis, origin=np.array(origin, dtype=float),
                        q_min=0.0, q_max=q_max, inertia=inertia, damping=damping),
        contact_region=ContactRegion(box_min=np.array(box_min), box_max=np.array(box_max)),
    )


def build_default_corpus() -> CorpusManifest:
    """Synthetic stand-ins for the appliance classes: 3 training objects
    (1 prismatic, 2 revolute) and 13 held-out evaluation objects."""
    train = {}
    evals = {}
    classes = {}

    def add(table, spec, cls):
        table[spec.id] = spec
        classes[spec.id] = cls

    # --- training objects ------------------------------------------------
    add(train, _prismatic("drawer_train", (1, 0, 0), 0.35, 0.08, 0.05,
                          (0.38, -0.12, 0.00), (0.45, 0.12, 0.20)), "drawer")
    add(train, _revolute("microwave_train", (0, 0, 1), (0.0, 0.22, 0.0), math.pi / 2,
                         0.02, 0.010, (0.28, 0.16, 0.00), (0.34, 0.26, 0.30)), "microwave")
    add(train, _revolute("dishwasher_train", (0, 1, 0), (0.30, 0.0, 0.0), 1.2,
                         0.03, 0.012, (0.27, -0.15, 0.35), (0.33, 0.15, 0.45)), "dishwasher")

    # --- held-out evaluation objects -------------------------------------
    # 4 microwaves: vertical hinge, varied radius/limits/inertia
    add(evals, _revolute("microwave_eval_0", (0, 0, 1), (0.0, 0.18, 0.0), math.pi / 2,
                         0.015, 0.008, (0.22, 0.12, 0.00), (0.27, 0.22, 0.25)), "microwave")
    add(evals, _revolute("microwave_eval_1", (0, 0, 1), (0.0, 0.28, 0.0), 1.4,
                         0.025, 0.012, (0.33, 0.22, 0.00), (0.40, 0.32, 0.30)), "microwave")
    add(evals, _revolute("microwave_eval_2", (0, 0, -1), (0.0, -0.22, 0.0), math.pi / 2,
                         0.02, 0.009, (0.26, -0.28, 0.00), (0.33, -0.16, 0.28)), "microwave")
    add(evals, _revolute("microwave_eval_3", (0.05, 0, 1), (0.0, 0.20, 0.0), 1.3,
                         0.018, 0.011, (0.30, 0.14, 0.00), (0.36, 0.24, 0.26)), "microwave")
    # 3 dishwashers: horizontal hinge
    add(evals, _revolute("dishwasher_eval_0", (0, 1, 0), (0.28, 0.0, 0.0), 1.3,
                         0.022, 0.010, (0.24, -0.18, 0.30), (0.31, 0.18, 0.40)), "dishwasher")
    add(evals, _revolute("dishwasher_eval_1", (0, 1, 0.05), (0.34, 0.0, 0.0), 1.1,
                         0.035, 0.014, (0.30, -0.12, 0.42), (0.37, 0.12, 0.52)), "dishwasher")
    add(evals, _revolute("dishwasher_eval_2", (0, -1, 0), (0.25, 0.0, 0.0), 1.25,
                         0.028, 0.011, (0.22, -0.16, 0.33), (0.28, 0.16, 0.43)), "dishwasher")
    # 3 trashcans: pull-out bins, prismatic
    add(evals, _prismatic("trashcan_eval_0", (1, 0, 0.1), 0.30, 0.06, 0.045,
                          (0.30, -0.10, 0.05), (0.36, 0.10, 0.22)), "trashcan")
    add(evals, _prismatic("trashcan_eval_1", (1, 0.15, 0), 0.25, 0.05, 0.040,
                          (0.28, -0.08, 0.00), (0.34, 0.08, 0.18)), "trashcan")
    add(evals, _prismatic("trashcan_eval_2", (1, -0.1, 0.05), 0.42, 0.09, 0.055,
                          (0.40, -0.12, 0.02), (0.48, 0.12, 0.20)), "trashcan")
    # 3 cabinets: drawers with varied geometry
    add(evals, _prismatic("cabinet_eval_0", (1, 0, 0), 0.45, 0.10, 0.060,
                          (0.45, -0.15, 0.00), (0.52, 0.15, 0.25)), "cabinet")
    add(evals, _prismatic("cabinet_eval_1", (1, 0.2, 0.05), 0.28, 0.07, 0.042,
                          (0.32, -0.10, 0.04), (0.38, 0.10, 0.20)), "cabinet")
    add(evals, _prismatic("cabinet_eval_2", (1, -0.15, 0), 0.38, 0.085, 0.050,
                          (0.40, -0.14, 0.00), (0.47, 0.14, 0.22)), "cabinet")

    return CorpusManifest(train=train, eval=evals, object_class=classes)


def write_corpus(manifest: CorpusManifest, out_dir) -> Path:
    """Write all spec files plus a manifest index; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"version = {SPEC_FILE_VERSION}"]
    for split, table in (("train", manifest.train), ("eval", manifest.eval)):
        for obj_id, spec in table.items():
            rel = f"{obj_id}.objspec"
            save_spec(spec, out_dir / rel)
            lines.append(f"{split} = {obj_id} {rel} {manifest.object_class[obj_id]}")
    manifest_path = out_dir / "manifest.txt"
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest_path


def load_corpus(manifest_path) -> CorpusManifest:
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    train, evals, classes = {}, {}, {}
    for line_no, raw in enumerate(manifest_path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "version":
            if value != str(SPEC_FILE_VERSION):
                raise SpecParseError(manifest_path, line_no, f"unsupported version {value!r}")
            continue
        if key not in ("train", "eval"):
            raise SpecParseError(manifest_path, line_no, f"unknown key {key!r}")
        parts = value.split()
        if len(parts) != 3:
            raise SpecParseError(manifest_path, line_no, "expected '<id> <path> <class>'")
        obj_id, rel, cls = parts
        spec = load_spec(base / rel)
        if spec.id != obj_id:
            raise SpecParseError(manifest_path, line_no,
                                 f"id mismatch: manifest {obj_id!r} vs file {spec.id!r}")
        (train if key == "train" else evals)[obj_id] = spec
        classes[obj_id] = cls
    return CorpusManifest(train=train, eval=evals, object_class=classes)
