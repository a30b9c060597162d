"""Analytic kinematics and force-driven dynamics of 1-DOF articulated objects.

An object is a single rigid link attached to the world by either a prismatic
or a revolute joint. Motion is parametrized directly by the generalized
coordinate q, so joint constraints hold exactly; forces are projected onto
the joint via the contact-point Jacobian and integrated with semi-implicit
Euler.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

UNIT_NORM_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when a spec or input violates its declared invariants."""


class UnsupportedJointError(ValueError):
    """Raised when an operation is called for the wrong joint kind."""


class JointKind(enum.Enum):
    PRISMATIC = "prismatic"
    REVOLUTE = "revolute"


def _as_vec3(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValidationError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} must be finite, got {v}")
    return v


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit axis."""
    k = np.asarray(axis, dtype=float)
    kx = np.array([
        [0.0, -k[2], k[1]],
        [k[2], 0.0, -k[0]],
        [-k[1], k[0], 0.0],
    ])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


@dataclass(frozen=True)
class JointSpec:
    """Joint geometry and dynamics parameters.

    axis/origin are in the object's body frame; inertia is kg for prismatic
    and kg*m^2 for revolute, damping N*s/m or N*m*s/rad respectively.
    """

    kind: JointKind
    axis: np.ndarray
    origin: np.ndarray
    q_min: float
    q_max: float
    inertia: float = 1.0
    damping: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "axis", _as_vec3(self.axis, "joint.axis"))
        object.__setattr__(self, "origin", _as_vec3(self.origin, "joint.origin"))
        n = float(np.linalg.norm(self.axis))
        if abs(n - 1.0) > UNIT_NORM_TOL:
            raise ValidationError(f"joint.axis must be unit norm, got |axis|={n}")
        if not self.q_min < self.q_max:
            raise ValidationError(f"joint limits require q_min < q_max, got [{self.q_min}, {self.q_max}]")
        if not self.inertia > 0:
            raise ValidationError(f"joint.inertia must be > 0, got {self.inertia}")
        if self.damping < 0:
            raise ValidationError(f"joint.damping must be >= 0, got {self.damping}")


@dataclass(frozen=True)
class ContactRegion:
    """Either an explicit anchor list or an axis-aligned body-frame box."""

    anchors: tuple = ()
    box_min: np.ndarray | None = None
    box_max: np.ndarray | None = None

    def __post_init__(self):
        anchors = tuple(_as_vec3(a, "contact anchor") for a in self.anchors)
        object.__setattr__(self, "anchors", anchors)
        if (self.box_min is None) != (self.box_max is None):
            raise ValidationError("contact box needs both box_min and box_max")
        if self.box_min is not None:
            lo = _as_vec3(self.box_min, "contact box_min")
            hi = _as_vec3(self.box_max, "contact box_max")
            if np.any(lo > hi):
                raise ValidationError("contact box requires box_min <= box_max componentwise")
            object.__setattr__(self, "box_min", lo)
            object.__setattr__(self, "box_max", hi)
        if not anchors and self.box_min is None:
            raise ValidationError("contact_region must declare anchors or a box")

    @property
    def is_box(self) -> bool:
        return self.box_min is not None

    def center(self) -> np.ndarray:
        if self.is_box:
            return 0.5 * (self.box_min + self.box_max)
        return np.mean(np.stack(self.anchors), axis=0)


@dataclass(frozen=True)
class ObjectSpec:
    """A complete articulated object: joint, contact region, and base pose."""

    id: str
    joint: JointSpec
    contact_region: ContactRegion
    base_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_yaw: float = 0.0
    goal_fraction: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "base_position", _as_vec3(self.base_position, "base_position"))
        if not 0.0 < self.goal_fraction <= 1.0:
            raise ValidationError(f"goal_fraction must be in (0, 1], got {self.goal_fraction}")

    def base_rotation(self) -> np.ndarray:
        return rotation_about_axis(np.array([0.0, 0.0, 1.0]), self.base_yaw)

    def world_axis(self) -> np.ndarray:
        return self.base_rotation() @ self.joint.axis

    def world_origin(self) -> np.ndarray:
        return self.base_rotation() @ self.joint.origin + self.base_position

    def with_yaw(self, yaw: float, new_id: str | None = None) -> "ObjectSpec":
        return replace(self, base_yaw=float(yaw), id=new_id if new_id is not None else self.id)


@dataclass(frozen=True)
class ObjectState:
    q: float
    q_dot: float
    contact_anchor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "contact_anchor", _as_vec3(self.contact_anchor, "contact_anchor"))


@dataclass(frozen=True)
class StepOutcome:
    new_state: ObjectState
    delta_x: np.ndarray
    delta_q: float


def initial_state(spec: ObjectSpec, anchor: np.ndarray, q: float | None = None) -> ObjectState:
    q0 = spec.joint.q_min if q is None else float(q)
    return ObjectState(q=q0, q_dot=0.0, contact_anchor=_as_vec3(anchor, "contact_anchor"))


def point_position(spec: ObjectSpec, anchor, q: float) -> np.ndarray:
    """World position of a body-frame contact anchor at joint coordinate q."""
    anchor = _as_vec3(anchor, "anchor")
    joint = spec.joint
    if joint.kind is JointKind.PRISMATIC:
        body = anchor + q * joint.axis
    else:
        rot = rotation_about_axis(joint.axis, q)
        body = joint.origin + rot @ (anchor - joint.origin)
    return spec.base_rotation() @ body + spec.base_position


def point_jacobian(spec: ObjectSpec, anchor, q: float) -> np.ndarray:
    """d(point_position)/dq: maps generalized velocity to Cartesian velocity."""
    joint = spec.joint
    if joint.kind is JointKind.PRISMATIC:
        return spec.world_axis()
    p = point_position(spec, anchor, q)
    return np.cross(spec.world_axis(), p - spec.world_origin())


def step(spec: ObjectSpec, state: ObjectState, force, dt: float) -> StepOutcome:
    """Advance one timestep under an applied Cartesian force at the contact point.

    Semi-implicit Euler on the generalized coordinate; joint limits are a
    hard clamp with velocity zeroing.
    """
    force = np.asarray(force, dtype=float)
    if force.shape != (3,) or not np.all(np.isfinite(force)):
        raise ValidationError(f"force must be a finite 3-vector, got {force}")
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")

    joint = spec.joint
    jac = point_jacobian(spec, state.contact_anchor, state.q)
    tau = float(force @ jac)
    q_dot = state.q_dot + dt * (tau - joint.damping * state.q_dot) / joint.inertia
    q_new = state.q + dt * q_dot
    if q_new <= joint.q_min:
        q_new, q_dot = joint.q_min, 0.0
    elif q_new >= joint.q_max:
        q_new, q_dot = joint.q_max, 0.0

    p_old = point_position(spec, state.contact_anchor, state.q)
    p_new = point_position(spec, state.contact_anchor, q_new)
    new_state = ObjectState(q=q_new, q_dot=q_dot, contact_anchor=state.contact_anchor)
    return StepOutcome(new_state=new_state, delta_x=p_new - p_old, delta_q=q_new - state.q)


def sample_contact_point(spec: ObjectSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the declared contact region (body frame)."""
    region = spec.contact_region
    if region.is_box:
        return rng.uniform(region.box_min, region.box_max)
    idx = int(rng.integers(len(region.anchors)))
    return region.anchors[idx].copy()


def radial_distance(spec: ObjectSpec, p) -> float:
    """Distance of a world point from the revolute axis line."""
    if spec.joint.kind is not JointKind.REVOLUTE:
        raise UnsupportedJointError("radial_distance is defined for revolute joints only")
    p = _as_vec3(p, "p")
    h = spec.world_axis()
    d = p - spec.world_origin()
    return float(np.linalg.norm(d - (d @ h) * h))
