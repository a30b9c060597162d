import math

import numpy as np
import pytest

from forcemanip.dynamics import ContactRegion, JointKind, JointSpec, ObjectSpec


def make_prismatic(axis=(1.0, 0.0, 0.0), q_max=0.35, inertia=0.08, damping=0.05,
                   base_yaw=0.0, anchors=None, box=None, obj_id="test_prismatic"):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    if anchors is None and box is None:
        anchors = [(0.4, 0.0, 0.1)]
    region = (ContactRegion(anchors=tuple(np.asarray(a, float) for a in anchors))
              if anchors is not None
              else ContactRegion(box_min=np.asarray(box[0], float), box_max=np.asarray(box[1], float)))
    return ObjectSpec(
        id=obj_id,
        joint=JointSpec(kind=JointKind.PRISMATIC, axis=axis, origin=np.zeros(3),
                        q_min=0.0, q_max=q_max, inertia=inertia, damping=damping),
        contact_region=region,
        base_yaw=base_yaw,
    )


def make_revolute(axis=(0.0, 0.0, 1.0), origin=(0.0, 0.2, 0.0), q_max=math.pi / 2,
                  inertia=0.02, damping=0.01, base_yaw=0.0, anchors=None, box=None,
                  obj_id="test_revolute"):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    if anchors is None and box is None:
        anchors = [(0.3, 0.2, 0.1)]
    region = (ContactRegion(anchors=tuple(np.asarray(a, float) for a in anchors))
              if anchors is not None
              else ContactRegion(box_min=np.asarray(box[0], float), box_max=np.asarray(box[1], float)))
    return ObjectSpec(
        id=obj_id,
        joint=JointSpec(kind=JointKind.REVOLUTE, axis=axis, origin=np.asarray(origin, float),
                        q_min=0.0, q_max=q_max, inertia=inertia, damping=damping),
        contact_region=region,
        base_yaw=base_yaw,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
