"""Force-space manipulation skills for 1-DOF articulated objects.

Robot-free toolkit: analytic prismatic/revolute dynamics, TD3 force
policies, interactive joint-type estimation, and an evaluation harness
over a synthetic object corpus.
"""

from .dynamics import JointKind, JointSpec, ObjectSpec, ObjectState, StepOutcome
from .td3 import TD3Config, TD3Learner
from .estimator import ProbeConfig, Trajectory, classify
from .corpus import build_default_corpus, load_spec, save_spec

__all__ = [
    "JointKind", "JointSpec", "ObjectSpec", "ObjectState", "StepOutcome",
    "TD3Config", "TD3Learner", "ProbeConfig", "Trajectory", "classify",
    "build_default_corpus", "load_spec", "save_spec",
]

__version__ = "0.1.0"
