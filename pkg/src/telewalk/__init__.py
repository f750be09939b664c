"""Teleoperated bipedal walking simulator.

Operator commands (treadmill-style speed/heading plus VR-style hand poses)
are retargeted into a three-layer walking controller — footstep/capture-point
planning, simplified-model balance control, whole-body velocity IK — driving
a floating-base kinematic humanoid in a deterministic closed loop.
"""

from .config import ScenarioConfig, build_config, load_config
from .dcm_control import GainSet, IntegralState, LipmState
from .gait import DcmTrajectory, Footstep, FootstepPlan, PlannerParams
from .model import RobotModel, RobotState, load_model, load_model_file
from .retarget import ComCommand, OperatorCommand, RetargetCalibration
from .simloop import CommandStream, World, init_world, run_scenario, step
from .spatial import Transform, Twist
from .wholebody import QpSolution, TaskGains, TaskSet, solve

__version__ = "0.1.0"

__all__ = [
    "ComCommand",
    "CommandStream",
    "DcmTrajectory",
    "Footstep",
    "FootstepPlan",
    "GainSet",
    "IntegralState",
    "LipmState",
    "OperatorCommand",
    "PlannerParams",
    "QpSolution",
    "RetargetCalibration",
    "RobotModel",
    "RobotState",
    "ScenarioConfig",
    "TaskGains",
    "TaskSet",
    "Transform",
    "Twist",
    "World",
    "build_config",
    "init_world",
    "load_config",
    "load_model",
    "load_model_file",
    "run_scenario",
    "solve",
    "step",
]
