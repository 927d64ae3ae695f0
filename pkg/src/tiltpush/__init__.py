"""Simulation and cascade control of a tilt-rotor multirotor with a shifting CoM."""

from .actuation import (
    ActuatorDynamics,
    RotorCommand,
    actuation_wrench,
    actuator_step,
    allocation_matrix,
    rotor_drag_torque,
    rotor_thrust,
)
from .control import (
    AttitudeErrorState,
    ControlGains,
    Setpoint,
    allocate,
    attitude_control,
    attitude_errors,
    body_force_targets,
    cascade_step,
    desired_roll,
    impedance_force,
    tilt_angle,
)
from .environment import WallModel, contact_wrench, ee_tip_position
from .vehicle import (
    Frame,
    ParameterRangeError,
    VehicleParams,
    VehicleState,
    Wrench,
    com_displacement,
    gravity_wrench,
    inertia_matrix,
)

__version__ = "0.1.0"
