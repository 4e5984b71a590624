"""Closed-loop induction motor simulator used to generate training data."""

from .control import ControllerState, FocGains, field_weakening_flux, foc_controller_step
from .dynamics import MotorInputs, integrate, motor_derivatives, rk4, rk4_step
from .noise import DEFAULT_SENSOR_NOISE, NoiseSpec, add_sensor_noise
from .params import MotorParams, MotorState, electromagnetic_torque
from .run import (
    CHANNEL_UNITS, CHANNELS, INPUT_CHANNELS, SAMPLE_RATE, TARGET_CHANNELS, MotorRun,
    SimConfig, generate_run, load_run, load_runs, save_run,
)
from .scenarios import SCENARIO_NAMES, Scenario, default_scenario, named_scenario, random_scenario
