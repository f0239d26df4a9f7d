"""Position controllers: disturbance-feedforward PID and nonlinear MPC."""

from gustbench.control.mpc import (
    MpcConfig,
    MpcController,
    MpcSolution,
    OcpProblem,
    QpSubproblem,
    equilibrium_input,
    mpc_model_derivative,
    mpc_model_jacobians,
    rk4_model_step,
    rk4_sensitivities,
    rollout,
    solve_qp,
    transcribe,
)
from gustbench.control.pid import (
    AttitudeThrustCmd,
    PidConfig,
    PidController,
    accel_to_attitude_thrust,
    euler_cmd,
    pid_step,
)
from gustbench.control.qp import QpResult, kkt_residuals, solve_dense_qp

__all__ = [
    "AttitudeThrustCmd",
    "MpcConfig",
    "MpcController",
    "MpcSolution",
    "OcpProblem",
    "PidConfig",
    "PidController",
    "QpResult",
    "QpSubproblem",
    "accel_to_attitude_thrust",
    "equilibrium_input",
    "euler_cmd",
    "kkt_residuals",
    "mpc_model_derivative",
    "mpc_model_jacobians",
    "pid_step",
    "rk4_model_step",
    "rk4_sensitivities",
    "rollout",
    "solve_dense_qp",
    "solve_qp",
    "transcribe",
]
