"""Field robot localization by pose-graph fusion.

Trajectories are ``(N, 7)`` float arrays with columns
``stamp, x, y, z, roll, pitch, yaw``.
"""

import sys

from ._fieldloc import (
    Config,
    DemGrid,
    Error,
    FormatError,
    InvalidArgument,
    LinearSolveFailure,
    OutOfBounds,
    SensorLog,
    Simulation,
    compute_stats,
    config_reference,
    phi,
    read_ground_truth,
    read_trajectory,
    run_batch,
    run_cli,
    run_online,
    simulate,
    so3_exp,
    so3_log,
    to_transform,
    write_trajectory,
)

__all__ = [
    "Config",
    "DemGrid",
    "Error",
    "FormatError",
    "InvalidArgument",
    "LinearSolveFailure",
    "OutOfBounds",
    "SensorLog",
    "Simulation",
    "compute_stats",
    "config_reference",
    "main",
    "phi",
    "read_ground_truth",
    "read_trajectory",
    "run_batch",
    "run_cli",
    "run_online",
    "simulate",
    "so3_exp",
    "so3_log",
    "to_transform",
    "write_trajectory",
]


def main() -> int:
    code, out, err = run_cli(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
