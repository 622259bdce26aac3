"""Byte-stable CSV tables: UTF-8, header row, 17 significant digits, LF endings."""
from __future__ import annotations

from pathlib import Path

import numpy as np

FLOAT_FMT = "%.16e"


class TableFormatError(ValueError):
    pass


def write_table(path, columns: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",", newline="\n")
    return path


def read_table(path, required: tuple[str, ...] = ()) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split(",")
            rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    except (OSError, UnicodeDecodeError) as exc:
        raise TableFormatError(f"cannot read {path}: {exc}") from exc
    missing = [k for k in required if k not in header]
    if missing:
        raise TableFormatError(f"{path}: missing columns {missing}")
    if not rows:
        raise TableFormatError(f"{path}: no data rows")
    if any(len(r) != len(header) for r in rows):
        raise TableFormatError(f"{path}: ragged rows")
    try:
        data = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise TableFormatError(f"{path}: non-numeric entry ({exc})") from exc
    return {k: data[:, i] for i, k in enumerate(header)}


def controls_columns(c) -> dict[str, np.ndarray]:
    """Columns of ``controls.csv``."""
    return {"t": c.time_grid, "omega": c.rabi, "delta": c.detuning, "laser_phase": c.laser_phase()}


def trajectory_columns(traj) -> dict[str, np.ndarray]:
    """Columns of ``trajectory.csv``: populations, amplitudes and angles."""
    from .tdse import extract_angles

    ang = extract_angles(traj)
    return {
        "t": traj.time_grid, "p_ground": traj.populations[:, 0], "p_excited": traj.populations[:, 1],
        "re_c1": traj.states[:, 0].real, "im_c1": traj.states[:, 0].imag,
        "re_c2": traj.states[:, 1].real, "im_c2": traj.states[:, 1].imag,
        "theta": ang.theta, "varphi": ang.varphi, "gamma": ang.gamma,
    }
