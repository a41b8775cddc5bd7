"""Synthetic test data and delimited-text dataset I/O."""
from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .system import ScatteredDataset


def sigmoid_target(points: np.ndarray) -> np.ndarray:
    """Radial logistic test surface on the unit cube.

    ``f(x) = 1 / (1 + exp(-16 * (|x|^2 / P - 0.5)))``; equals one half on
    the sphere ``|x|^2 = P / 2`` and approaches 0/1 toward the corners.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    t = (points**2).sum(axis=1) / points.shape[1] - 0.5
    return 1.0 / (1.0 + np.exp(-16.0 * t))


def generate_dataset(num_axes: int, n: int, noise: float = 0.1, seed: int = 0) -> ScatteredDataset:
    """Uniform points on the unit cube with noisy sigmoid responses.

    Fully reproducible for a fixed seed; ``noise=0`` returns exact surface
    values.
    """
    if num_axes < 1:
        raise ParameterError(f"dimension must be >= 1, got {num_axes}")
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    if noise < 0:
        raise ParameterError(f"noise level must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    points = rng.random((n, num_axes))
    responses = sigmoid_target(points)
    if noise > 0:
        responses = responses + rng.normal(0.0, noise, size=n)
    return ScatteredDataset(points, responses)


def write_dataset(path, points, responses) -> None:
    """Write observations as text: one row per point, coordinate columns
    followed by the response column."""
    points = np.asarray(points, dtype=np.float64)
    data = np.column_stack([points, np.asarray(responses, dtype=np.float64)])
    cols = [f"x{p + 1}" for p in range(points.shape[1])] + ["y"]
    np.savetxt(path, data, fmt="%.17g", header=" ".join(cols))


def read_table(path) -> np.ndarray:
    """Read a delimited text table (comma or whitespace separated, ``#``
    comments and an optional non-numeric header line allowed)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    skip = 0
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            skip += 1
            continue
        try:
            float(stripped.replace(",", " ").split()[0])
        except ValueError:
            skip += 1
        break
    delimiter = "," if any("," in ln for ln in lines[skip : skip + 1]) else None
    data = np.loadtxt(path, delimiter=delimiter, skiprows=skip, ndmin=2)
    return data


def read_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """Split a data table into points and responses (last column)."""
    data = read_table(path)
    if data.shape[1] < 2:
        raise ParameterError(
            f"{path}: need at least one coordinate column and one response column"
        )
    return data[:, :-1], data[:, -1]
