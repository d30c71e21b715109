"""Shared test helpers."""

from __future__ import annotations

import sys

import numpy as np
import pytest

from smallpunch.curves import GridSpec, SpecimenMeta, UniformCurve


def make_meta(
    material: str = "X1",
    temperature: float = 20.0,
    thickness: float = 0.5,
    rm: float | None = None,
) -> SpecimenMeta:
    return SpecimenMeta(
        material_id=material, temperature_C=temperature, thickness_mm=thickness, rm_MPa=rm
    )


def make_uniform(
    forces,
    grid: GridSpec | None = None,
    meta: SpecimenMeta | None = None,
    n_extrapolated: int = 0,
) -> UniformCurve:
    forces = np.asarray(forces, dtype=float)
    if grid is None:
        grid = GridSpec(start_mm=0.0, spacing_mm=0.010, n_points=forces.size)
    return UniformCurve(
        grid=grid,
        force_N=forces,
        meta=meta if meta is not None else make_meta(),
        n_extrapolated=n_extrapolated,
    )


@pytest.fixture
def default_grid() -> GridSpec:
    return GridSpec()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance verdict lines after capture has ended."""
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None) if module else None
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.line(line)
