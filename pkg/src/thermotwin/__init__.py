"""Digital-twin testbed for a thermally controlled enclosure."""

from .core import (
    ControlInput,
    PlantParams,
    ThermalState,
    Trajectory,
    WindowedDataset,
    action_grid,
    chrono_split,
    make_windows,
    quantize_control,
)

__version__ = "0.1.0"

__all__ = [
    "ControlInput", "PlantParams", "ThermalState", "Trajectory", "WindowedDataset", "action_grid",
    "chrono_split", "make_windows", "quantize_control", "__version__",
]
