"""
Error hierarchy shared by the library and the command line.
"""
from typing import Optional, Sequence, Tuple


class QcmSysidError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(QcmSysidError, ValueError):
    """An argument violates a documented precondition."""


class SimulationDivergedError(QcmSysidError):
    """The symplectic integration produced a non-finite state."""

    def __init__(self, step: int, road_index: Optional[int] = None, mass_index: Optional[int] = None):
        self.step = step
        self.road_index = road_index
        self.mass_index = mass_index
        where = f" (road {road_index}, mass {mass_index})" if road_index is not None else ""
        super().__init__(f"Simulation diverged at step {step}{where}")

    def at_sample(self, road_index: int, mass_index: int) -> "SimulationDivergedError":
        """Return a copy tagged with the offending sample."""
        return SimulationDivergedError(self.step, road_index, mass_index)

    def __reduce__(self):
        return (SimulationDivergedError, (self.step, self.road_index, self.mass_index))


class DatasetFormatError(QcmSysidError):
    """A persisted dataset is incompatible, truncated or corrupted."""

    def __init__(self, message: str, sample_id: Optional[str] = None):
        self.sample_id = sample_id
        if sample_id is not None:
            message = f"{sample_id}: {message}"
        super().__init__(message)


class CheckpointError(QcmSysidError):
    """A checkpoint is missing or does not match the expected format."""


class NonFiniteLossError(QcmSysidError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, step: int, batch: Sequence[Tuple[int, int]]):
        self.step = step
        self.batch = list(batch)
        shown = ", ".join(f"({j},{i})" for j, i in self.batch[:10])
        more = "" if len(self.batch) <= 10 else f" ... +{len(self.batch) - 10} more"
        super().__init__(f"Non-finite loss at step {step}; batch samples (road, mass): {shown}{more}")
