"""
This file contains common starting structures which can be mixed into the data models, results and settings.
"""
from enum import Enum
from typing import Any, Dict, NamedTuple, Tuple

import numpy as np
from pydantic import BaseModel, Field

#: The pollutant categories in column order, category index m is position + 1.
POLLUTANTS: Tuple[str, ...] = ("PM25", "PM10", "NO2", "CO", "O3", "SO2")

#: The meteorology measurements averaged per grid cell.
METEO_MEASUREMENTS: Tuple[str, ...] = ("T", "P", "H", "WS", "WD")


class SettingsConfig(BaseModel):
    """
    The basic configuration for all user settings.
    """

    class Config:
        allow_mutation: bool = True
        validate_assignment: bool = True
        extra: str = "forbid"
        json_encoders: Dict[Any, Any] = {
            np.ndarray: lambda v: v.flatten().tolist(),
            Enum: lambda v: v.value,
        }


class ResultsConfig(BaseModel):
    """
    A basic config class for result structures, these are immutable once built.
    """

    class Config:
        arbitrary_types_allowed: bool = True
        allow_mutation: bool = False
        extra: str = "forbid"
        json_encoders: Dict[Any, Any] = {
            np.ndarray: lambda v: v.tolist(),
            Enum: lambda v: v.value,
        }


class SeriesKey(NamedTuple):
    """The (category, sensor) pair which identifies one pollutant series."""

    category: int
    sensor_id: str

    @property
    def pollutant(self) -> str:
        return pollutant_name(self.category)

    def label(self) -> str:
        """The ``POLLUTANT@sensor`` label used in file names and graphs."""
        return f"{self.pollutant}@{self.sensor_id}"

    @classmethod
    def from_label(cls, label: str) -> "SeriesKey":
        """
        Parse a ``POLLUTANT@sensor`` label, the pollutant may also be given as the
        1-based category index.
        """
        if "@" not in label:
            raise ValueError(
                f"The series label {label} should look like POLLUTANT@sensor_id."
            )
        pollutant, sensor_id = label.split("@", 1)
        return cls(category=category_index(pollutant), sensor_id=sensor_id)


class StageProperties(BaseModel):
    """
    The runtime properties of a workflow stage which control if it can be used with multiprocessing.
    """

    process_parallel: bool = Field(
        ...,
        description="If the stage can safely be ran in parallel `True` or not `False`.",
    )

    class Config:
        allow_mutation: bool = False
        extra: str = "forbid"


def pollutant_name(category: int) -> str:
    """The name of the pollutant with the given 1-based category index."""
    if 1 <= category <= len(POLLUTANTS):
        return POLLUTANTS[category - 1]
    return f"C{category}"


def category_index(pollutant: str) -> int:
    """The 1-based category index of a pollutant name or ``C<m>``/``<m>`` label."""
    name = pollutant.strip().upper()
    if name in POLLUTANTS:
        return POLLUTANTS.index(name) + 1
    digits = name[1:] if name.startswith("C") else name
    if digits.isdigit() and int(digits) >= 1:
        return int(digits)
    raise ValueError(
        f"The pollutant {pollutant} is not one of {POLLUTANTS} or a category index."
    )
