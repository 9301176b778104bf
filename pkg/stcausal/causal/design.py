"""
Parent structures of a target series and the lagged design rows the regressions are fit on.
"""
import logging
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from pydantic import Field, PositiveInt, validator

from stcausal.common_structures import (
    ResultsConfig,
    SeriesKey,
    category_index,
    pollutant_name,
)
from stcausal.datasets.series import DiffPanel, MeteoSeries
from stcausal.exceptions import NoUsableRowsError

logger = logging.getLogger(__name__)


class Slot(NamedTuple):
    """One regressor: the value of a series ``lag`` hours before the target time."""

    key: SeriesKey
    lag: int

    def label(self) -> str:
        return f"{self.key.label()}[t-{self.lag}]"


class Neighbor(ResultsConfig):
    sensor_id: str = Field(..., description="The neighbouring sensor.")
    category: PositiveInt = Field(
        ..., description="The category of the neighbour used as a parent."
    )

    @property
    def key(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)


class ParentSpec(ResultsConfig):
    """
    The parents of a target series: the lags of the local categories followed by the lags
    of one category at each spatiotemporal neighbour.
    """

    category: PositiveInt = Field(..., description="The target category.")
    sensor_id: str = Field(..., description="The target sensor.")
    local_categories: List[PositiveInt] = Field(
        ..., description="The categories at the target sensor whose lags are parents."
    )
    neighbors: List[Neighbor] = Field(
        default_factory=list, description="The neighbouring parents in selection order."
    )
    max_lag: PositiveInt = Field(3, description="The lag depth L in hours.")

    @validator("local_categories")
    def _check_local(cls, categories):
        if len(set(categories)) != len(categories):
            raise ValueError("The local categories should be distinct.")
        return sorted(categories)

    @validator("neighbors")
    def _check_neighbors(cls, neighbors, values):
        sensors = [n.sensor_id for n in neighbors]
        if len(set(sensors)) != len(sensors):
            raise ValueError(f"The neighbours {sensors} are not distinct.")
        if values.get("sensor_id") in sensors:
            raise ValueError("A sensor can not be its own neighbour.")
        return neighbors

    @property
    def target(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)

    @property
    def n_neighbors(self) -> int:
        return len(self.neighbors)

    def local_slots(self) -> List[Slot]:
        return [
            Slot(SeriesKey(category, self.sensor_id), lag)
            for category in self.local_categories
            for lag in range(1, self.max_lag + 1)
        ]

    def st_slots(self) -> List[Slot]:
        return [
            Slot(neighbor.key, lag)
            for neighbor in self.neighbors
            for lag in range(1, self.max_lag + 1)
        ]

    def slots(self) -> List[Slot]:
        return self.local_slots() + self.st_slots()

    def local_only(self) -> "ParentSpec":
        return self.with_neighbors([])

    def with_neighbors(self, neighbors: Iterable[Neighbor]) -> "ParentSpec":
        return ParentSpec(
            category=self.category,
            sensor_id=self.sensor_id,
            local_categories=self.local_categories,
            neighbors=list(neighbors),
            max_lag=self.max_lag,
        )

    def to_document(self) -> Dict:
        return {
            "local": [pollutant_name(c) for c in self.local_categories],
            "neighbors": [
                {"sensor": n.sensor_id, "category": n.category} for n in self.neighbors
            ],
            "L": self.max_lag,
        }

    @classmethod
    def from_document(cls, target: SeriesKey, document: Dict) -> "ParentSpec":
        return cls(
            category=target.category,
            sensor_id=target.sensor_id,
            local_categories=[category_index(c) for c in document["local"]],
            neighbors=[
                Neighbor(sensor_id=n["sensor"], category=n["category"])
                for n in document["neighbors"]
            ],
            max_lag=document["L"],
        )


class DesignRows:
    """
    The usable rows of a regression problem: the response p_t, one column per lagged slot
    and the environmental vector e_t, for each kept target time.

    Rows are shared between clusters whose parents differ, ``matrix`` picks the columns of
    a particular parent structure.
    """

    def __init__(
        self,
        timestamps: np.ndarray,
        response: np.ndarray,
        slots: Sequence[Slot],
        regressors: np.ndarray,
        environment: np.ndarray,
    ):
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.p = np.asarray(response, dtype=float)
        self.slots = list(slots)
        self.q = np.asarray(regressors, dtype=float).reshape(
            len(self.timestamps), len(self.slots)
        )
        self.e = np.asarray(environment, dtype=float)
        if self.e.ndim != 2 or self.e.shape[0] != len(self.timestamps):
            raise ValueError("The environmental vectors should be a T x D array.")
        self._columns = {slot: index for index, slot in enumerate(self.slots)}

    def __len__(self) -> int:
        return len(self.timestamps)

    def __contains__(self, slot: Slot) -> bool:
        return slot in self._columns

    @property
    def dimension(self) -> int:
        """The dimension D of the environmental vectors."""
        return self.e.shape[1]

    def matrix(self, parents: Union[ParentSpec, Sequence[Slot]]) -> np.ndarray:
        """The T x P regressor matrix of the given parents, in slot order."""
        slots = parents.slots() if isinstance(parents, ParentSpec) else list(parents)
        missing = [slot.label() for slot in slots if slot not in self._columns]
        if missing:
            raise KeyError(f"The design rows have no columns for {missing}.")
        return self.q[:, [self._columns[slot] for slot in slots]]

    def subset(self, mask: np.ndarray) -> "DesignRows":
        return DesignRows(
            timestamps=self.timestamps[mask],
            response=self.p[mask],
            slots=self.slots,
            regressors=self.q[mask],
            environment=self.e[mask],
        )


def _union_slots(parents: Sequence[ParentSpec], extra: Iterable[Slot]) -> List[Slot]:
    slots: List[Slot] = []
    seen = set()
    for slot in [s for spec in parents for s in spec.slots()] + list(extra):
        if slot not in seen:
            seen.add(slot)
            slots.append(slot)
    return slots


def build_design_rows(
    parents: Union[ParentSpec, Sequence[ParentSpec]],
    diffs: DiffPanel,
    windows: Iterable[int],
    meteo: Optional[MeteoSeries] = None,
    extra_slots: Iterable[Slot] = (),
    require_response: bool = True,
) -> DesignRows:
    """
    Assemble one row per window timestamp from the differenced series.

    The regressors are the union of the slots of every given parent structure followed by
    ``extra_slots``. A row is dropped when the response, any lag or the environmental
    vector is missing.

    Parameters:
        parents: The parent structure, or the per-cluster structures sharing these rows.
        diffs: The differenced series.
        windows: The epoch hours to predict.
        meteo: The gridded meteorology, rows have an empty environmental vector without it.
        extra_slots: Additional columns, used to score candidate parents.
        require_response: Drop rows where the target difference itself is missing.

    Raises:
        NoUsableRowsError: If no row survives.
    """
    specs = [parents] if isinstance(parents, ParentSpec) else list(parents)
    target = specs[0].target
    slots = _union_slots(specs, extra_slots)
    hours = np.unique(np.asarray(list(windows), dtype=np.int64))

    response = diffs.lookup(target, hours)
    regressors = np.empty((hours.size, len(slots)))
    for column, slot in enumerate(slots):
        regressors[:, column] = diffs.lookup(slot.key, hours - slot.lag)
    if meteo is not None:
        environment = meteo.at(hours)
    else:
        environment = np.zeros((hours.size, 0))

    usable = ~np.isnan(regressors).any(axis=1) & ~np.isnan(environment).any(axis=1)
    if require_response:
        usable &= ~np.isnan(response)
    if not usable.any():
        raise NoUsableRowsError(
            f"none of the {hours.size} windows of {target.label()} has every lag "
            f"of {len(slots)} regressors."
        )
    if not usable.all():
        logger.debug(
            f"{target.label()}: dropped {int((~usable).sum())} of {hours.size} rows "
            "with missing values."
        )
    return DesignRows(
        timestamps=hours[usable],
        response=response[usable],
        slots=slots,
        regressors=regressors[usable],
        environment=environment[usable],
    )
