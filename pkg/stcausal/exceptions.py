import traceback
from typing import Optional


class StCausalException(Exception):
    """
    Base stcausal exception, should always use the appropriate subclass of this exception.
    """

    error_type = "base_error"
    header = "stcausal Base Error"
    # the process exit code the command line interface reports for this error
    exit_code = 2

    def __init__(self, message: str):

        super().__init__(message)

        self.raw_message = message
        self.traceback = traceback.format_exc()

    @property
    def error_message(self) -> str:
        return f"{self.header}: {self.raw_message}"


class UnsupportedFiletypeError(StCausalException):
    """
    The file type requested is not supported.
    """

    error_type = "file_type_error"
    header = "stcausal File Error"


class ConfigurationError(StCausalException):
    """
    The pipeline configuration is invalid or an artifact it refers to is missing.
    """

    error_type = "configuration_error"
    header = "stcausal Configuration Error"


class MalformedRowError(StCausalException):
    """
    A row of an input table could not be parsed.
    """

    error_type = "malformed_row_error"
    header = "stcausal Malformed Row Error"

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class UnknownSensorError(StCausalException):
    """
    A reading refers to a sensor which is not in the sensor metadata table.
    """

    error_type = "unknown_sensor_error"
    header = "stcausal Unknown Sensor Error"


class DuplicateTimestampError(StCausalException):
    """
    The same sensor reported twice for one timestamp.
    """

    error_type = "duplicate_timestamp_error"
    header = "stcausal Duplicate Timestamp Error"


class EmptyRegionError(StCausalException):
    """
    No meteorology station falls inside the grid region at any timestamp.
    """

    error_type = "empty_region_error"
    header = "stcausal Empty Region Error"


class DegenerateSeriesError(StCausalException):
    """
    The series does not carry enough information to be transformed.
    """

    error_type = "degenerate_series_error"
    header = "stcausal Degenerate Series Error"


class InsufficientDataError(StCausalException):
    """
    There are not enough days of data to make the requested split.
    """

    error_type = "insufficient_data_error"
    header = "stcausal Insufficient Data Error"


class TooFewSamplesError(StCausalException):
    """
    A statistical test was requested on too few samples.
    """

    error_type = "too_few_samples_error"
    header = "stcausal Too Few Samples Error"


class EmptyDatabaseError(StCausalException):
    """
    The symbolic pollution database has no days to mine.
    """

    error_type = "empty_database_error"
    header = "stcausal Empty Database Error"


class InstanceTooLargeError(StCausalException):
    """
    The database is too large for the exhaustive pattern enumeration.
    """

    error_type = "instance_too_large_error"
    header = "stcausal Instance Too Large Error"


class EmptyTimestampListError(StCausalException):
    """
    Match statistics are undefined when either timestamp list is empty.
    """

    error_type = "empty_timestamp_list_error"
    header = "stcausal Empty Timestamp List Error"


class NoPatternsError(StCausalException):
    """
    The target series has no frequent evolving pattern occurrences.
    """

    error_type = "no_patterns_error"
    header = "stcausal No Patterns Error"


class NoUsableRowsError(StCausalException):
    """
    No design row survived the missing data filter, or too few rows remain to fit.
    """

    error_type = "no_usable_rows_error"
    header = "stcausal No Usable Rows Error"


class MissingLagsError(StCausalException):
    """
    A prediction was requested for a row with missing lagged parent values.
    """

    error_type = "missing_lags_error"
    header = "stcausal Missing Lags Error"


class MissingModelError(StCausalException):
    """
    No trained causal model exists for a node which must be expanded.
    """

    error_type = "missing_model_error"
    header = "stcausal Missing Model Error"


class SingularSystemError(StCausalException):
    """
    The regularized normal equations could not be solved.
    """

    error_type = "singular_system_error"
    header = "stcausal Singular System Error"
    exit_code = 3


class DegenerateClusterError(StCausalException):
    """
    A latent cluster collapsed and could not be re-seeded.
    """

    error_type = "degenerate_cluster_error"
    header = "stcausal Degenerate Cluster Error"
    exit_code = 3


class UnstableSystemError(StCausalException):
    """
    A synthetic system could not be rescaled to a stationary one.
    """

    error_type = "unstable_system_error"
    header = "stcausal Unstable System Error"
    exit_code = 3


class NonConvergenceError(StCausalException):
    """
    An iterative solver did not converge.
    """

    error_type = "non_convergence_error"
    header = "stcausal Non Convergence Error"
    exit_code = 3


class NumericalUnderflowWarning(UserWarning):
    """
    Every cluster density of a row underflowed, the row was given a uniform posterior.
    """


class EmptyClusterWarning(UserWarning):
    """
    A cluster had too few tagged rows to rebuild its structure, the previous structure was kept.
    """
