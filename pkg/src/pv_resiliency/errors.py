class ResiliencyError(Exception):
    """Base class for every error raised by pv_resiliency."""


class ConfigurationError(ResiliencyError):
    pass


class WeatherError(ResiliencyError):
    pass


class MissingColumn(WeatherError):
    def __init__(self, column, available=None):
        self.column = column
        self.available = list(available) if available is not None else []
        super().__init__(f"Missing column '{column}' (available: {', '.join(self.available) or 'none'})")


class MalformedRow(WeatherError):
    def __init__(self, row_index, reason):
        self.row_index = row_index
        self.reason = reason
        super().__init__(f"Malformed row {row_index}: {reason}")


class EmptyFile(WeatherError):
    pass


class InsufficientCoverage(WeatherError):
    pass


class HorizonOutOfRange(WeatherError):
    pass


class SliceTooShort(ResiliencyError):
    pass


class EmptyTrace(ResiliencyError):
    pass


class NoSecondaryDemand(ResiliencyError):
    pass


class InvalidProblem(ResiliencyError):
    pass
