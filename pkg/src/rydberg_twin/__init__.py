"""Digital twin of a Rydberg-atom electrometer for extremely low frequencies.

Simulates Stark-shifted EIT in a screened vapor cell, the photodetector
trace under auxiliary modulation, and a software lock-in that recovers the
signal field.
"""

from .errors import ConfigurationError, FitError, InvalidArgumentError, PreconditionError, RydbergTwinError
from .timeseries import TimeSeries

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "FitError", "InvalidArgumentError", "PreconditionError", "RydbergTwinError",
           "TimeSeries", "__version__"]
