"""roadslice: road-event detection from passive RAN monitoring and
emergency network slice orchestration."""

__version__ = "0.1.0"
