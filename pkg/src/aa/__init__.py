"""aa: self-hosted micrologging, session grouping and peer validation."""

__version__ = "0.1.0"
