"""camduty: energy-saving standby policies for parking-analytics cameras."""

__version__ = "0.1.0"
