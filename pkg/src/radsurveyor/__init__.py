"""radsurveyor: multi-robot radiation survey planning and localization toolkit."""

__version__ = "0.1.0"
