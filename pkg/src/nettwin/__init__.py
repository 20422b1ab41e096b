"""Digital-twin pipeline for short-term network anomaly forecasting."""

__version__ = "0.1.0"
