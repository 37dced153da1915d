"""Whole-body operational space control for point-foot series-elastic bipeds."""

__version__ = "0.1.0"
