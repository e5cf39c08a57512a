"""HRV indexes, synthetic Healthy/MI cohorts and a from-scratch classifier benchmark."""

__version__ = "0.1.0"
