"""Deepsets policy: float reference path and action transform."""
