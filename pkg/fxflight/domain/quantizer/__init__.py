"""Uniform fixed-point conversion, integer inference and fractional-bit calibration."""
