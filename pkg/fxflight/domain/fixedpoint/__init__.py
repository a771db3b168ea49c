"""Fixed-point arithmetic substrate for the integer inference path."""
