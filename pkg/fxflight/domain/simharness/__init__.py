"""Closed-loop episodes, built-in scenarios and tracking metrics."""
