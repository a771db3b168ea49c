"""Rigid-body quadrotor model and motor mixing."""
