"""Directed graybox fuzzing for gate-level netlists."""
