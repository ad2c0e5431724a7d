"""Configuration, run-config schema and logging."""
