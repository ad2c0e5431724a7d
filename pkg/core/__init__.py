"""Errors, seed splitting, reporting and the command line."""
