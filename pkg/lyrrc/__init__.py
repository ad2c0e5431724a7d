"""Closed-form large-array reliability and rate control (rule of double)."""
