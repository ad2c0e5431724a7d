"""Constrained MDP: value iteration, Lagrange-multiplier bisection, eps sweep."""
