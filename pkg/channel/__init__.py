"""Channel estimates, per-antenna / effective gains and the empirical F_eta."""
