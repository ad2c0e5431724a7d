"""Zero-forcing gains and the K-user to single-user decoupling."""
