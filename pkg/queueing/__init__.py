"""Buffer dynamics with retransmission, simulation and exact chain evaluation."""
