"""Rate / target-error-rate / power link abstraction."""
