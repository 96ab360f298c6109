"""Random generator models and estimator comparison."""
