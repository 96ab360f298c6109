"""Event trees, stagings, fitting and exact inference."""
