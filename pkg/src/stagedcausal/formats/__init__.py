"""File formats: CSV data, model JSON, DOT, result tables."""
