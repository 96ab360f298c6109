"""Staging learners and BIC scoring."""
