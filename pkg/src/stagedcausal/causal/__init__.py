"""Treatment-effect estimation on staged trees and classical baselines."""
