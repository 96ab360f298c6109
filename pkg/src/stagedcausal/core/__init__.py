# Core utilities for stagedcausal
