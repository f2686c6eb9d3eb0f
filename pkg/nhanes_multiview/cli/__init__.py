"""Module containing CLI infrastructure for nhanes_multiview."""
