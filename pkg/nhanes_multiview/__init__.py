"""Multiview representation learning and diabetes classification on NHANES releases."""

from __future__ import annotations

__version__ = "0.1.0"
__author__ = "NHANES multiview contributors"
