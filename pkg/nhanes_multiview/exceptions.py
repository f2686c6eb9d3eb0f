"""Exceptions raised throughout nhanes_multiview.

Every error derives from :class:`NhanesMultiviewError` and from the closest builtin, so
callers may catch either the package-specific or the generic class.
"""

from __future__ import annotations


class NhanesMultiviewError(Exception):
    """Base class for all package errors."""


# XPORT parsing


class MalformedHeader(NhanesMultiviewError, ValueError):
    """An XPORT header record did not match its sentinel."""


class TruncatedFile(NhanesMultiviewError, EOFError):
    """An XPORT stream ended mid-record or mid-payload."""


class BadNamestrCount(NhanesMultiviewError, ValueError):
    """Declared variable count disagrees with the NAMESTR region."""


# Ingest


class UnsupportedCycle(NhanesMultiviewError, ValueError):
    """Survey cycle outside the supported 1999-2014 range."""


class NetworkError(NhanesMultiviewError, OSError):
    """Transport failure after all retries."""


class NotFound(NetworkError):
    """Remote file does not exist (HTTP 404)."""


class EmptyBody(NhanesMultiviewError, OSError):
    """Remote file was fetched but contained no bytes."""


class CacheWriteError(NhanesMultiviewError, OSError):
    """Cache entry could not be written."""


# Harmonization


class RuleConflict(NhanesMultiviewError, ValueError):
    """Two harmonization rules share a target name."""


class RecodeDomainError(NhanesMultiviewError, ValueError):
    """Strict recoding met a value without a mapping."""


class DuplicateKey(NhanesMultiviewError, KeyError):
    """Respondent key repeated within a table."""


class UnknownColumn(NhanesMultiviewError, KeyError):
    """Requested column absent from a table."""


class NonPositiveBinWidth(NhanesMultiviewError, ValueError):
    """Histogram bin width must be strictly positive."""


# Numerics


class TooFewRows(NhanesMultiviewError, ValueError):
    """Operation needs more observations than supplied."""


class RowMismatch(NhanesMultiviewError, ValueError):
    """Paired matrices disagree on row count."""


class DimensionMismatch(NhanesMultiviewError, ValueError):
    """Matrix has the wrong number of columns for a fitted model."""


class NotSymmetric(NhanesMultiviewError, ValueError):
    """Matrix is not symmetric within tolerance."""


class NoConvergence(NhanesMultiviewError, ArithmeticError):
    """Iterative method hit its iteration cap."""


class NotPositiveDefinite(NhanesMultiviewError, ArithmeticError):
    """Cholesky factorization met a nonpositive pivot."""


class BadK(NhanesMultiviewError, ValueError):
    """Requested component count outside the valid range."""


# Classification


class SingleClass(NhanesMultiviewError, ValueError):
    """Labels contain only one class."""


class TooFewPerClass(NhanesMultiviewError, ValueError):
    """A class has fewer members than folds."""


class LengthMismatch(NhanesMultiviewError, ValueError):
    """Paired label vectors differ in length."""


class NotLinearKernel(NhanesMultiviewError, ValueError):
    """Operation defined only for linear-kernel models."""


# Experiment


class MissingView(NhanesMultiviewError, KeyError):
    """A harmonized view required by a model variant is absent."""


class UnfittedCca(NhanesMultiviewError, ValueError):
    """A CCA variant was assembled without a fitted model."""


class ConfigError(NhanesMultiviewError, ValueError):
    """Configuration failed validation."""
