"""Functional combinatorial CLT: permutation-sum processes, Gaussian surrogates and verification."""

from permclt.core.config import settings

__version__ = settings.APP_VERSION
