"""Ambient hyperbolic geometry: curvature bookkeeping and generalized trig.

The ambient space is the simply connected space form of constant sectional
curvature kappa < 0.  Writing a = sqrt(-kappa), the generalized sine

    s(x) = sinh(a x) / a

solves s'' = a^2 s with s(0) = 0, s'(0) = 1, and everything else is built
from it: c = s', ta = s/c, co = c/s.  A geodesic sphere of radius x has
principal curvatures co(x) in every direction, so co is the quantity the
curvature modules lean on; it decreases strictly from +inf to its infimum a
as x runs over (0, inf).

All evaluators broadcast over numpy arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AmbientCurvature:
    """Sectional curvature of the ambient space form.  Must be negative."""

    kappa: float

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa >= 0.0:
            raise DomainError(
                f"ambient curvature must be finite and negative, got {self.kappa}"
            )

    @property
    def a(self) -> float:
        # Derived, never stored: a = sqrt(|kappa|).
        return float(np.sqrt(-self.kappa))


def generalized_sine(x, ac: AmbientCurvature):
    """Return s(x) = sinh(a x)/a."""
    a = ac.a
    return np.sinh(a * np.asarray(x, dtype=float)) / a


def generalized_cosine(x, ac: AmbientCurvature):
    """Return c(x) = cosh(a x) = s'(x)."""
    return np.cosh(ac.a * np.asarray(x, dtype=float))


def generalized_tangent(x, ac: AmbientCurvature):
    """Return ta(x) = s(x)/c(x) = tanh(a x)/a."""
    a = ac.a
    return np.tanh(a * np.asarray(x, dtype=float)) / a


def generalized_cotangent(x, ac: AmbientCurvature):
    """Return co(x) = c(x)/s(x) = a/tanh(a x); requires x > 0 elementwise."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise SingularityError("co(x) requires x > 0; geodesic radius hit zero")
    a = ac.a
    return a / np.tanh(a * x)


def kappa_trig(x, ac: AmbientCurvature, with_co: bool = True):
    """Return the tuple (s, c, ta, co) of generalized trig values at x.

    x must be nonnegative; co has a pole at x = 0, so it is only computed
    when with_co is true (the fourth slot is None otherwise).
    """
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)):
        raise DomainError("kappa_trig requires finite x")
    if np.any(x < 0.0):
        raise DomainError("kappa_trig requires x >= 0 (geodesic distance)")
    s = generalized_sine(x, ac)
    c = generalized_cosine(x, ac)
    ta = generalized_tangent(x, ac)
    if with_co:
        co = generalized_cotangent(x, ac)
    else:
        co = None
    return s, c, ta, co
