"""Generalized Gaussian contrast functions for super-Gaussian source models.

The contrast is ``phi(r) = r**beta`` (additive normalization constant
dropped) with ``0 < beta < 2``. ``beta = 1`` is the Laplace model.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

EPS = 1e-10


@dataclass(frozen=True)
class ContrastModel:
    """Circular generalized Gaussian model with shape parameter ``beta``.

    Args:
        beta: Shape parameter in the open interval ``(0, 2)``. Default: ``1.0``.
    """

    beta: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.beta < 2.0):
            raise DomainError(f"beta must lie in (0, 2) for a super-Gaussian model, got {self.beta}")

    def phi(self, r):
        """Contrast ``r**beta`` for ``r >= 0``."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainError("phi is defined for r >= 0")
        return r**self.beta

    def phi_prime(self, r):
        """Derivative ``beta * r**(beta - 1)``.

        Raises:
            DomainError: ``r <= 0`` while ``beta < 1`` (the derivative diverges),
                or ``r < 0`` for any ``beta``.
        """
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or (self.beta < 1 and np.any(r <= 0)):
            raise DomainError("phi_prime requires r > 0")
        return self.beta * r ** (self.beta - 1.0)

    def weight(self, r, eps=EPS):
        """MM weight ``phi'(r + eps) / (r + eps) = beta * (r + eps)**(beta - 2)``."""
        if eps <= 0:
            raise DomainError("eps must be positive")
        return self.beta * (np.asarray(r, dtype=float) + eps) ** (self.beta - 2.0)

    def majorizer_rhs(self, r, alpha):
        """Quadratic upper bound of ``phi(r)`` touching it at ``alpha = r``.

        Returns ``phi'(alpha) / (2 alpha) * r**2 + phi(alpha) - alpha * phi'(alpha) / 2``.
        """
        r = np.asarray(r, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        b = self.beta
        # phi'(a)/(2a) = (b/2) a^(b-2), phi(a) - a phi'(a)/2 = (1 - b/2) a^b
        return 0.5 * b * alpha ** (b - 2.0) * r**2 + (1.0 - 0.5 * b) * alpha**b


LAPLACE = ContrastModel(1.0)
