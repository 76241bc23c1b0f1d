"""Exact rational parameters for the local search.

Every threshold the solver compares against is a :class:`fractions.Fraction`.
The two irrational constants (the ratio term ``R`` and ``delta``, both built
on ``sqrt(3 - 2*eps)``) are replaced by rational surrogates that share one
lower bracket of the square root, so both are rounded down by at most
``2**-precision_bits`` and ``R - delta == (1 + eps)/2 + zeta`` holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt

DEFAULT_PRECISION_BITS = 40


def sqrt_bounds(x: Fraction, precision_bits: int = DEFAULT_PRECISION_BITS) -> tuple[Fraction, Fraction]:
    """Bracket ``sqrt(x)`` between two dyadic rationals.

    Returns ``(lower, upper)`` with ``lower**2 <= x <= upper**2`` and
    ``upper - lower <= 2**-precision_bits``.  Exact rational roots give
    ``lower == upper``.
    """
    x = Fraction(x)
    if x < 0:
        raise ValueError(f"sqrt_bounds: negative argument {x}")
    if precision_bits < 1:
        raise ValueError("precision_bits must be >= 1")
    p, q = x.numerator, x.denominator
    rp, rq = isqrt(p), isqrt(q)
    if rp * rp == p and rq * rq == q:
        root = Fraction(rp, rq)
        return root, root
    scale = 1 << precision_bits
    # floor(sqrt(x) * scale) without leaving the integers
    a = isqrt(p * scale * scale // q)
    return Fraction(a, scale), Fraction(a + 1, scale)


@dataclass(frozen=True)
class Params:
    """Algorithm constants derived from ``(epsilon, zeta)``.

    Attributes:
        epsilon: small-job size.
        zeta: slack added to the approximation ratio.
        R: rational lower surrogate of ``(eps + sqrt(3 - 2 eps)) / 2 + zeta``.
        delta: rational lower surrogate of ``(sqrt(3 - 2 eps) - 1) / 2``.
        mu1: ``min(1, zeta) / 4``.
        mu2: ``min(delta, zeta) / 4``.
        eta: ``(delta (1 - mu2) - 2 mu2) mu1``; base of the signature potential.
    """

    epsilon: Fraction
    zeta: Fraction
    R: Fraction
    delta: Fraction
    mu1: Fraction
    mu2: Fraction
    eta: Fraction

    @property
    def ratio(self) -> Fraction:
        """Approximation guarantee ``1 + R`` of the local-search branch."""
        return 1 + self.R


def make_params(epsilon: Fraction, zeta: Fraction, precision_bits: int = DEFAULT_PRECISION_BITS) -> Params:
    epsilon = Fraction(epsilon)
    zeta = Fraction(zeta)
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if zeta <= 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    # rounding error must stay far below zeta so R keeps most of its slack
    bits = precision_bits
    while Fraction(1, 1 << bits) > zeta / 4:
        bits += 1
    root, _ = sqrt_bounds(3 - 2 * epsilon, bits)
    R = (epsilon + root) / 2 + zeta
    delta = (root - 1) / 2
    mu1 = min(Fraction(1), zeta) / 4
    mu2 = min(delta, zeta) / 4
    eta = (delta * (1 - mu2) - 2 * mu2) * mu1
    return Params(epsilon=epsilon, zeta=zeta, R=R, delta=delta, mu1=mu1, mu2=mu2, eta=eta)


def positivity_margin(p: Params, tau: Fraction) -> Fraction:
    """Value of the dual-certificate positivity expression at guess ``tau``.

    The local search's proportional-growth guarantee needs this to be
    strictly positive for every ``tau`` in ``[1, 2)``.
    """
    tau = Fraction(tau)
    eps, R, d, m1, m2 = p.epsilon, p.R, p.delta, p.mu1, p.mu2
    first = 2 * R - d - eps - 1 - tau * m1 * m2 - (1 + 2 * tau + R) * m1
    return first * (d * (1 - m2) - 2 * m2) - (1 - m2) * (1 - R) - m2 * tau


def verify_params(p: Params) -> bool:
    """Check ``eta > 0`` and the positivity expression at ``tau`` in {1, 2}.

    The expression is affine in ``tau``, so the two endpoints cover ``[1, 2]``.
    """
    if p.eta <= 0:
        return False
    return positivity_margin(p, Fraction(1)) > 0 and positivity_margin(p, Fraction(2)) > 0
