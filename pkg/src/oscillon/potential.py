"""Polynomial potentials, exact growth certificates and rate constants.

A potential is ``V(y) = sum_j c_j y**j`` for ``j = 1..d`` with rational
coefficients.  The nonlinearity is ``phi = V'``.  Growth certificates
``(q, a0, a1, a2, a3)`` are checked exactly with Sturm sequences, and
:func:`derive_constants` turns a verified certificate into every constant
needed by the dissipative estimate.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Optional

import numpy as np

from . import polynomial as P
from .errors import (
    DegreeMismatch,
    InvalidPotential,
    OddQ,
    UncertifiedInput,
    UnknownName,
)

__all__ = [
    "Potential",
    "GrowthCertificate",
    "GrowthVerdict",
    "RateConstants",
    "evaluate",
    "verify_growth",
    "derive_constants",
    "builtin",
    "search_certificate",
    "star_potential",
    "BUILTIN_NAMES",
]


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        # decimal reading: 0.4 means 2/5, not the nearest binary double
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class Potential:
    """``V(y) = sum_{j=1..d} coefficients[j-1] * y**j``.

    The constant term is absent by construction, and the linear term must be
    zero so that ``phi(0) = 0``.  The zero polynomial is allowed and marks the
    linear wave equation.
    """

    coefficients: tuple
    name: str = "custom"

    def __post_init__(self):
        coeffs = list(_frac(c) for c in self.coefficients)
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(coeffs))
        if not coeffs:
            return
        if coeffs[0] != 0:
            raise InvalidPotential("phi(0) = 0 requires a vanishing y**1 coefficient")
        d = len(coeffs)
        if d < 2 or d % 2 or coeffs[-1] <= 0:
            raise InvalidPotential(
                f"need an even degree >= 2 with positive leading coefficient, got degree {d}"
            )

    @property
    def degree(self) -> int:
        return len(self.coefficients)

    @property
    def is_linear(self) -> bool:
        """True for V = 0 (the linear damped wave equation)."""
        return not self.coefficients

    @property
    def q(self) -> int:
        """Growth exponent used by the phase-space energy (2 when linear)."""
        return max(self.degree, 2)

    @functools.cached_property
    def V_poly(self) -> P.Poly:
        return P.trim((Fraction(0),) + self.coefficients)

    @functools.cached_property
    def phi_poly(self) -> P.Poly:
        return P.derivative(self.V_poly)

    @functools.cached_property
    def phi_prime_poly(self) -> P.Poly:
        return P.derivative(self.phi_poly)

    @functools.cached_property
    def phi_second_poly(self) -> P.Poly:
        return P.derivative(self.phi_prime_poly)

    @functools.cached_property
    def _float_coeffs(self) -> dict:
        return {
            "V": np.array([float(c) for c in self.V_poly] or [0.0]),
            "phi": np.array([float(c) for c in self.phi_poly] or [0.0]),
            "phi_prime": np.array([float(c) for c in self.phi_prime_poly] or [0.0]),
            "phi_second": np.array([float(c) for c in self.phi_second_poly] or [0.0]),
        }

    def V(self, y):
        return _horner(self._float_coeffs["V"], y)

    def phi(self, y):
        return _horner(self._float_coeffs["phi"], y)

    def phi_prime(self, y):
        return _horner(self._float_coeffs["phi_prime"], y)

    def phi_second(self, y):
        return _horner(self._float_coeffs["phi_second"], y)

    def to_text(self) -> str:
        """Flat monomial list ``c1, c2, ..., cd`` as used in run configs."""
        return ", ".join(str(c) for c in self.coefficients)


def _horner(coeffs: np.ndarray, y):
    y = np.asarray(y, dtype=float)
    acc = np.full_like(y, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc = acc * y + c
    return acc if acc.ndim else float(acc)


def evaluate(pot: Potential, which: str, y):
    """Evaluate V, phi, phi_prime or phi_second at ``y``.

    Fraction/int inputs give exact results; floats and arrays go through
    float Horner.
    """
    polys = {
        "V": pot.V_poly,
        "phi": pot.phi_poly,
        "phi_prime": pot.phi_prime_poly,
        "phi_second": pot.phi_second_poly,
    }
    if which not in polys:
        raise UnknownName(f"unknown function {which!r}")
    if isinstance(y, (int, Fraction)):
        return P.evaluate(polys[which], Fraction(y))
    return getattr(pot, which)(y)


@dataclass(frozen=True)
class GrowthCertificate:
    """Candidate constants for
    ``a0 |y|^(q-2) - a1 <= phi'(y) <= a2 |y|^(q-2) + a3`` and
    ``|phi''(y)| <= phisecond_c (1 + |y|^theta)``."""

    q: int
    a0: Fraction
    a1: Fraction
    a2: Fraction
    a3: Fraction
    phisecond_c: Optional[Fraction] = None

    def __post_init__(self):
        for name in ("a0", "a1", "a2", "a3"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        if self.phisecond_c is not None:
            object.__setattr__(self, "phisecond_c", _frac(self.phisecond_c))
        if int(self.q) != self.q or self.q < 2:
            raise InvalidPotential("q must be an integer >= 2")
        if self.a0 <= 0 or self.a2 <= 0 or self.a1 < 0 or self.a3 < 0:
            raise InvalidPotential("need a0, a2 > 0 and a1, a3 >= 0")

    @property
    def theta(self) -> int:
        return max(self.q - 3, 0)

    def astuple(self) -> tuple:
        return (self.q, self.a0, self.a1, self.a2, self.a3)


@dataclass(frozen=True)
class GrowthVerdict:
    holds: bool
    witness: Optional[float] = None
    clause: Optional[str] = None  # "lower", "upper", "phisecond", "sublinear"

    def __bool__(self):
        return self.holds


def _phisecond_default(pot: Potential) -> Fraction:
    total = sum((abs(c) for c in pot.phi_second_poly), Fraction(0))
    return total if total > 0 else Fraction(1)


def verify_growth(pot: Potential, cert: GrowthCertificate) -> GrowthVerdict:
    """Exact check of the two-sided growth bound on phi' and of the phi''
    bound, for all real y.

    With q even every clause is a polynomial nonnegativity statement, decided
    by Sturm counting on the odd-multiplicity part of the difference
    polynomial.  ``|y|**theta`` (theta odd) is handled on each half-line.
    """
    q = cert.q
    if q % 2:
        raise OddQ(f"q = {q} is odd; exact checking needs even q")
    if P.degree(pot.phi_prime_poly) != q - 2:
        raise DegreeMismatch(
            f"deg phi' = {P.degree(pot.phi_prime_poly)} but q - 2 = {q - 2}"
        )
    if q == 2 and not cert.a0 > cert.a1:
        return GrowthVerdict(False, 0.0, "sublinear")

    dphi = pot.phi_prime_poly
    ypow = P.monomial(1, q - 2)
    lower = P.add(P.sub(dphi, P.scale(ypow, cert.a0)), (cert.a1,))
    ok, w = P.is_nonnegative(lower)
    if not ok:
        return GrowthVerdict(False, w, "lower")
    upper = P.sub(P.add(P.scale(ypow, cert.a2), (cert.a3,)), dphi)
    ok, w = P.is_nonnegative(upper)
    if not ok:
        return GrowthVerdict(False, w, "upper")

    c = cert.phisecond_c if cert.phisecond_c is not None else _phisecond_default(pot)
    theta = cert.theta
    d2 = pot.phi_second_poly
    # y >= 0: |y|^theta = y^theta;  y <= 0: |y|^theta = (-y)^theta
    right = P.scale(P.add((Fraction(1),), P.monomial(1, theta)), c)
    left = P.compose_neg(right) if theta % 2 else right
    for envelope, lo, hi in ((right, 0, None), (left, None, 0)):
        for signed in (d2, P.scale(d2, -1)):
            ok, w = P.is_nonnegative(P.sub(envelope, signed), lo, hi)
            if not ok:
                return GrowthVerdict(False, w, "phisecond")
    return GrowthVerdict(True)


@dataclass(frozen=True)
class RateConstants:
    """Constants of the dissipative estimate.  Exact values are Fractions;
    those coming out of a 1-D maximisation are floats."""

    H: Real
    q: int
    b0: Real
    b1: Real
    b2: Real
    c0: Real
    c1: Real
    c2: Real
    nu: Real
    mu: Real
    sigma: Real
    K0: Real
    K1: Real
    R_A: Real

    def horizon(self, R: float) -> float:
        """Time after which data of energy R enters the absorber."""
        return max(0.0, math.log(float(self.K0) * R / (1 + float(self.K1))) / float(self.mu))

    def as_dict(self) -> dict:
        return {k: (float(v) if not isinstance(v, int) else v) for k, v in self.__dict__.items()}


def _max_over_line(p: P.Poly) -> Fraction | float:
    m = P.maximize(p)
    return Fraction(0) if m <= 0 else m


def derive_constants(pot: Potential, cert: GrowthCertificate, H) -> RateConstants:
    """All constants of the dissipative estimate for a verified certificate.

    ``b0 = a0/(2q(q-1))`` and ``c1 = min(q b0, 1)/2``.  ``b1`` is the
    smallest constant making both
    ``V(y) >= b0(|y|^q + y^2) - b1`` and
    ``2V(y) + 2 b1 >= c1((2/q)|y|^q + y^2)`` hold pointwise for the actual
    potential, which makes ``c1 E - 2 b1 <= Lambda_1`` rigorous.  When
    ``a1 > 0`` it is at least the closed form
    ``max_y [(a1/2 + b0) y^2 - b0 |y|^q]``.
    ``c0 = max_y [(a1/2) y^2 - (a0/q)|y|^q]``.
    ``b2 = a2/(q(q-1)) + a3/2`` and
    ``c2 = max(1 + nu, q b2, 2 b2 + nu (H + 1))``.
    """
    if H <= 0:
        raise ValueError("H must be positive")
    verdict = verify_growth(pot, cert)
    if not verdict:
        raise UncertifiedInput(
            f"certificate {cert.astuple()} fails ({verdict.clause}) at y = {verdict.witness}"
        )
    q = cert.q
    Hf = _frac(H)
    b0 = cert.a0 / (2 * q * (q - 1))
    c1 = min(q * b0, Fraction(1)) / 2
    two_mu = min(Fraction(1), Hf / 4, c1 / (4 * Hf + 4))
    mu = two_mu / 2
    nu = two_mu

    yq = P.monomial(1, q)
    y2 = P.monomial(1, 2)
    V = pot.V_poly
    b1_storage = P.sub(P.scale(P.add(yq, y2), b0), V)
    b1_lambda = P.sub(P.add(P.scale(yq, c1 / q), P.scale(y2, c1 / 2)), V)
    b1 = max(_max_over_line(b1_storage), _max_over_line(b1_lambda))
    if cert.a1 > 0:
        # closed form from integrating the growth bound twice
        closed = P.sub(P.scale(y2, cert.a1 / 2 + b0), P.scale(yq, b0))
        b1 = max(b1, _max_over_line(closed))
    if cert.a1 == 0:
        c0 = Fraction(0)
    else:
        c0 = _max_over_line(P.sub(P.scale(y2, cert.a1 / 2), P.scale(yq, cert.a0 / q)))

    b2 = cert.a2 / (q * (q - 1)) + cert.a3 / 2
    c2 = max(1 + nu, q * b2, 2 * b2 + nu * (Hf + 1))
    K0 = c2 / c1
    K1 = 4 * (c0 + b1) / c1
    if isinstance(K1, Fraction) and K1 == 0:
        K1 = Fraction(0)
    return RateConstants(
        H=Hf, q=q, b0=b0, b1=b1, b2=b2, c0=c0, c1=c1, c2=c2,
        nu=nu, mu=mu, sigma=Fraction(q, 2) - 1, K0=K0, K1=K1, R_A=1 + 2 * K1,
    )


# --- builtins ---------------------------------------------------------------

BUILTIN_NAMES = ("Vplus", "Vminus", "Valpha_plus", "Valpha_minus", "Vzero")

# The literal tuple printed for phi_+ fails the upper bound near y^2 = 3/2;
# 3y^2 < 1 + 4y^4 gives phi_+' < 2 + 9y^4, so a2 = 9 is the valid choice.
QUOTED_TUPLE_VPLUS = (6, 5, 0, 6, 2)
QUOTED_TUPLE_VMINUS = (6, 1, 0, 5, 1)
_CERT_VPLUS = (6, 5, 0, 9, 2)


def _sextic(sign: int, alpha) -> Potential:
    a = _frac(alpha)
    return (Fraction(0), Fraction(1, 2), Fraction(0), Fraction(sign, 4), Fraction(0), a / 6)


def builtin(name: str, alpha=None) -> tuple[Potential, Optional[GrowthCertificate]]:
    """Named potentials from the physics literature with a certificate.

    ``Vzero`` is the linear case and carries no certificate.
    """
    if name == "Vzero":
        return Potential((), name="Vzero"), None
    if name == "Vplus":
        pot = Potential(_sextic(+1, 1), name="Vplus")
        return pot, _with_phisecond(pot, GrowthCertificate(*_CERT_VPLUS))
    if name == "Vminus":
        pot = Potential(_sextic(-1, 1), name="Vminus")
        return pot, _with_phisecond(pot, GrowthCertificate(*QUOTED_TUPLE_VMINUS))
    if name in ("Valpha_plus", "Valpha_minus"):
        if alpha is None:
            raise InvalidPotential(f"{name} needs alpha")
        a = _frac(alpha)
        if a <= 0:
            raise InvalidPotential("alpha must be positive")
        if not Fraction(1, 4) < a < Fraction(9, 20):
            warnings.warn(f"alpha = {alpha} outside (1/4, 9/20)", stacklevel=2)
        sign = 1 if name == "Valpha_plus" else -1
        pot = Potential(_sextic(sign, a), name=f"{name}({alpha})")
        return pot, search_certificate(pot)
    raise UnknownName(f"unknown potential {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def _with_phisecond(pot: Potential, cert: GrowthCertificate) -> GrowthCertificate:
    return GrowthCertificate(*cert.astuple(), phisecond_c=_phisecond_default(pot))


def _ceil_dyadic(x: float, bits: int = 6) -> Fraction:
    """Smallest multiple of 2**-bits that is >= x (and >= 0)."""
    if x <= 0:
        return Fraction(0)
    scale = 2**bits
    return Fraction(math.ceil(x * scale), scale)


def search_certificate(pot: Potential) -> Optional[GrowthCertificate]:
    """Best-effort certificate synthesis.

    For a few trial values of a0 (fractions of the leading coefficient of
    phi') the smallest dyadic a1 is read off the exact maximum of
    ``a0 y^(q-2) - phi'``; a2 is the leading coefficient and a3 the dyadic
    ceiling of ``max(phi' - a2 y^(q-2))``.  Every candidate goes through
    :func:`verify_growth`; the one with the smallest a1 wins.
    """
    if pot.is_linear:
        return None
    q = pot.degree
    dphi = pot.phi_prime_poly
    lead = dphi[-1]
    ypow = P.monomial(1, q - 2)
    a2, a3 = lead, Fraction(0)
    if q > 2:
        for grow in (Fraction(1), Fraction(5, 4), Fraction(3, 2), Fraction(2)):
            try:
                excess = P.maximize(P.sub(dphi, P.scale(ypow, lead * grow)))
            except ValueError:
                continue
            a2, a3 = lead * grow, _ceil_dyadic(excess)
            break
    best = None
    for frac in (Fraction(1, 2), Fraction(3, 4), Fraction(1, 4), Fraction(1, 8)):
        a0 = lead * frac
        if q == 2:
            a1 = Fraction(0)
        else:
            a1 = _ceil_dyadic(P.maximize(P.sub(P.scale(ypow, a0), dphi)))
        for bump in (0, 1, 2):
            try:
                cert = GrowthCertificate(
                    q, a0, a1 + Fraction(bump, 64) * (a1 > 0),
                    a2, a3 + Fraction(bump, 64) * (a3 > 0), _phisecond_default(pot),
                )
            except InvalidPotential:
                break
            if verify_growth(pot, cert):
                if best is None or cert.a1 < best.a1:
                    best = cert
                break
    return best


def star_potential(q: int) -> tuple[Potential, GrowthCertificate]:
    """``V*(y) = y^2/2 + |y|^q/q`` (q even) with its exact certificate
    ``(q, q-1, 0, q-1, 1)``."""
    if q % 2:
        raise OddQ(f"q = {q} is odd")
    coeffs = [Fraction(0)] * q
    coeffs[1] = Fraction(1, 2)
    coeffs[q - 1] = coeffs[q - 1] + Fraction(1, q)
    pot = Potential(tuple(coeffs), name=f"Vstar(q={q})")
    cert = GrowthCertificate(q, q - 1, 0, q - 1, 1) if q > 2 else GrowthCertificate(2, 2, 0, 2, 0)
    return pot, _with_phisecond(pot, cert)
