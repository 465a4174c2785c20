"""Exact univariate polynomial arithmetic over the rationals.

Polynomials are tuples of :class:`fractions.Fraction` in ascending order,
``(a0, a1, ..., an)``.  The zero polynomial is the empty tuple.  Everything
here is exact; floats only appear in the witnesses and maxima handed back to
callers.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

Poly = tuple  # tuple[Fraction, ...], ascending powers


def poly(coeffs: Iterable) -> Poly:
    """Build a trimmed polynomial from ascending coefficients."""
    return trim(tuple(Fraction(c) for c in coeffs))


def trim(p: Sequence[Fraction]) -> Poly:
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return tuple(p)


def degree(p: Poly) -> int:
    return len(p) - 1  # -1 for the zero polynomial


def monomial(coef, power: int) -> Poly:
    return trim((Fraction(0),) * power + (Fraction(coef),))


def add(p: Poly, q: Poly) -> Poly:
    n = max(len(p), len(q))
    return trim(
        (p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)
    )


def sub(p: Poly, q: Poly) -> Poly:
    return add(p, scale(q, -1))


def scale(p: Poly, c) -> Poly:
    c = Fraction(c)
    return trim(a * c for a in p)


def mul(p: Poly, q: Poly) -> Poly:
    if not p or not q:
        return ()
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return trim(out)


def derivative(p: Poly) -> Poly:
    return trim(i * a for i, a in enumerate(p) if i > 0)


def antiderivative(p: Poly) -> Poly:
    """Antiderivative with zero constant term."""
    return trim([Fraction(0)] + [a / (i + 1) for i, a in enumerate(p)])


def evaluate(p: Poly, x):
    """Horner evaluation; exact for Fraction/int ``x``."""
    acc = 0
    for a in reversed(p):
        acc = acc * x + a
    return acc


def compose_neg(p: Poly) -> Poly:
    """Return p(-y)."""
    return trim(a if i % 2 == 0 else -a for i, a in enumerate(p))


def divmod_poly(p: Poly, d: Poly) -> tuple[Poly, Poly]:
    if not d:
        raise ZeroDivisionError("polynomial division by zero")
    r = list(p)
    dd = degree(d)
    lead = d[-1]
    qt = [Fraction(0)] * max(len(p) - dd, 0)
    while len(r) - 1 >= dd and r:
        shift = len(r) - 1 - dd
        c = r[-1] / lead
        qt[shift] = c
        for i, a in enumerate(d):
            r[shift + i] -= c * a
        r = list(trim(r))
    return trim(qt), trim(r)


def monic(p: Poly) -> Poly:
    return scale(p, 1 / p[-1]) if p else p


def gcd(p: Poly, q: Poly) -> Poly:
    while q:
        p, q = q, divmod_poly(p, q)[1]
    return monic(p)


def squarefree_factors(p: Poly) -> list[Poly]:
    """Yun's algorithm: monic, pairwise coprime f_1, f_2, ... with
    p = lc(p) * prod f_i**i."""
    if degree(p) < 1:
        return []
    a = monic(p)
    b = derivative(a)
    c = gcd(a, b)
    w = divmod_poly(a, c)[0]
    y = divmod_poly(b, c)[0]
    z = sub(y, derivative(w))
    out = []
    while degree(w) > 0:
        g = gcd(w, z)
        out.append(g)
        w = divmod_poly(w, g)[0]
        y = divmod_poly(z, g)[0]
        z = sub(y, derivative(w))
    return out


def odd_part(p: Poly) -> Poly:
    """Squarefree polynomial whose roots are exactly the odd-multiplicity
    roots of ``p``, with the same sign as ``p`` away from its roots."""
    h: Poly = (Fraction(p[-1]),)
    for i, f in enumerate(squarefree_factors(p), start=1):
        if i % 2 == 1:
            h = mul(h, f)
    return h


# --- Sturm sequences ---------------------------------------------------------

def sturm_chain(p: Poly) -> list[Poly]:
    chain = [p, derivative(p)]
    while chain[-1]:
        r = divmod_poly(chain[-2], chain[-1])[1]
        if not r:
            break
        chain.append(scale(r, -1))
    return [c for c in chain if c]


def _sign_at(p: Poly, x) -> int:
    if x == np.inf:
        return (p[-1] > 0) - (p[-1] < 0)
    if x == -np.inf:
        s = (p[-1] > 0) - (p[-1] < 0)
        return s if degree(p) % 2 == 0 else -s
    v = evaluate(p, x)
    return (v > 0) - (v < 0)


def sign_changes(chain: list[Poly], x) -> int:
    signs = [s for s in (_sign_at(c, x) for c in chain) if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_roots(p: Poly, lo=-np.inf, hi=np.inf, chain=None) -> int:
    """Number of distinct real roots of squarefree ``p`` in ``(lo, hi]``."""
    if degree(p) < 1:
        return 0
    chain = chain or sturm_chain(p)
    return sign_changes(chain, lo) - sign_changes(chain, hi)


def root_bound(p: Poly) -> Fraction:
    """Cauchy bound: every real root lies in [-B, B]."""
    lead = abs(p[-1])
    return 1 + max((abs(a) / lead for a in p[:-1]), default=Fraction(0))


def isolate_roots(p: Poly, lo=None, hi=None, width=Fraction(1, 2**40)) -> list[tuple[Fraction, Fraction]]:
    """Disjoint rational intervals (a, b], each holding one distinct root of
    the squarefree ``p`` inside the open interval (lo, hi), refined to
    ``b - a <= width``."""
    if degree(p) < 1:
        return []
    chain = sturm_chain(p)
    bound = root_bound(p)
    a0 = -bound - 1 if lo is None else Fraction(lo)
    b0 = bound + 1 if hi is None else Fraction(hi)
    if a0 >= b0:
        return []
    # root exactly at hi belongs to the closed end; exclude it
    hi_is_root = hi is not None and evaluate(p, b0) == 0
    out = []
    stack = [(a0, b0)]
    while stack:
        a, b = stack.pop()
        n = count_roots(p, a, b, chain)
        if b == b0 and hi_is_root:
            n -= 1
        if n == 0:
            continue
        if n == 1 and b - a <= width and not (b == b0 and hi_is_root):
            out.append((a, b))
            continue
        m = (a + b) / 2
        if evaluate(p, m) == 0:
            # nudge off an exact root so both halves stay half-open
            m += (b - a) / 7
        stack.append((m, b))
        stack.append((a, m))
    return sorted(out)


# --- nonnegativity and maxima -----------------------------------------------

def _interior_point(lo, hi) -> Fraction:
    if lo is None and hi is None:
        return Fraction(0)
    if lo is None:
        return Fraction(hi) - 1
    if hi is None:
        return Fraction(lo) + 1
    return (Fraction(lo) + Fraction(hi)) / 2


def is_nonnegative(p: Poly, lo=None, hi=None) -> tuple[bool, Optional[float]]:
    """Decide exactly whether ``p(y) >= 0`` for all y in [lo, hi].

    ``None`` bounds mean infinity.  Returns ``(True, None)`` or
    ``(False, witness)`` with ``p(witness) < 0``.

    ``p`` and its odd-multiplicity part ``h`` share signs away from roots,
    and ``h`` is squarefree, so p >= 0 on the interval iff ``h`` has no
    root strictly inside it and is positive at one interior point.
    """
    if not p:
        return True, None
    h0 = odd_part(p)
    h = h0
    for end in (lo, hi):
        if end is not None and degree(h) >= 1 and evaluate(h, Fraction(end)) == 0:
            h = divmod_poly(h, (-Fraction(end), Fraction(1)))[0]
    a = -np.inf if lo is None else Fraction(lo)
    b = np.inf if hi is None else Fraction(hi)
    inside = count_roots(h, a, b) if degree(h) >= 1 else 0
    if inside == 0 and evaluate(h0, _interior_point(lo, hi)) > 0:
        return True, None
    return False, _negative_witness(p, h, lo, hi)


def _negative_witness(p: Poly, h: Poly, lo, hi) -> float:
    """Point where p < 0: the most negative critical point or gap sample."""
    candidates: list[Fraction] = []
    iv = isolate_roots(h, lo, hi, width=Fraction(1, 2**20)) if degree(h) >= 1 else []
    edges = [Fraction(lo) if lo is not None else None]
    for a, b in iv:
        edges += [a, b]
    edges.append(Fraction(hi) if hi is not None else None)
    for left, right in zip(edges[::2], edges[1::2]):
        if left is None and right is None:
            candidates.append(Fraction(0))
        elif left is None:
            candidates.append(right - 1)
        elif right is None:
            candidates.append(left + 1)
        elif right > left:
            candidates.append((left + right) / 2)
    candidates += [Fraction(e) for e in (lo, hi) if e is not None]
    dp = derivative(p)
    if degree(dp) >= 1:
        for r in np.roots([float(c) for c in reversed(dp)]):
            if abs(r.imag) < 1e-9 * max(1.0, abs(r.real)):
                x = Fraction(float(r.real))
                if (lo is None or x >= lo) and (hi is None or x <= hi):
                    candidates.append(x)
    best = min(candidates, key=lambda x: evaluate(p, x))
    if evaluate(p, best) >= 0:
        # fall back to a dense exact scan around the isolating intervals
        for a, b in iv:
            for j in range(1, 64):
                for x in (a - (b - a) * j, b + (b - a) * j):
                    if (lo is None or x >= lo) and (hi is None or x <= hi) and evaluate(p, x) < 0:
                        return float(x)
    return float(best)


def maximize(p: Poly, lo=None, hi=None) -> float:
    """Maximum of ``p`` over [lo, hi] (``None`` = unbounded), located from
    the exactly isolated real roots of p'.

    Raises ValueError when ``p`` is unbounded above on the interval.
    """
    if not p:
        return 0.0
    if degree(p) == 0:
        return float(p[0])
    lead = p[-1]
    d = degree(p)
    if hi is None and lead > 0:
        raise ValueError("polynomial unbounded above on the interval")
    if lo is None and ((d % 2 == 0 and lead > 0) or (d % 2 == 1 and lead < 0)):
        raise ValueError("polynomial unbounded above on the interval")
    values = []
    for end in (lo, hi):
        if end is not None:
            values.append(evaluate(p, Fraction(end)))
    dp = derivative(p)
    if degree(dp) >= 1:
        sf = divmod_poly(dp, gcd(dp, derivative(dp)))[0]
        for a, b in isolate_roots(sf, lo, hi, width=Fraction(1, 2**80)):
            values.append(max(evaluate(p, a), evaluate(p, b)))
    return float(max(values))
