"""Generalized hypergeometric series pFq on the real line."""

from __future__ import annotations

import math
import decimal
from decimal import Decimal
from typing import Sequence

REL_STOP = 1e-15
MAX_TERMS = 100_000
# max|term| / |sum| beyond which float terms lose too many digits and the
# sum is redone in decimal arithmetic with extra digits
CANCELLATION_LIMIT = 1e4


class SeriesDivergenceError(RuntimeError):
    def __init__(self, msg, partial_sum=None, terms=0, last_term=None):
        super().__init__(f"{msg} (terms={terms}, partial_sum={partial_sum!r}, last_term={last_term!r})")
        self.partial_sum = partial_sum
        self.terms = terms
        self.last_term = last_term


def _is_nonpos_int(v) -> bool:
    return float(v) <= 0 and float(v) == int(v)


def _terminating_degree(a: Sequence[float]) -> int | None:
    degs = [int(-float(v)) for v in a if _is_nonpos_int(v)]
    return min(degs) if degs else None


def hyp_pfq(a: Sequence[float], b: Sequence[float], x: float, *,
            rel_stop: float = REL_STOP, max_terms: int = MAX_TERMS) -> float:
    """Sum ``pFq(a; b; x)`` term by term.

    Stops once a term falls below ``rel_stop`` times the running sum after
    the terms have started to shrink. The running sum is kept exactly with
    ``math.fsum``; if the largest term dwarfs the result the whole series is
    recomputed in high-precision decimal arithmetic.
    """
    for bj in b:
        if _is_nonpos_int(bj):
            raise ValueError(f"lower parameter {bj} is a nonpositive integer")
    if x == 0:
        return 1.0
    deg = _terminating_degree(a)
    terms = [1.0]
    t = 1.0
    biggest = 1.0
    k = 0
    while True:
        if deg is not None and k >= deg:
            break
        if k >= max_terms:
            raise SeriesDivergenceError("pFq series did not converge", math.fsum(terms), k, t)
        num = 1.0
        for ai in a:
            num *= ai + k
        den = float(k + 1)
        for bj in b:
            den *= bj + k
        ratio = num / den * x
        t *= ratio
        k += 1
        terms.append(t)
        biggest = max(biggest, abs(t))
        if not math.isfinite(t):
            raise SeriesDivergenceError("pFq term overflow", math.fsum(terms[:-1]), k, t)
        if deg is None and abs(ratio) < 1 and abs(t) <= rel_stop * abs(math.fsum(terms)):
            break
    s = math.fsum(terms)
    if biggest > CANCELLATION_LIMIT * abs(s):
        return _hyp_pfq_exact(a, b, x, len(terms), biggest)
    return s


def _hyp_pfq_exact(a, b, x, nterms, biggest) -> float:
    """Same sum in decimal arithmetic with enough digits to absorb the cancellation."""
    digits = 40 + max(0, int(math.log10(max(biggest, 1.0))))
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        da = [Decimal(v) for v in a]
        db = [Decimal(v) for v in b]
        dx = Decimal(x)
        t = Decimal(1)
        s = Decimal(1)
        k = 0
        tiny = Decimal(10) ** (-digits)
        while k < max(nterms, 1) * 4 + 50:
            num = Decimal(1)
            for ai in da:
                num *= ai + k
            if num == 0:
                break
            den = Decimal(k + 1)
            for bj in db:
                den *= bj + k
            t = t * num / den * dx
            s += t
            k += 1
            if k >= nterms and abs(t) <= tiny * abs(s):
                break
        return float(s)


def hyp1f1(a: float, b: float, x: float) -> float:
    return hyp_pfq([a], [b], x)


def double_factorial(n: int) -> int:
    """n!! with (-1)!! = 0!! = 1."""
    if n < -1:
        raise ValueError("double factorial defined for n >= -1")
    r = 1
    while n > 1:
        r *= n
        n -= 2
    return r
