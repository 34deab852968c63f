"""Exact fixed-point money.

All monetary quantities (costs, values, prices, bid increments) are stored as
plain ints counting units of a per-network resolution ``rho`` (a Fraction,
default 1/10000 currency units).  Integer arithmetic keeps every sum, max and
comparison exact and independent of evaluation order, which the protocol's
tie-breaking and equilibrium checks require.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation
from fractions import Fraction

DEFAULT_RESOLUTION = Fraction(1, 10000)

Money = int  # ticks of the network resolution


class MoneyError(ValueError):
    """Raised for amounts that are malformed or not on the resolution grid."""


def parse_resolution(text: str | int | float | Fraction) -> Fraction:
    """Parse a resolution value; must be a positive rational."""
    if isinstance(text, Fraction):
        rho = text
    else:
        try:
            rho = Fraction(Decimal(str(text)))
        except (InvalidOperation, ValueError) as exc:
            raise MoneyError(f"bad resolution {text!r}") from exc
    if rho <= 0:
        raise MoneyError(f"resolution must be positive, got {text!r}")
    return rho


def parse_money(value: str | int | float, resolution: Fraction) -> Money:
    """Parse a decimal string (or int) into ticks of ``resolution``.

    Rejects amounts that are not integer multiples of the resolution.
    """
    if isinstance(value, bool):
        raise MoneyError(f"bad money value {value!r}")
    try:
        amount = Fraction(Decimal(str(value)))
    except (InvalidOperation, ValueError) as exc:
        raise MoneyError(f"bad money value {value!r}") from exc
    ticks = amount / resolution
    if ticks.denominator != 1:
        raise MoneyError(f"{value!r} is not a multiple of the resolution {resolution}")
    return int(ticks)


def format_money(ticks: Money | Fraction, resolution: Fraction) -> str:
    """Render ticks back to a decimal string, exactly.

    Accepts Fraction tick counts as well (equilibrium witnesses may sit off
    the money grid); amounts whose exact value has no finite decimal
    expansion are rendered as ``p/q``.
    """
    amount = Fraction(ticks) * resolution
    if amount == 0:
        return "0"
    denom = amount.denominator
    twos = fives = 0
    while denom % 2 == 0:
        denom //= 2
        twos += 1
    while denom % 5 == 0:
        denom //= 5
        fives += 1
    if denom != 1:
        return f"{amount.numerator}/{amount.denominator}"
    shift = max(twos, fives)
    scaled = amount.numerator * 10**shift // amount.denominator
    text = str(abs(scaled)).rjust(shift + 1, "0")
    if shift:
        text = f"{text[:-shift]}.{text[-shift:]}".rstrip("0").rstrip(".")
    return f"-{text}" if scaled < 0 else text
