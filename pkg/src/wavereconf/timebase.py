"""Fixed-point simulated time.

All event times are integers counting micro-units (6 fractional digits), so
event ordering is exact and independent of floating point.
"""
import re

TICKS = 1_000_000
FRACTION_DIGITS = 6

_DECIMAL = re.compile(r"^(\d+)(?:\.(\d+))?$")


def parse_decimal(text: str) -> int:
    """Parse a non-negative decimal like ``12.5`` into ticks.

    Raises ValueError on malformed input or more than 6 fractional digits.
    """
    m = _DECIMAL.match(text.strip())
    if not m:
        raise ValueError(f"not a non-negative decimal: {text!r}")
    whole, frac = m.group(1), m.group(2) or ""
    if len(frac) > FRACTION_DIGITS:
        raise ValueError(f"more than {FRACTION_DIGITS} fractional digits: {text!r}")
    return int(whole) * TICKS + int(frac.ljust(FRACTION_DIGITS, "0"))


def format_decimal(ticks: int) -> str:
    """Render ticks as a decimal without trailing zeros (``2500000 -> '2.5'``)."""
    sign = "-" if ticks < 0 else ""
    whole, frac = divmod(abs(ticks), TICKS)
    if frac == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}." + f"{frac:0{FRACTION_DIGITS}d}".rstrip("0")


def ticks(value) -> int:
    """Convenience: convert an int/str number of time units to ticks."""
    if isinstance(value, int):
        return value * TICKS
    return parse_decimal(str(value))
