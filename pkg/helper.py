import math
from fractions import Fraction
from numbers import Rational
from typing import Any, Iterable, Union

Number = Union[Fraction, float, int]

TOLERANCE = 1e-9


class _Infinity:
    """Distance sentinel for disconnected pairs; ordered above every number."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("kcenter-infinity")

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __repr__(self):
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()


class NumericHelper:
    @staticmethod
    def is_infinite(value: Any) -> bool:
        return value is INFINITY

    @staticmethod
    def is_exact(value: Any) -> bool:
        return isinstance(value, Rational) and not isinstance(value, bool)

    @staticmethod
    def tolerance(*values: Any) -> float:
        if all(NumericHelper.is_exact(v) for v in values):
            return 0
        return TOLERANCE

    @staticmethod
    def to_number(value: Any) -> Any:
        if isinstance(value, bool):
            raise TypeError(f"Boolean is not a number: {value!r}")
        if value is INFINITY:
            return INFINITY
        if isinstance(value, Fraction):
            return value
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            if math.isinf(value) and value > 0:
                return INFINITY
            if math.isnan(value):
                raise ValueError("NaN is not a valid number")
            return value
        if isinstance(value, str):
            text = value.strip()
            if text.lower() in ("inf", "infinity", "+inf"):
                return INFINITY
            return Fraction(text)
        if isinstance(value, Rational):
            return Fraction(value.numerator, value.denominator)
        return float(value)

    @staticmethod
    def leq(a: Any, b: Any) -> bool:
        if a is INFINITY or b is INFINITY:
            return a <= b
        return a <= b + NumericHelper.tolerance(a, b)

    @staticmethod
    def geq(a: Any, b: Any) -> bool:
        return NumericHelper.leq(b, a)

    @staticmethod
    def is_zero(a: Any) -> bool:
        return abs(a) <= NumericHelper.tolerance(a)

    @staticmethod
    def floor(a: Any) -> int:
        if NumericHelper.is_exact(a):
            return math.floor(a)
        return math.floor(a + TOLERANCE)

    @staticmethod
    def ceil(a: Any) -> int:
        if NumericHelper.is_exact(a):
            return math.ceil(a)
        return math.ceil(a - TOLERANCE)

    @staticmethod
    def is_integral(a: Any) -> bool:
        return abs(a - round(a)) <= NumericHelper.tolerance(a)

    @staticmethod
    def exact_sum(values: Iterable[Any]) -> Any:
        total = Fraction(0)
        for value in values:
            total = total + value
        return total

    @staticmethod
    def format_number(value: Any) -> Any:
        if value is INFINITY:
            return "inf"
        if isinstance(value, Fraction):
            if value.denominator == 1:
                return value.numerator
            return f"{value.numerator}/{value.denominator}"
        if isinstance(value, int):
            return value
        return float(f"{float(value):.12g}")

    @staticmethod
    def log_base(value: Any, base: Any) -> float:
        return math.log(float(value)) / math.log(float(base))

    @staticmethod
    def rationalize(value: Any) -> Any:
        """Exact rational for a decimal float (0.5 -> 1/2); other numbers go through to_number."""
        if isinstance(value, float) and math.isfinite(value):
            return Fraction(repr(value))
        return NumericHelper.to_number(value)
