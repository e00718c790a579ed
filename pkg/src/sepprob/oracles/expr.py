"""Exact arithmetic trees for closed-form constants.

Leaves are integers, rationals and pi; interior nodes are the four
operations, rational powers, and the elementary functions that appear in the
constants (sqrt, arctan, arccot, arcsec).  Trees render to a readable infix
string and evaluate with mpmath at any working precision.
"""

from fractions import Fraction

import mpmath

_FUNCS = {
    "sqrt": mpmath.sqrt,
    "atan": mpmath.atan,
    "acot": mpmath.acot,
    "asec": mpmath.asec,
}


def _wrap(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Num(Fraction(x))
    raise TypeError(f"cannot build an exact expression from {type(x).__name__}")


class Expr:
    prec = 100  # binding strength used for parenthesization

    def __add__(self, other):
        return Add(self, _wrap(other))

    def __radd__(self, other):
        return Add(_wrap(other), self)

    def __sub__(self, other):
        return Add(self, Neg(_wrap(other)))

    def __rsub__(self, other):
        return Add(_wrap(other), Neg(self))

    def __mul__(self, other):
        return Mul(self, _wrap(other))

    def __rmul__(self, other):
        return Mul(_wrap(other), self)

    def __truediv__(self, other):
        return Div(self, _wrap(other))

    def __rtruediv__(self, other):
        return Div(_wrap(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, exponent):
        return Pow(self, Fraction(exponent))

    def evaluate(self, dps=40):
        """Value as an ``mpmath.mpf`` computed with ``dps`` decimal digits."""
        with mpmath.workdps(dps):
            return +self._eval()

    def __float__(self):
        return float(self.evaluate(40))

    def _paren(self, child, strict=False):
        s = str(child)
        if child.prec < self.prec or (strict and child.prec == self.prec):
            return f"({s})"
        return s


class Num(Expr):
    def __init__(self, value):
        self.value = Fraction(value)

    @property
    def prec(self):
        # negative numbers and fractions bind like their operator
        if self.value.denominator != 1:
            return 2
        return 1 if self.value < 0 else 100

    def _eval(self):
        return mpmath.mpf(self.value.numerator) / self.value.denominator

    def __str__(self):
        return str(self.value)


class Pi(Expr):
    def _eval(self):
        return +mpmath.pi

    def __str__(self):
        return "pi"


class Func(Expr):
    def __init__(self, name, arg):
        if name not in _FUNCS:
            raise ValueError(f"unsupported function {name!r}")
        self.name = name
        self.arg = _wrap(arg)

    def _eval(self):
        return _FUNCS[self.name](self.arg._eval())

    def __str__(self):
        return f"{self.name}({self.arg})"


class Add(Expr):
    prec = 1

    def __init__(self, left, right):
        self.left, self.right = left, right

    def _eval(self):
        return self.left._eval() + self.right._eval()

    def __str__(self):
        if isinstance(self.right, Neg):
            return f"{self.left} - {self._paren(self.right.arg, strict=True)}"
        return f"{self.left} + {self._paren(self.right)}"


class Neg(Expr):
    prec = 1

    def __init__(self, arg):
        self.arg = arg

    def _eval(self):
        return -self.arg._eval()

    def __str__(self):
        return f"-{self._paren(self.arg, strict=True)}"


class Mul(Expr):
    prec = 2

    def __init__(self, left, right):
        self.left, self.right = left, right

    def _eval(self):
        return self.left._eval() * self.right._eval()

    def __str__(self):
        return f"{self._paren(self.left)}*{self._paren(self.right, strict=isinstance(self.right, Div))}"


class Div(Expr):
    prec = 2

    def __init__(self, left, right):
        self.left, self.right = left, right

    def _eval(self):
        return self.left._eval() / self.right._eval()

    def __str__(self):
        return f"{self._paren(self.left)}/{self._paren(self.right, strict=True)}"


class Pow(Expr):
    prec = 3

    def __init__(self, base, exponent):
        self.base = base
        self.exponent = Fraction(exponent)

    def _eval(self):
        e = self.exponent
        b = self.base._eval()
        if e.denominator == 1:
            return b ** int(e)
        return b ** (mpmath.mpf(e.numerator) / e.denominator)

    def __str__(self):
        e = self.exponent
        es = str(e) if e.denominator == 1 and e >= 0 else f"({e})"
        return f"{self._paren(self.base, strict=True)}^{es}"


PI = Pi()


def num(value):
    return Num(Fraction(value))


def sqrt(x):
    return Func("sqrt", x)


def atan(x):
    return Func("atan", x)


def acot(x):
    return Func("acot", x)


def asec(x):
    return Func("asec", x)
