"""Forward-mode dual numbers over numpy arrays.

A ``DualReal`` pairs a value (a float or an ndarray) with a dense tangent
holding the partial derivatives with respect to the ``n`` calibration
parameters. The tangent always has shape ``value.shape + (n,)``. Constants
store no tangent and materialize zeros on access, so code paths that never
touch the parameters (most of the exit-selection simulation) run at plain
numpy speed.
"""
import logging
from typing import Any, Callable, Dict, Iterable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from crowdcal.exceptions import DualArithmeticError, InvalidDimensionError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, int, np.ndarray]


def _col(value: Any) -> np.ndarray:
    """Append a length-1 axis so a value broadcasts against a tangent."""
    return np.asarray(value)[..., None]


def _scalarize(value: np.ndarray) -> Any:
    """Return numpy scalars for 0-d results."""
    value = np.asarray(value, dtype=float)
    return value[()] if value.ndim == 0 else value


class DualReal:
    """A value and its tangent vector of partial derivatives."""

    __slots__ = ("value", "_tangent", "n")
    __array_ufunc__ = None  # make ndarray defer to the reflected operators

    def __init__(self, value: ArrayLike, tangent: Optional[np.ndarray] = None, n: Optional[int] = None):
        value = _scalarize(value)
        if tangent is not None:
            tangent = np.asarray(tangent, dtype=float)
            if n is None:
                n = tangent.shape[-1]
            expected = np.shape(value) + (n,)
            if tangent.shape != expected:
                tangent = np.broadcast_to(tangent, expected)
        if n is None or n < 1:
            raise InvalidDimensionError(f"Tangent dimension must be >= 1, got {n}")
        self.value = value
        self._tangent = tangent
        self.n = int(n)

    # -- construction -------------------------------------------------------

    @classmethod
    def constant(cls, value: ArrayLike, n: int) -> "DualReal":
        """Create a value with zero tangent."""
        return cls(value, None, n)

    def lift(self, other: Any) -> "DualReal":
        """Promote a plain number or array to a constant of matching dimension."""
        if isinstance(other, DualReal):
            if other.n != self.n:
                raise InvalidDimensionError(f"Tangent dimensions differ: {self.n} vs {other.n}")
            return other
        return DualReal.constant(other, self.n)

    # -- inspection ---------------------------------------------------------

    @property
    def tangent(self) -> np.ndarray:
        """Partial derivatives, shape ``value.shape + (n,)``."""
        if self._tangent is None:
            return np.zeros(np.shape(self.value) + (self.n,))
        return self._tangent

    @property
    def is_constant(self) -> bool:
        return self._tangent is None

    @property
    def shape(self) -> Tuple[int, ...]:
        return np.shape(self.value)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def __len__(self) -> int:
        if self.ndim == 0:
            raise TypeError("len() of a scalar DualReal")
        return self.shape[0]

    def __iter__(self) -> Iterator["DualReal"]:
        for i in range(len(self)):
            yield self[i]

    def __float__(self) -> float:
        return float(self.value)

    def is_finite(self) -> bool:
        """True if value and tangent are finite everywhere."""
        if not np.all(np.isfinite(self.value)):
            return False
        return self._tangent is None or bool(np.all(np.isfinite(self._tangent)))

    def __repr__(self) -> str:
        return f"DualReal(value={self.value!r}, tangent={self.tangent!r})"

    # -- arithmetic ---------------------------------------------------------

    def _fit(self, tangent: Optional[np.ndarray], shape: Tuple[int, ...]) -> Optional[np.ndarray]:
        if tangent is None or tangent.shape[:-1] == shape:
            return tangent
        return np.broadcast_to(tangent, shape + (self.n,))

    def _combine(self, value: Any, *terms: Optional[np.ndarray]) -> "DualReal":
        """Build a result from the non-None tangent terms."""
        live = [t for t in terms if t is not None]
        if not live:
            return DualReal(value, None, self.n)
        total = live[0]
        for t in live[1:]:
            total = total + t
        return DualReal(value, self._fit(total, np.shape(value)), self.n)

    def __add__(self, other: Any) -> "DualReal":
        other = self.lift(other)
        return self._combine(self.value + other.value, self._tangent, other._tangent)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "DualReal":
        other = self.lift(other)
        neg = None if other._tangent is None else -other._tangent
        return self._combine(self.value - other.value, self._tangent, neg)

    def __rsub__(self, other: Any) -> "DualReal":
        return self.lift(other) - self

    def __neg__(self) -> "DualReal":
        neg = None if self._tangent is None else -self._tangent
        return DualReal(-self.value, neg, self.n)

    def __pos__(self) -> "DualReal":
        return self

    def __mul__(self, other: Any) -> "DualReal":
        other = self.lift(other)
        left = None if self._tangent is None else self._tangent * _col(other.value)
        right = None if other._tangent is None else other._tangent * _col(self.value)
        return self._combine(self.value * other.value, left, right)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "DualReal":
        return divide(self, other)

    def __rtruediv__(self, other: Any) -> "DualReal":
        return divide(self.lift(other), self)

    def __pow__(self, exponent: Any) -> "DualReal":
        if isinstance(exponent, DualReal):
            return exp(exponent * log(self))
        p = float(exponent)
        if p == 2.0:
            return self * self
        value = np.power(self.value, p)
        if self._tangent is None:
            return DualReal(value, None, self.n)
        return DualReal(value, self._tangent * _col(p * np.power(self.value, p - 1.0)), self.n)

    # -- plain comparisons on values (untracked, pathwise) --------------------

    def __lt__(self, other: Any):
        return self.value < _value_of(other)

    def __le__(self, other: Any):
        return self.value <= _value_of(other)

    def __gt__(self, other: Any):
        return self.value > _value_of(other)

    def __ge__(self, other: Any):
        return self.value >= _value_of(other)

    # -- array structure ------------------------------------------------------

    def __getitem__(self, index: Any) -> "DualReal":
        if not isinstance(index, tuple):
            index = (index,)
        value = np.asarray(self.value)[index]
        if self._tangent is None:
            return DualReal(value, None, self.n)
        return DualReal(value, self._tangent[index + (slice(None),)], self.n)

    def _axes(self, axis: Union[int, Sequence[int]]) -> Tuple[int, ...]:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        return tuple(int(a) % self.ndim for a in axes)

    def sum(self, axis: Optional[Union[int, Sequence[int]]] = None) -> "DualReal":
        value = np.asarray(self.value)
        if axis is None:
            total = value.sum()
            if self._tangent is None:
                return DualReal(total, None, self.n)
            return DualReal(total, self._tangent.reshape(-1, self.n).sum(axis=0), self.n)
        axes = self._axes(axis)
        total = value.sum(axis=axes)
        if self._tangent is None:
            return DualReal(total, None, self.n)
        return DualReal(total, self._tangent.sum(axis=axes), self.n)

    def mean(self, axis: Optional[Union[int, Sequence[int]]] = None) -> "DualReal":
        if axis is None:
            count = max(int(np.size(self.value)), 1)
        else:
            count = int(np.prod([self.shape[a] for a in self._axes(axis)]))
        return self.sum(axis) * (1.0 / max(count, 1))

    def cumsum(self, axis: int = 0) -> "DualReal":
        axis = int(axis) % self.ndim
        value = np.cumsum(self.value, axis=axis)
        tangent = None if self._tangent is None else np.cumsum(self._tangent, axis=axis)
        return DualReal(value, tangent, self.n)

    def reshape(self, *shape: int) -> "DualReal":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        value = np.reshape(self.value, shape)
        tangent = None if self._tangent is None else self._tangent.reshape(value.shape + (self.n,))
        return DualReal(value, tangent, self.n)

    def copy(self) -> "DualReal":
        tangent = None if self._tangent is None else np.array(self._tangent)
        return DualReal(np.array(self.value), tangent, self.n)


def _value_of(x: Any) -> Any:
    return x.value if isinstance(x, DualReal) else x


def _dimension(args: Iterable[Any]) -> int:
    for a in args:
        if isinstance(a, DualReal):
            return a.n
    raise InvalidDimensionError("At least one operand must be a DualReal")


# -- seeding ----------------------------------------------------------------

def seed_parameters(theta: Union[Sequence[float], np.ndarray]) -> DualReal:
    """Seed a parameter vector for forward-mode differentiation.

    Args:
        theta: Parameter values, length n >= 1

    Returns:
        DualReal vector whose element i has tangent e_i

    Raises:
        InvalidDimensionError: If theta is empty or not one-dimensional
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size == 0:
        raise InvalidDimensionError(f"Parameter vector must be 1-D with n >= 1, got shape {theta.shape}")
    return DualReal(theta, np.eye(theta.size), theta.size)


def constant_parameters(theta: Union[Sequence[float], np.ndarray]) -> DualReal:
    """Wrap a parameter vector without derivative propagation (plain evaluation)."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size == 0:
        raise InvalidDimensionError(f"Parameter vector must be 1-D with n >= 1, got shape {theta.shape}")
    return DualReal.constant(theta, theta.size)


# -- elementary functions --------------------------------------------------

def divide(a: Any, b: Any, site: str = "div") -> DualReal:
    """Quotient with the quotient rule; zero denominators raise."""
    n = _dimension((a, b))
    a = a if isinstance(a, DualReal) else DualReal.constant(a, n)
    b = a.lift(b)
    if np.any(np.asarray(b.value) == 0.0):
        raise DualArithmeticError("Division by zero value", site=site)
    value = a.value / b.value
    left = None if a._tangent is None else a._tangent / _col(b.value)
    right = None if b._tangent is None else -b._tangent * _col(value / b.value)
    return a._combine(value, left, right)


def exp(x: DualReal) -> DualReal:
    value = np.exp(x.value)
    if x.is_constant:
        return DualReal(value, None, x.n)
    return DualReal(value, x._tangent * _col(value), x.n)


def log(x: DualReal, site: str = "log") -> DualReal:
    if np.any(np.asarray(x.value) <= 0.0):
        raise DualArithmeticError("Logarithm of non-positive value", site=site)
    value = np.log(x.value)
    if x.is_constant:
        return DualReal(value, None, x.n)
    return DualReal(value, x._tangent / _col(x.value), x.n)


def sqrt(x: DualReal, site: str = "sqrt") -> DualReal:
    """Square root; the tangent at exactly zero is taken as zero."""
    v = np.asarray(x.value)
    if np.any(v < 0.0):
        raise DualArithmeticError("Square root of negative value", site=site)
    value = np.sqrt(v)
    if x.is_constant:
        return DualReal(value, None, x.n)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(value > 0.0, 0.5 / np.where(value > 0.0, value, 1.0), 0.0)
    return DualReal(value, x._tangent * _col(scale), x.n)


def sin(x: DualReal) -> DualReal:
    if x.is_constant:
        return DualReal(np.sin(x.value), None, x.n)
    return DualReal(np.sin(x.value), x._tangent * _col(np.cos(x.value)), x.n)


def cos(x: DualReal) -> DualReal:
    if x.is_constant:
        return DualReal(np.cos(x.value), None, x.n)
    return DualReal(np.cos(x.value), -x._tangent * _col(np.sin(x.value)), x.n)


def absolute(x: DualReal) -> DualReal:
    """Pathwise absolute value (derivative sign(x), zero at the kink)."""
    if x.is_constant:
        return DualReal(np.abs(x.value), None, x.n)
    return DualReal(np.abs(x.value), x._tangent * _col(np.sign(x.value)), x.n)


def where(mask: Any, a: Any, b: Any) -> DualReal:
    """Elementwise selection; the mask is a plain (untracked) comparison."""
    n = _dimension((a, b))
    a = a if isinstance(a, DualReal) else DualReal.constant(a, n)
    b = a.lift(b)
    mask = np.asarray(mask, dtype=bool)
    value = np.where(mask, a.value, b.value)
    if a.is_constant and b.is_constant:
        return DualReal(value, None, n)
    tangent = np.where(_col(mask), a.tangent, b.tangent)
    return DualReal(value, a._fit(tangent, np.shape(value)), n)


def maximum(a: Any, b: Any) -> DualReal:
    """Pathwise maximum; ties take the first operand."""
    return where(np.asarray(_value_of(a)) >= np.asarray(_value_of(b)), a, b)


def minimum(a: Any, b: Any) -> DualReal:
    """Pathwise minimum; ties take the first operand."""
    return where(np.asarray(_value_of(a)) <= np.asarray(_value_of(b)), a, b)


def clip(x: DualReal, low: Any, high: Any) -> DualReal:
    """Pathwise clip with zero tangent on clipped entries."""
    return minimum(maximum(x, low), high)


def norm(x: DualReal, axis: int = -1) -> DualReal:
    """Euclidean norm along one axis."""
    return sqrt((x * x).sum(axis=axis))


def dot(a: DualReal, b: Any, axis: int = -1) -> DualReal:
    return (a * b).sum(axis=axis)


def stack(items: Sequence[Any], axis: int = 0) -> DualReal:
    """Stack scalars or arrays of equal shape along a new axis."""
    n = _dimension(items)
    duals = [x if isinstance(x, DualReal) else DualReal.constant(x, n) for x in items]
    value = np.stack([np.asarray(d.value) for d in duals], axis=axis)
    if all(d.is_constant for d in duals):
        return DualReal(value, None, n)
    axis = int(axis) % value.ndim
    return DualReal(value, np.stack([d.tangent for d in duals], axis=axis), n)


def concatenate(items: Sequence[DualReal], axis: int = 0) -> DualReal:
    n = _dimension(items)
    duals = [x if isinstance(x, DualReal) else DualReal.constant(x, n) for x in items]
    value = np.concatenate([np.asarray(d.value) for d in duals], axis=axis)
    if all(d.is_constant for d in duals):
        return DualReal(value, None, n)
    axis = int(axis) % value.ndim
    return DualReal(value, np.concatenate([d.tangent for d in duals], axis=axis), n)


def scatter_add(shape: Tuple[int, ...], index: Any, values: DualReal) -> DualReal:
    """Accumulate ``values`` into a zero array of ``shape`` at ``index`` (unbuffered)."""
    out = np.zeros(shape)
    np.add.at(out, index, values.value)
    if values.is_constant:
        return DualReal(out, None, values.n)
    tangent = np.zeros(tuple(shape) + (values.n,))
    np.add.at(tangent, index, values.tangent)
    return DualReal(out, tangent, values.n)


def zeros(shape: Tuple[int, ...], n: int) -> DualReal:
    return DualReal.constant(np.zeros(shape), n)


_OPERATIONS: Dict[str, Callable[..., DualReal]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": divide,
    "neg": lambda a: -a,
    "pow": lambda a, p: a ** p,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "sin": sin,
    "cos": cos,
    "abs": absolute,
    "min": minimum,
    "max": maximum,
}


def dual_arith(op: str, *args: Any) -> DualReal:
    """Apply a named elementary operation with exact chain-rule tangents.

    Args:
        op: One of ``+ - * / neg pow exp log sqrt sin cos abs min max``
        *args: Operands; at least one must be a DualReal

    Returns:
        The resulting DualReal

    Raises:
        DualArithmeticError: For undefined values (zero division, negative sqrt)
        ValueError: If the operation name is unknown
    """
    try:
        fn = _OPERATIONS[op]
    except KeyError:
        raise ValueError(f"Unknown dual operation: {op}")
    if op in ("+", "-", "*") and not isinstance(args[0], DualReal):
        args = (DualReal.constant(args[0], _dimension(args)),) + tuple(args[1:])
    return fn(*args)
