"""
Truncated multivariate Taylor series (jets).

A JetSeries stores Taylor coefficients (mixed partial divided by the
multi-index factorial) of a tensor-valued function about a base point. The
coefficient axis is always the last axis of ``coeffs``; leading axes are the
tensor shape. Monomials are ordered by total degree, so a jet space of order
N' < N is a prefix of the space of order N.
"""

import logging
import math
import string
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.special import binom

from .exceptions import JetDomainError, JetOrderError, SingularJacobianError

logger = logging.getLogger(__name__)

Number = Union[int, float, np.ndarray]

ZERO_TOL = 1e-14
PRODUCT_CHUNK = 4096


class JetSpace:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 0 or order < 0:
            raise JetOrderError(f"Invalid jet space ({nvars} vars, order {order})")
        self.nvars = nvars
        self.order = order

        exponents: List[Tuple[int, ...]] = []
        for degree in range(order + 1):
            for combo in combinations_with_replacement(range(nvars), degree):
                exponent = [0] * nvars
                for var in combo:
                    exponent[var] += 1
                exponents.append(tuple(exponent))
            if nvars == 0:
                break

        self.exponents = np.array(exponents, dtype=int).reshape(len(exponents), nvars)
        self.size = len(exponents)
        self.degrees = self.exponents.sum(axis=1)
        self.index: Dict[Tuple[int, ...], int] = {e: i for i, e in enumerate(exponents)}
        self.factorials = np.array(
            [np.prod([float(math.factorial(v)) for v in e]) if e else 1.0 for e in exponents]
        )

    def __repr__(self) -> str:
        return f"JetSpace(nvars={self.nvars}, order={self.order})"

    def block(self, degree: int) -> slice:
        """Slice of monomials with the given total degree."""
        start = int(np.searchsorted(self.degrees, degree, side="left"))
        stop = int(np.searchsorted(self.degrees, degree, side="right"))
        return slice(start, stop)

    def prefix(self, order: int) -> int:
        """Number of monomials of total degree at most ``order``."""
        return int(np.searchsorted(self.degrees, order, side="right"))

    def lower(self, order: int) -> "JetSpace":
        return jet_space(self.nvars, order)

    def monomials(self, degree: int) -> List[Tuple[int, ...]]:
        return [tuple(e) for e in self.exponents[self.block(degree)]]

    @property
    def product_table(self) -> Tuple[np.ndarray, np.ndarray, sparse.csr_matrix]:
        """Index pairs (i, j) with deg i + deg j <= order and the scatter matrix."""
        return _product_table(self.nvars, self.order)

    def derivative_table(self, var: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _derivative_table(self.nvars, self.order, var)


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


@lru_cache(maxsize=None)
def _product_table(nvars: int, order: int) -> Tuple[np.ndarray, np.ndarray, sparse.csr_matrix]:
    space = jet_space(nvars, order)
    left: List[int] = []
    right: List[int] = []
    target: List[int] = []
    for i, ei in enumerate(space.exponents):
        budget = order - space.degrees[i]
        stop = space.prefix(budget)
        for j in range(stop):
            left.append(i)
            right.append(j)
            target.append(space.index[tuple(ei + space.exponents[j])])
    count = len(left)
    scatter = sparse.csr_matrix(
        (np.ones(count), (np.arange(count), np.array(target, dtype=int))),
        shape=(count, space.size),
    )
    logger.debug(f"Built product table for {space}: {count} terms")
    return np.array(left, dtype=int), np.array(right, dtype=int), scatter


@lru_cache(maxsize=None)
def _derivative_table(nvars: int, order: int, var: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    space = jet_space(nvars, order)
    lower = jet_space(nvars, order - 1)
    src: List[int] = []
    dst: List[int] = []
    factor: List[float] = []
    for i, e in enumerate(space.exponents):
        if e[var] == 0:
            continue
        reduced = e.copy()
        reduced[var] -= 1
        src.append(i)
        dst.append(lower.index[tuple(reduced)])
        factor.append(float(e[var]))
    return np.array(src, dtype=int), np.array(dst, dtype=int), np.array(factor)


def _scatter_product(a: np.ndarray, b: np.ndarray, space: JetSpace) -> np.ndarray:
    """Coefficient product of broadcast-compatible coefficient arrays."""
    left, right, scatter = space.product_table
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    a = np.broadcast_to(a, shape + (space.size,)).reshape(-1, space.size)
    b = np.broadcast_to(b, shape + (space.size,)).reshape(-1, space.size)
    out = np.empty((a.shape[0], space.size))
    for start in range(0, a.shape[0], PRODUCT_CHUNK):
        stop = start + PRODUCT_CHUNK
        terms = a[start:stop, left] * b[start:stop, right]
        out[start:stop] = (scatter.T @ terms.T).T
    return out.reshape(shape + (space.size,))


class JetSeries:
    """Tensor-valued truncated Taylor series about ``base``."""

    __slots__ = ("coeffs", "space", "base")
    __array_ufunc__ = None

    def __init__(self, coeffs: np.ndarray, space: JetSpace, base: Optional[Sequence[float]] = None):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1:] != (space.size,):
            raise JetOrderError(
                f"Coefficient axis has length {coeffs.shape[-1:]}, expected {space.size}"
            )
        self.coeffs = coeffs
        self.space = space
        self.base = np.zeros(space.nvars) if base is None else np.asarray(base, dtype=float)

    # construction -------------------------------------------------------

    @classmethod
    def constant(cls, value: Number, space: JetSpace, base: Optional[Sequence[float]] = None) -> "JetSeries":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (space.size,))
        coeffs[..., 0] = value
        return cls(coeffs, space, base)

    @classmethod
    def zeros(cls, shape: Tuple[int, ...], space: JetSpace, base: Optional[Sequence[float]] = None) -> "JetSeries":
        return cls(np.zeros(tuple(shape) + (space.size,)), space, base)

    @classmethod
    def variables(cls, base: Sequence[float], order: int) -> "JetSeries":
        """Coordinate functions x_i as a jet of shape (nvars,)."""
        base = np.asarray(base, dtype=float)
        space = jet_space(len(base), order)
        coeffs = np.zeros((len(base), space.size))
        coeffs[:, 0] = base
        if order >= 1:
            for i in range(len(base)):
                unit = [0] * len(base)
                unit[i] = 1
                coeffs[i, space.index[tuple(unit)]] = 1.0
        return cls(coeffs, space, base)

    def like(self, coeffs: np.ndarray) -> "JetSeries":
        return JetSeries(coeffs, self.space, self.base)

    def lift(self, value: Union["JetSeries", Number]) -> "JetSeries":
        if isinstance(value, JetSeries):
            return value
        return JetSeries.constant(value, self.space, self.base)

    # basic properties ---------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def nvars(self) -> int:
        return self.space.nvars

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[..., 0]

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return f"JetSeries(shape={self.shape}, nvars={self.nvars}, order={self.order})"

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    # shape manipulation -------------------------------------------------

    def __getitem__(self, key) -> "JetSeries":
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            raise IndexError("Ellipsis indexing is not supported on jets")
        return self.like(self.coeffs[key])

    def reshape(self, *shape) -> "JetSeries":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return self.like(self.coeffs.reshape(tuple(shape) + (self.space.size,)))

    def transpose(self, *axes) -> "JetSeries":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return self.like(self.coeffs.transpose(tuple(axes) + (self.ndim,)))

    def swapaxes(self, a: int, b: int) -> "JetSeries":
        return self.like(np.swapaxes(self.coeffs, a % self.ndim, b % self.ndim))

    def sum(self, axis=None) -> "JetSeries":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis % self.ndim,)
        else:
            axis = tuple(a % self.ndim for a in axis)
        return self.like(self.coeffs.sum(axis=axis))

    def truncate(self, order: int) -> "JetSeries":
        if order > self.order:
            raise JetOrderError(f"Cannot raise jet order from {self.order} to {order}")
        if order == self.order:
            return self
        size = self.space.prefix(order)
        return JetSeries(self.coeffs[..., :size], jet_space(self.nvars, order), self.base)

    # arithmetic ---------------------------------------------------------

    def _align(self, other: "JetSeries") -> Tuple["JetSeries", "JetSeries"]:
        if other.nvars != self.nvars:
            raise JetOrderError(f"Jets in {self.nvars} and {other.nvars} variables cannot be combined")
        order = min(self.order, other.order)
        return self.truncate(order), other.truncate(order)

    def __add__(self, other) -> "JetSeries":
        if isinstance(other, JetSeries):
            a, b = self._align(other)
            return a.like(a.coeffs + b.coeffs)
        other = np.asarray(other, dtype=float)
        coeffs = self.coeffs + np.zeros(other.shape + (1,))
        coeffs[..., 0] = coeffs[..., 0] + other
        return self.like(coeffs)

    __radd__ = __add__

    def __neg__(self) -> "JetSeries":
        return self.like(-self.coeffs)

    def __sub__(self, other) -> "JetSeries":
        return self + (-other)

    def __rsub__(self, other) -> "JetSeries":
        return (-self) + other

    def __mul__(self, other) -> "JetSeries":
        if isinstance(other, JetSeries):
            a, b = self._align(other)
            return a.like(_scatter_product(a.coeffs, b.coeffs, a.space))
        other = np.asarray(other, dtype=float)
        return self.like(self.coeffs * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other) -> "JetSeries":
        if isinstance(other, JetSeries):
            return self * reciprocal(other)
        other = np.asarray(other, dtype=float)
        if np.any(np.abs(other) < ZERO_TOL):
            raise JetDomainError("Division by a zero constant")
        return self.like(self.coeffs / other[..., None])

    def __rtruediv__(self, other) -> "JetSeries":
        return reciprocal(self) * other

    def __pow__(self, exponent) -> "JetSeries":
        return power(self, exponent)

    # calculus -----------------------------------------------------------

    def derivative(self, var: int) -> "JetSeries":
        """Partial derivative in variable ``var``; the result has order N-1."""
        if self.order < 1:
            raise JetOrderError("Cannot differentiate a jet of order 0")
        src, dst, factor = self.space.derivative_table(var)
        lower = jet_space(self.nvars, self.order - 1)
        coeffs = np.zeros(self.shape + (lower.size,))
        coeffs[..., dst] = self.coeffs[..., src] * factor
        return JetSeries(coeffs, lower, self.base)

    def gradient(self) -> "JetSeries":
        """All first partials, appended as the last tensor axis."""
        parts = [self.derivative(v).coeffs for v in range(self.nvars)]
        lower = jet_space(self.nvars, self.order - 1)
        return JetSeries(np.stack(parts, axis=-2), lower, self.base)

    def antiderivative(self, var: int) -> "JetSeries":
        """Primitive in ``var`` vanishing on var = base; the result has order N+1."""
        upper = jet_space(self.nvars, self.order + 1)
        coeffs = np.zeros(self.shape + (upper.size,))
        for i, e in enumerate(self.space.exponents):
            raised = e.copy()
            raised[var] += 1
            coeffs[..., upper.index[tuple(raised)]] = self.coeffs[..., i] / raised[var]
        return JetSeries(coeffs, upper, self.base)

    def coefficient(self, exponent: Sequence[int]) -> np.ndarray:
        return self.coeffs[..., self.space.index[tuple(exponent)]]

    def partial(self, exponent: Sequence[int]) -> np.ndarray:
        """Mixed partial derivative at the base point."""
        i = self.space.index[tuple(exponent)]
        return self.coeffs[..., i] * self.space.factorials[i]

    def evaluate(self, point: Sequence[float]) -> np.ndarray:
        offset = np.asarray(point, dtype=float) - self.base
        monomials = np.prod(offset[None, :] ** self.space.exponents, axis=1)
        return self.coeffs @ monomials

    def degree_part(self, degree: int) -> np.ndarray:
        return self.coeffs[..., self.space.block(degree)]

    def compose(self, inner: "JetSeries") -> "JetSeries":
        """Substitute ``inner`` (shape (nvars,), value at our base) for our variables."""
        if inner.shape != (self.nvars,):
            raise JetOrderError(f"Inner map has shape {inner.shape}, expected ({self.nvars},)")
        if not np.allclose(inner.value, self.base, atol=1e-10):
            raise JetDomainError(
                f"Inner map value {inner.value} does not match base point {self.base}"
            )
        order = min(self.order, inner.order)
        outer = self.truncate(order)
        matrix = substitution_matrix(inner - self.base, order)
        return JetSeries(outer.coeffs @ matrix, inner.space.lower(order), inner.base)


def substitution_matrix(offset: JetSeries, order: int) -> np.ndarray:
    """Rows are the jets of offset**e for every monomial e up to ``order``."""
    inner = offset.truncate(min(order, offset.order))
    outer_space = jet_space(offset.shape[0], order)
    rows = np.zeros((outer_space.size, inner.space.size))
    rows[0, 0] = 1.0
    for degree in range(1, order + 1):
        block = outer_space.block(degree)
        parents = []
        factors = []
        for e in outer_space.exponents[block]:
            var = int(np.nonzero(e)[0][-1])
            reduced = e.copy()
            reduced[var] -= 1
            parents.append(outer_space.index[tuple(reduced)])
            factors.append(var)
        rows[block] = _scatter_product(
            rows[parents], inner.coeffs[factors], inner.space
        )
    return rows


# elementwise functions ----------------------------------------------------


def _apply_taylor(a: JetSeries, taylor: np.ndarray) -> JetSeries:
    """Compose a univariate function, given by its Taylor coefficients, with ``a``."""
    offset = a.like(a.coeffs.copy())
    offset.coeffs[..., 0] = 0.0
    result = np.zeros_like(a.coeffs)
    result[..., 0] = taylor[..., 0]
    term = offset
    for j in range(1, a.order + 1):
        result = result + taylor[..., j, None] * term.coeffs
        if j < a.order:
            term = term * offset
    return a.like(result)


def _orders(a: JetSeries) -> np.ndarray:
    return np.arange(a.order + 1, dtype=float)


def _factorials(n: int) -> np.ndarray:
    return np.array([float(math.factorial(j)) for j in range(n + 1)])


def exp(a: JetSeries) -> JetSeries:
    a0 = a.value[..., None]
    return _apply_taylor(a, np.exp(a0) / _factorials(a.order))


def log(a: JetSeries) -> JetSeries:
    a0 = a.value
    if np.any(a0 <= 0):
        raise JetDomainError(f"log of nonpositive constant term {np.min(a0)}")
    j = _orders(a)
    with np.errstate(divide="ignore"):
        taylor = (-1.0) ** (j + 1) / (np.where(j == 0, 1.0, j) * a0[..., None] ** j)
    taylor[..., 0] = np.log(a0)
    return _apply_taylor(a, taylor)


def sin(a: JetSeries) -> JetSeries:
    shift = _orders(a) * np.pi / 2
    return _apply_taylor(a, np.sin(a.value[..., None] + shift) / _factorials(a.order))


def cos(a: JetSeries) -> JetSeries:
    shift = _orders(a) * np.pi / 2
    return _apply_taylor(a, np.cos(a.value[..., None] + shift) / _factorials(a.order))


def tan(a: JetSeries) -> JetSeries:
    return sin(a) / cos(a)


def sinh(a: JetSeries) -> JetSeries:
    a0 = a.value[..., None]
    even = _orders(a) % 2 == 0
    return _apply_taylor(a, np.where(even, np.sinh(a0), np.cosh(a0)) / _factorials(a.order))


def cosh(a: JetSeries) -> JetSeries:
    a0 = a.value[..., None]
    even = _orders(a) % 2 == 0
    return _apply_taylor(a, np.where(even, np.cosh(a0), np.sinh(a0)) / _factorials(a.order))


def reciprocal(a: JetSeries) -> JetSeries:
    a0 = a.value
    if np.any(np.abs(a0) < ZERO_TOL):
        raise JetDomainError("Division by a jet with zero constant term")
    j = _orders(a)
    return _apply_taylor(a, (-1.0) ** j / a0[..., None] ** (j + 1))


def power(a: JetSeries, exponent: float) -> JetSeries:
    """a**exponent; integer exponents use repeated products, others need a > 0."""
    if float(exponent).is_integer():
        n = int(exponent)
        if n < 0:
            return reciprocal(power(a, -n))
        result = a.lift(np.ones(a.shape))
        base = a
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result
    a0 = a.value
    if np.any(a0 <= 0):
        raise JetDomainError(f"Non-integer power of nonpositive constant term {np.min(a0)}")
    j = _orders(a)
    return _apply_taylor(a, binom(exponent, j) * a0[..., None] ** (exponent - j))


def sqrt(a: JetSeries) -> JetSeries:
    return power(a, 0.5)


# tensor helpers -----------------------------------------------------------


def stack(jets: Sequence[JetSeries], axis: int = 0) -> JetSeries:
    order = min(j.order for j in jets)
    jets = [j.truncate(order) for j in jets]
    ndim = jets[0].ndim + 1
    return jets[0].like(np.stack([j.coeffs for j in jets], axis=axis % ndim))


def concatenate(jets: Sequence[JetSeries], axis: int = 0) -> JetSeries:
    order = min(j.order for j in jets)
    jets = [j.truncate(order) for j in jets]
    ndim = jets[0].ndim
    return jets[0].like(np.concatenate([j.coeffs for j in jets], axis=axis % ndim))


def jet_einsum(subscripts: str, *operands: Union[JetSeries, np.ndarray]) -> Union[JetSeries, np.ndarray]:
    """numpy.einsum over tensor axes, multiplying jet entries as truncated series."""
    inputs, output = subscripts.replace(" ", "").split("->")
    terms = inputs.split(",")
    if len(terms) != len(operands):
        raise ValueError(f"{len(terms)} subscripts for {len(operands)} operands")
    free = [c for c in string.ascii_letters if c not in subscripts]
    series = free[0]

    jets = [op for op in operands if isinstance(op, JetSeries)]
    if not jets:
        return np.einsum(subscripts, *operands)
    order = min(j.order for j in jets)
    space = jets[0].space.lower(order)
    base = jets[0].base

    current = operands[0]
    current_term = terms[0]
    for position in range(1, len(operands)):
        later = "".join(terms[position + 1:]) + output
        nxt = operands[position]
        term = terms[position]
        keep = "".join(
            dict.fromkeys(c for c in current_term + term if c in later)
        )
        current, current_term = _contract_pair(current, current_term, nxt, term, keep, space, series)
    current = current.truncate(order)
    if current_term != output:
        coeffs = np.einsum(f"{current_term}{series}->{output}{series}", current.coeffs)
        current = JetSeries(coeffs, space, base)
    return current


def _contract_pair(a, a_term: str, b, b_term: str, keep: str, space: JetSpace, series: str):
    a_jet = isinstance(a, JetSeries)
    b_jet = isinstance(b, JetSeries)
    if a_jet and b_jet:
        a = a.truncate(space.order)
        b = b.truncate(space.order)
        left, right, scatter = space.product_table
        terms = np.einsum(
            f"{a_term}{series},{b_term}{series}->{keep}{series}",
            a.coeffs[..., left],
            b.coeffs[..., right],
        )
        flat = terms.reshape(-1, terms.shape[-1])
        coeffs = (scatter.T @ flat.T).T.reshape(terms.shape[:-1] + (space.size,))
        return JetSeries(coeffs, space, a.base), keep
    if a_jet:
        a = a.truncate(space.order)
        coeffs = np.einsum(f"{a_term}{series},{b_term}->{keep}{series}", a.coeffs, b)
        return JetSeries(coeffs, space, a.base), keep
    if b_jet:
        b = b.truncate(space.order)
        coeffs = np.einsum(f"{a_term},{b_term}{series}->{keep}{series}", a, b.coeffs)
        return JetSeries(coeffs, space, b.base), keep
    return np.einsum(f"{a_term},{b_term}->{keep}", a, b), keep


def jet_inverse_matrix(matrix: JetSeries) -> JetSeries:
    """Inverse of a square matrix of jets via the terminating Neumann series."""
    value = matrix.value
    try:
        value_inv = np.linalg.inv(value)
    except np.linalg.LinAlgError as e:
        raise SingularJacobianError(f"Matrix is singular at the base point: {e}")
    nilpotent = matrix - value
    step = jet_einsum("ij,jk->ik", -value_inv, nilpotent)
    result = matrix.lift(value_inv)
    term = result
    for _ in range(matrix.order):
        term = jet_einsum("ij,jk->ik", step, term)
        result = result + term
    return result


def jet_determinant(matrix: JetSeries) -> JetSeries:
    """Determinant by cofactor expansion (small matrices only)."""
    n = matrix.shape[0]
    if n == 1:
        return matrix[0, 0]
    if n == 2:
        return matrix[0, 0] * matrix[1, 1] - matrix[0, 1] * matrix[1, 0]
    total = matrix[0, 0] * 0.0
    for col in range(n):
        minor_rows = [r for r in range(1, n)]
        minor_cols = [c for c in range(n) if c != col]
        minor = matrix.like(matrix.coeffs[np.ix_(minor_rows, minor_cols)])
        sign = -1.0 if col % 2 else 1.0
        total = total + sign * matrix[0, col] * jet_determinant(minor)
    return total


def pad(a: JetSeries, order: int) -> JetSeries:
    """Raise the order with zero coefficients.

    Exact only when the product it feeds vanishes to the missing degrees, e.g. a
    fiber-constant coefficient multiplying s^(m+1).
    """
    if order <= a.order:
        return a.truncate(order)
    space = jet_space(a.nvars, order)
    coeffs = np.zeros(a.shape + (space.size,))
    coeffs[..., : a.space.size] = a.coeffs
    return JetSeries(coeffs, space, a.base)


def identity_map(base: Sequence[float], order: int) -> JetSeries:
    return JetSeries.variables(base, order)


def jet_map_inverse(f: JetSeries, iterations: Optional[int] = None) -> JetSeries:
    """Invert a square jet map f: x -> y about f.base, returning g: y -> x about f.value.

    Uses the chord iteration g <- g - L^{-1}(f o g - y) with L the Jacobian at the
    base point; each pass fixes one more order.
    """
    if f.ndim != 1 or f.shape[0] != f.nvars:
        raise SingularJacobianError(f"Map of shape {f.shape} in {f.nvars} variables is not square")
    if f.order < 1:
        raise JetOrderError("Map inversion needs jet order >= 1")
    jacobian = f.gradient().value
    cond = np.linalg.cond(jacobian)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularJacobianError(f"Jacobian is singular at the base point (cond={cond:.3e})")
    jac_inv = np.linalg.inv(jacobian)

    target = JetSeries.variables(f.value, f.order)
    guess = _linear_guess(f, target, jac_inv)
    for _ in range(iterations or f.order):
        residual = f.compose(guess) - target
        correction = target.like(np.einsum("ij,jm->im", jac_inv, residual.coeffs))
        guess = guess - correction
    logger.debug(f"Inverted jet map in {f.nvars} variables to order {f.order}")
    return guess


def _linear_guess(f: JetSeries, target: JetSeries, jac_inv: np.ndarray) -> JetSeries:
    offset = target - f.value
    coeffs = np.einsum("ij,jm->im", jac_inv, offset.coeffs)
    coeffs[:, 0] = f.base
    return target.like(coeffs)


def max_coefficient(values: Iterable[Union[JetSeries, np.ndarray, float]]) -> float:
    """Largest absolute coefficient across jets and plain arrays."""
    best = 0.0
    for v in values:
        if isinstance(v, JetSeries):
            best = max(best, v.max_abs())
        else:
            arr = np.asarray(v)
            if arr.size:
                best = max(best, float(np.max(np.abs(arr))))
    return best
