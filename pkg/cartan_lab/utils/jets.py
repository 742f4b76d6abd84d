"""Truncated multivariate Taylor arithmetic.

A Jet holds the Taylor coefficients c_a = (d^a f)(z0) / a! of a function of
``dim`` variables around a base point z0, for every multi-index a with
|a| <= order. Coefficients live in one flat array sorted by total degree, so
truncating to a lower order is a prefix slice. Leading array axes are tensor
indices: an n x n matrix of jets is a single Jet of shape (n, n), and a
scalar jet has shape ().

Products are computed from a precomputed table of coefficient pairs whose
degrees add up to at most the order, followed by a segmented sum. Division,
roots, exp, log, sin and cos compose a Taylor series with the nilpotent part
of the argument, so the value slot is always computed exactly as the plain
floating-point operation would compute it.
"""

import itertools
import math
from functools import lru_cache

import numpy as np

from cartan_lab.utils.errors import DivisionByZero, DomainError, SingularMetric

MAX_ORDER = 6
_EINSUM_LETTERS = 'zyxwvutsrqponmlkjihgfedcba'


class MonomialBasis:
    """Graded table of multi-indices in ``dim`` variables up to MAX_ORDER.

    Attributes:
        exponents: (M, dim) integer array of multi-indices, graded order
        degrees: total degree of every multi-index
        sizes: sizes[k] is the number of multi-indices of degree <= k
        factorials: a! for every multi-index
    """

    def __init__(self, dim):
        self.dim = dim
        exponents = []
        for degree in range(MAX_ORDER + 1):
            for combo in itertools.combinations_with_replacement(range(dim), degree):
                exponent = [0] * dim
                for axis in combo:
                    exponent[axis] += 1
                exponents.append(exponent)
        self.exponents = np.array(exponents, dtype=np.int64).reshape(-1, dim)
        self.degrees = self.exponents.sum(axis=1)
        self.sizes = [math.comb(dim + k, k) for k in range(MAX_ORDER + 1)]
        self.factorials = np.array(
            [math.prod(math.factorial(int(e)) for e in row) for row in self.exponents], dtype=float)

        # Base MAX_ORDER+1 digits never carry when two monomials of total degree <= MAX_ORDER are added.
        self._weights = (MAX_ORDER + 1) ** np.arange(dim, dtype=np.int64)
        self.keys = self.exponents @ self._weights
        self._sorter = np.argsort(self.keys)
        self._sorted_keys = self.keys[self._sorter]
        self._products = {}
        self._derivatives = {}

    def index_of(self, keys):
        """Flat slots of packed multi-index keys."""
        return self._sorter[np.searchsorted(self._sorted_keys, keys)]

    def slot(self, exponent):
        """Return the flat slot of one multi-index."""
        return int(self.index_of(np.asarray(exponent, dtype=np.int64) @ self._weights))

    def product_table(self, order):
        """Pairs (left, right) of slots with deg(left) + deg(right) <= order.

        Returns:
            tuple: (left, right, starts) where the pairs are sorted by the
            slot of their product and ``starts`` marks the first pair of
            every target slot 0..sizes[order]-1.
        """
        table = self._products.get(order)
        if table is None:
            size = self.sizes[order]
            counts = [self.sizes[order - d] for d in self.degrees[:size]]
            left = np.repeat(np.arange(size), counts)
            right = np.concatenate([np.arange(count) for count in counts])
            target = self.index_of(self.keys[left] + self.keys[right])
            permutation = np.argsort(target, kind='stable')
            left, right, target = left[permutation], right[permutation], target[permutation]
            starts = np.flatnonzero(np.diff(target, prepend=-1))
            table = (left, right, starts)
            self._products[order] = table
        return table

    def derivative_table(self, order):
        """Source slots and factors of d/dz_k taking an order-``order`` jet to order-1.

        Returns:
            tuple: (sources, factors), both of shape (dim, sizes[order-1])
        """
        table = self._derivatives.get(order)
        if table is None:
            size = self.sizes[order - 1]
            base = self.keys[:size]
            sources = np.stack([self.index_of(base + weight) for weight in self._weights])
            factors = (self.exponents[:size].T + 1).astype(float)
            table = (sources, factors)
            self._derivatives[order] = table
        return table


@lru_cache(maxsize=None)
def monomial_basis(dim):
    """Basis of ``dim`` variables, built once per dimension."""
    return MonomialBasis(dim)


def _product(a, b, basis, order):
    left, right, starts = basis.product_table(order)
    return np.add.reduceat(a[..., left] * b[..., right], starts, axis=-1)


def _aligned(a, b):
    if a.dim != b.dim:
        raise ValueError(f"Cannot combine jets in {a.dim} and {b.dim} variables")
    order = min(a.order, b.order)
    return a.truncate(order), b.truncate(order)


class Jet:
    """Tensor of truncated Taylor expansions in ``dim`` variables.

    Supports +, -, *, / with other jets, floats and numpy arrays
    (broadcasting over the tensor axes), the elementary functions used by
    the expression language, matrix inversion and differentiation. Mixing
    orders truncates to the lowest one.
    """

    __slots__ = ('coeffs', 'order', 'dim')
    __array_ufunc__ = None

    def __init__(self, coeffs, order, dim):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.order = order
        self.dim = dim

    @classmethod
    def constant(cls, value, order, dim):
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (monomial_basis(dim).sizes[order],))
        coeffs[..., 0] = value
        return cls(coeffs, order, dim)

    @classmethod
    def zeros(cls, shape, order, dim):
        return cls.constant(np.zeros(shape), order, dim)

    @classmethod
    def variable(cls, value, direction, order, dim):
        """Seed variable ``direction`` at ``value``: unit first-order coefficient."""
        jet = cls.constant(value, order, dim)
        if order >= 1:
            jet.coeffs[..., 1 + direction] = 1.0
        return jet

    @property
    def basis(self):
        return monomial_basis(self.dim)

    @property
    def shape(self):
        return self.coeffs.shape[:-1]

    @property
    def ndim(self):
        return self.coeffs.ndim - 1

    @property
    def value(self):
        return self.coeffs[..., 0]

    def truncate(self, order):
        """Drop the coefficients above ``order``."""
        if order >= self.order:
            return self
        return Jet(self.coeffs[..., :self.basis.sizes[order]], order, self.dim)

    def coefficients(self):
        """Map every non-constant multi-index of a scalar jet to its coefficient."""
        if self.ndim:
            raise ValueError("coefficients() is defined for scalar jets only")
        size = self.basis.sizes[self.order]
        return {tuple(int(e) for e in self.basis.exponents[slot]): float(self.coeffs[slot])
                for slot in range(1, size)}

    def derivative_value(self, directions):
        """Value of the mixed partial along ``directions`` (variable indices, repeats allowed)."""
        exponent = np.bincount(np.asarray(directions, dtype=np.int64), minlength=self.dim)
        if len(directions) > self.order:
            raise ValueError(f"Derivative of order {len(directions)} exceeds jet order {self.order}")
        slot = self.basis.slot(exponent)
        return self.coeffs[..., slot] * self.basis.factorials[slot]

    # arithmetic

    def __neg__(self):
        return Jet(-self.coeffs, self.order, self.dim)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = _aligned(self, other)
            return Jet(a.coeffs + b.coeffs, a.order, a.dim)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        coeffs = np.array(np.broadcast_to(self.coeffs, shape + self.coeffs.shape[-1:]))
        coeffs[..., 0] += other
        return Jet(coeffs, self.order, self.dim)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = _aligned(self, other)
            return Jet(_product(a.coeffs, b.coeffs, a.basis, a.order), a.order, a.dim)
        other = np.asarray(other, dtype=float)
        return Jet(self.coeffs * other[..., None], self.order, self.dim)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if np.any(other == 0.0):
                raise DivisionByZero("Division by zero")
            return Jet(self.coeffs / other[..., None], self.order, self.dim)
        a, b = _aligned(self, other)
        if np.any(b.value == 0.0):
            raise DivisionByZero("Division by a jet with zero value")
        scale = np.asarray(b.value)[..., None]
        nilpotent = b.coeffs.copy()
        nilpotent[..., 0] = 0.0
        quotient = a.coeffs / scale
        # q = (a - h q) / b0 is exact after `order` sweeps because h has no constant term.
        for _ in range(a.order):
            quotient = (a.coeffs - _product(nilpotent, quotient, a.basis, a.order)) / scale
        return Jet(quotient, a.order, a.dim)

    def __rtruediv__(self, other):
        return Jet.constant(np.asarray(other, dtype=float), self.order, self.dim) / self

    # elementary functions

    def _compose(self, taylor):
        """Apply f where taylor[k] holds f^(k)(value)/k! for k = 0..order."""
        nilpotent = self.coeffs.copy()
        nilpotent[..., 0] = 0.0
        result = np.zeros_like(self.coeffs)
        result[..., 0] = taylor[self.order]
        for k in range(self.order - 1, -1, -1):
            result = _product(result, nilpotent, self.basis, self.order)
            result[..., 0] += taylor[k]
        return Jet(result, self.order, self.dim)

    def _binomial(self, lead, exponent):
        value = self.value
        taylor = [lead]
        for k in range(self.order):
            taylor.append(taylor[-1] * (exponent - k) / ((k + 1) * value))
        return self._compose(taylor)

    def sqrt(self):
        if np.any(self.value <= 0.0):
            raise DomainError("sqrt of a non-positive value")
        return self._binomial(np.sqrt(self.value), 0.5)

    def power(self, exponent):
        if np.any(self.value <= 0.0):
            raise DomainError("Real power of a non-positive value")
        return self._binomial(np.power(self.value, exponent), exponent)

    def exp(self):
        lead = np.exp(self.value)
        return self._compose([lead / math.factorial(k) for k in range(self.order + 1)])

    def log(self):
        value = self.value
        if np.any(value <= 0.0):
            raise DomainError("log of a non-positive value")
        taylor = [np.log(value)]
        taylor += [(-1.0) ** (k + 1) / (k * value ** k) for k in range(1, self.order + 1)]
        return self._compose(taylor)

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = (s, c, -s, -c)
        return self._compose([cycle[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = (c, -s, -c, s)
        return self._compose([cycle[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    # tensor structure

    def __getitem__(self, key):
        return Jet(self.coeffs[key], self.order, self.dim)

    def transpose(self, *axes):
        return Jet(self.coeffs.transpose(tuple(axes) + (self.ndim,)), self.order, self.dim)

    def reshape(self, *shape):
        return Jet(self.coeffs.reshape(tuple(shape) + self.coeffs.shape[-1:]), self.order, self.dim)

    def sum(self, axis):
        return Jet(self.coeffs.sum(axis=axis), self.order, self.dim)

    def inv(self):
        """Inverse of a square jet matrix.

        The value part is inverted by LU with partial pivoting; higher
        coefficients follow from A^-1 = sum_k (-A0^-1 H)^k A0^-1 with H the
        nilpotent part, which terminates at the jet order.

        Raises:
            SingularMetric: If the value part is singular
        """
        if self.ndim != 2 or self.shape[0] != self.shape[1]:
            raise ValueError(f"inv() needs a square matrix, got shape {self.shape}")
        value = self.value
        try:
            lead = np.linalg.solve(value, np.eye(self.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise SingularMetric("Matrix is singular at the base point") from exc
        if not np.all(np.isfinite(lead)):
            raise SingularMetric("Matrix inverse is not finite at the base point")
        nilpotent = Jet(self.coeffs.copy(), self.order, self.dim)
        nilpotent.coeffs[..., 0] = 0.0
        lead_jet = Jet.constant(lead, self.order, self.dim)
        step = jet_einsum('ij,jk->ik', lead, nilpotent)
        result = lead_jet
        for _ in range(self.order):
            result = lead_jet - jet_einsum('ij,jk->ik', step, result)
        return result

    # differentiation

    def partials(self):
        """First partials along all variables, stacked on a new leading axis (order drops by one)."""
        if self.order == 0:
            raise ValueError("An order-0 jet carries no derivatives")
        sources, factors = self.basis.derivative_table(self.order)
        stacked = self.coeffs[..., sources] * factors
        return Jet(np.moveaxis(stacked, -2, 0), self.order - 1, self.dim)

    def partial(self, direction):
        if self.order == 0:
            raise ValueError("An order-0 jet carries no derivatives")
        sources, factors = self.basis.derivative_table(self.order)
        return Jet(self.coeffs[..., sources[direction]] * factors[direction], self.order - 1, self.dim)

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order}, dim={self.dim})"


def jet_einsum(subscripts, *operands):
    """Einstein summation over tensor axes of jets and plain arrays.

    At most two operands may be jets; products of two jets are truncated
    at the lower of their orders.
    """
    inputs, output = subscripts.replace(' ', '').split('->')
    terms = inputs.split(',')
    jets = [op for op in operands if isinstance(op, Jet)]
    if not jets:
        return np.einsum(subscripts, *operands)
    letter = next(c for c in _EINSUM_LETTERS if c not in subscripts)
    order = min(jet.order for jet in jets)
    dim = jets[0].dim
    if len(jets) == 1:
        specs = [term + letter if isinstance(op, Jet) else term for term, op in zip(terms, operands)]
        arrays = [op.truncate(order).coeffs if isinstance(op, Jet) else op for op in operands]
        return Jet(np.einsum(','.join(specs) + '->' + output + letter, *arrays), order, dim)
    if len(operands) != 2:
        raise ValueError("jet_einsum contracts at most two jet operands at once")
    left, right, starts = monomial_basis(dim).product_table(order)
    a = operands[0].truncate(order).coeffs[..., left]
    b = operands[1].truncate(order).coeffs[..., right]
    spec = f'{terms[0]}{letter},{terms[1]}{letter}->{output}{letter}'
    return Jet(np.add.reduceat(np.einsum(spec, a, b), starts, axis=-1), order, dim)


def jet_concatenate(jets, axis=0):
    order = min(jet.order for jet in jets)
    return Jet(np.concatenate([jet.truncate(order).coeffs for jet in jets], axis=axis), order, jets[0].dim)


def jet_block_diag(first, second):
    """Block-diagonal jet matrix diag(first, second)."""
    order = min(first.order, second.order)
    upper = Jet.zeros((first.shape[0], second.shape[1]), order, first.dim)
    lower = Jet.zeros((second.shape[0], first.shape[1]), order, first.dim)
    top = jet_concatenate([first.truncate(order), upper], axis=1)
    bottom = jet_concatenate([lower, second.truncate(order)], axis=1)
    return jet_concatenate([top, bottom], axis=0)
