from functools import lru_cache
from typing import Dict, Optional

import numpy as np

from app.core.config import settings
from app.core.exceptions import ElaborationError


class GaloisField:
    """Arithmetic in GF(2^κ) with log/antilog tables.

    Products are defined by carry-less multiplication reduced by the
    configured irreducible polynomial; the tables are derived from that
    definition by locating a generator of the multiplicative group.
    """

    # --- Configuration constants ---
    MIN_WIDTH = 1
    MAX_WIDTH = 16

    def __init__(self, width: int, polynomial: int):
        if not self.MIN_WIDTH <= width <= self.MAX_WIDTH:
            raise ElaborationError(f"word width {width} outside 1..16")
        if polynomial >> width != 1:
            raise ElaborationError(f"polynomial {polynomial:#x} is not of degree {width}")

        self.width = width
        self.polynomial = polynomial
        self.size = 1 << width
        self.mask = self.size - 1
        self.order = self.size - 1

        self.generator = self._find_generator()
        exp = np.zeros(2 * self.order, dtype=np.uint64)
        log = np.zeros(self.size, dtype=np.uint64)
        value = 1
        for power in range(self.order):
            exp[power] = value
            log[value] = power
            value = self.clmul(value, self.generator)
        exp[self.order:] = exp[: self.order]
        self.exp_table = exp
        self.log_table = log

    # === Scalar arithmetic ===

    def clmul(self, a: int, b: int) -> int:
        """Carry-less product of `a` and `b` reduced modulo the polynomial."""
        result = 0
        a &= self.mask
        b &= self.mask
        top = 1 << (self.width - 1)
        for _ in range(self.width):
            if b & 1:
                result ^= a
            carry = a & top
            a = (a << 1) & self.mask
            if carry:
                a ^= self.polynomial & self.mask
            b >>= 1
        return result

    def mul(self, a: int, b: int) -> int:
        """Table-based product."""
        if a == 0 or b == 0:
            return 0
        return int(self.exp_table[int(self.log_table[a]) + int(self.log_table[b])])

    def inverse(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return int(self.exp_table[(self.order - int(self.log_table[a])) % self.order])

    # === Vectorised arithmetic ===

    def mul_array(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Element-wise product of two uint64 arrays (or scalars)."""
        a = np.asarray(a, dtype=np.uint64)
        b = np.asarray(b, dtype=np.uint64)
        a, b = np.broadcast_arrays(a, b)
        product = self.exp_table[self.log_table[a] + self.log_table[b]]
        return np.where((a == 0) | (b == 0), np.uint64(0), product)

    def _find_generator(self) -> int:
        if self.order == 1:
            return 1
        for candidate in range(2, self.size):
            value = 1
            seen = 0
            for _ in range(self.order):
                value = self.clmul(value, candidate)
                seen += 1
                if value == 1:
                    break
            if seen == self.order and value == 1:
                return candidate
        raise ElaborationError(f"polynomial {self.polynomial:#x} is not irreducible over GF(2)")

    def __repr__(self) -> str:
        return f"<GaloisField(width={self.width}, polynomial={self.polynomial:#x})>"


def polynomial_for(width: int, polynomials: Optional[Dict[int, int]] = None) -> int:
    """Configured irreducible polynomial for a word width."""
    table = polynomials if polynomials is not None else settings.IRREDUCIBLE_POLYNOMIALS
    if width not in table:
        raise ElaborationError(f"no irreducible polynomial configured for width {width}")
    return table[width]


@lru_cache(maxsize=None)
def _cached_field(width: int, polynomial: int) -> GaloisField:
    return GaloisField(width, polynomial)


def field_for(width: int, polynomials: Optional[Dict[int, int]] = None) -> GaloisField:
    """Shared `GaloisField` for a width; fields are immutable once built."""
    return _cached_field(width, polynomial_for(width, polynomials))
