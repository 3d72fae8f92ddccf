"""Finite fields GF(p^m) with table-driven arithmetic.

Elements are plain ints in ``range(q)``.  An element of GF(p^m) is the
polynomial ``c_0 + c_1 x + ... + c_{m-1} x^{m-1}`` encoded as
``sum(c_i * p**i)``.  Every operation accepts Python ints or integer numpy
arrays, so whole batches of channel draws can be pushed through at once.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

MAX_ORDER = 2**16

# Conway polynomials, coefficients low -> high, monic.  Every entry is
# re-checked for irreducibility and primitivity when a field is built.
_CONWAY = {
    (2, 2): (1, 1, 1),
    (2, 3): (1, 1, 0, 1),
    (2, 4): (1, 1, 0, 0, 1),
    (3, 2): (2, 2, 1),
    (3, 3): (1, 2, 0, 1),
    (3, 4): (2, 0, 0, 2, 1),
    (5, 2): (2, 4, 1),
    (5, 3): (3, 3, 0, 1),
    (5, 4): (2, 4, 4, 0, 1),
    (7, 2): (3, 6, 1),
    (7, 3): (4, 0, 6, 1),
    (7, 4): (3, 4, 5, 0, 1),
    (11, 2): (2, 7, 1),
    (13, 2): (2, 12, 1),
}

# fields up to this order get full q x q add/mul tables
_TABLE_LIMIT = 256


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


def prime_power(q: int) -> tuple[int, int]:
    """Split ``q`` into ``(p, m)`` with ``q == p**m``; ValueError otherwise."""
    if q < 2:
        raise ValueError(f"field order must be >= 2, got {q}")
    p = 2
    while q % p:
        p += 1
    m, r = 0, q
    while r % p == 0:
        r //= p
        m += 1
    if r != 1:
        raise ValueError(f"{q} is not a prime power")
    return p, m


def _poly_mod(a: list[int], f: tuple[int, ...], p: int) -> list[int]:
    """Remainder of ``a`` by monic ``f`` over GF(p); lists are low -> high."""
    a = list(a)
    d = len(f) - 1
    for i in range(len(a) - 1, d - 1, -1):
        c = a[i] % p
        if c:
            for j in range(d + 1):
                a[i - d + j] = (a[i - d + j] - c * f[j]) % p
    return [c % p for c in a[:d]] if len(a) >= d else [c % p for c in a]


def is_irreducible(f: tuple[int, ...], p: int) -> bool:
    """Trial division of monic ``f`` by every monic polynomial of degree <= deg/2."""
    d = len(f) - 1
    if d < 1 or f[-1] != 1:
        return False
    if d == 1:
        return True
    for k in range(1, d // 2 + 1):
        for low in product(range(p), repeat=k):
            g = tuple(low) + (1,)
            if not any(_poly_mod(list(f), g, p)):
                return False
    return True


def _power_table(f: tuple[int, ...], p: int) -> list[int] | None:
    """Successive powers of x modulo ``f``, or None when x is not primitive."""
    m = len(f) - 1
    q = p**m
    weights = [p**i for i in range(m)]
    digits = [1] + [0] * (m - 1)
    powers = [1]
    for _ in range(q - 2):
        top = digits[-1]
        digits = [0] + digits[:-1]
        if top:
            digits = [(digits[i] - top * f[i]) % p for i in range(m)]
        v = sum(c * w for c, w in zip(digits, weights))
        if v == 1:
            return None
        powers.append(v)
    # x^(q-1) must come back to 1
    top = digits[-1]
    digits = [0] + digits[:-1]
    if top:
        digits = [(digits[i] - top * f[i]) % p for i in range(m)]
    if sum(c * w for c, w in zip(digits, weights)) != 1:
        return None
    return powers


def _first_primitive(p: int, m: int) -> tuple[tuple[int, ...], list[int]]:
    # lexicographic order on (c_{m-1}, ..., c_0) keeps the choice reproducible
    for high_first in product(range(p), repeat=m):
        f = tuple(reversed(high_first)) + (1,)
        if f[0] == 0 or not is_irreducible(f, p):
            continue
        powers = _power_table(f, p)
        if powers is not None:
            return f, powers
    raise RuntimeError(f"no primitive polynomial found for GF({p}^{m})")


class GF:
    """The finite field with ``q = p**m`` elements.

    Build instances through :func:`field_make` or :func:`parse_field` so that
    equal fields are the same object.
    """

    def __init__(self, p: int, m: int = 1):
        if not _is_prime(p):
            raise ValueError(f"characteristic {p} is not prime")
        if m < 1:
            raise ValueError("extension degree must be >= 1")
        q = p**m
        if q > MAX_ORDER:
            raise ValueError(f"GF({q}) exceeds the supported order {MAX_ORDER}")
        self.p, self.m, self.q = p, m, q

        if m == 1:
            self.poly = (0, 1)
            g = _primitive_root(p)
            powers = [pow(g, k, p) for k in range(p - 1)]
        else:
            f = _CONWAY.get((p, m))
            if f is not None:
                if not is_irreducible(f, p):
                    raise RuntimeError(f"tabulated polynomial for GF({q}) is reducible")
                powers = _power_table(f, p)
                if powers is None:
                    raise RuntimeError(f"tabulated polynomial for GF({q}) is not primitive")
            else:
                f, powers = _first_primitive(p, m)
            self.poly = f

        exp = np.array(powers + powers, dtype=np.int64)
        log = np.zeros(q, dtype=np.int64)
        log[exp[: q - 1]] = np.arange(q - 1)
        self._exp, self._log = exp, log
        self._exp_list = exp.tolist()
        self._log_list = log.tolist()
        inv = np.zeros(q, dtype=np.int64)
        inv[1:] = exp[(q - 1 - log[1:]) % (q - 1)]
        self._inv = inv
        self._inv_list = inv.tolist()

        elems = np.arange(q, dtype=np.int64)
        self._weights = p ** np.arange(m, dtype=np.int64)
        self._neg = self._digitwise(lambda d: (-d) % p, elems)
        self._neg_list = self._neg.tolist()
        if q <= _TABLE_LIMIT:
            a, b = np.meshgrid(elems, elems, indexing="ij")
            self._add_table = self._add_vec(a, b)
            self._mul_table = self._mul_vec(a, b)
            self._add_list = self._add_table.tolist()
            self._mul_list = self._mul_table.tolist()
        else:
            self._add_table = self._mul_table = None

    # -- internal vector kernels ------------------------------------------

    def _digitwise(self, fn, *arrays):
        out = np.zeros(np.broadcast(*arrays).shape, dtype=np.int64)
        for i, w in enumerate(self._weights):
            digits = [(a // w) % self.p for a in arrays]
            out += fn(*digits) * w
        return out

    def _add_vec(self, a, b):
        if self.m == 1:
            return (a + b) % self.p
        if self.p == 2:
            return np.bitwise_xor(a, b)
        return self._digitwise(lambda x, y: (x + y) % self.p, a, b)

    def _mul_vec(self, a, b):
        if self.m == 1:
            return (a * b) % self.p
        a, b = np.broadcast_arrays(a, b)
        out = self._exp[self._log[a] + self._log[b]]
        return np.where((a == 0) | (b == 0), 0, out)

    # -- public arithmetic --------------------------------------------------

    def add(self, a, b):
        if type(a) is int and type(b) is int:
            if self.m == 1:
                return (a + b) % self.p
            if self.p == 2:
                return a ^ b
            if self._add_table is not None:
                return self._add_list[a][b]
            return int(self._add_vec(np.int64(a), np.int64(b)))
        a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
        if self._add_table is not None and self.m > 1 and self.p != 2:
            return self._add_table[a, b]
        return self._add_vec(a, b)

    def neg(self, a):
        if type(a) is int:
            return self._neg_list[a]
        return self._neg[np.asarray(a, dtype=np.int64)]

    def sub(self, a, b):
        if type(a) is int and type(b) is int:
            if self.m == 1:
                return (a - b) % self.p
            return self.add(a, self._neg_list[b])
        if self.m == 1:
            return (np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)) % self.p
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        if type(a) is int and type(b) is int:
            if self.m == 1:
                return a * b % self.p
            if a == 0 or b == 0:
                return 0
            return self._exp_list[self._log_list[a] + self._log_list[b]]
        a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
        if self._mul_table is not None and self.m > 1:
            return self._mul_table[a, b]
        return self._mul_vec(a, b)

    def inv(self, a):
        if type(a) is int:
            if a == 0:
                raise ZeroDivisionError(f"0 has no inverse in {self}")
            return self._inv_list[a]
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError(f"0 has no inverse in {self}")
        return self._inv[a]

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def power(self, a: int, k: int) -> int:
        if a == 0:
            if k < 0:
                raise ZeroDivisionError("0 has no inverse")
            return 1 if k == 0 else 0
        return self._exp_list[(self._log_list[a] * k) % (self.q - 1)]

    def dot(self, a, b):
        """Inner product along the last axis."""
        prod = self.mul(a, b)
        prod = np.asarray(prod)
        if prod.shape[-1] == 0:
            return np.zeros(prod.shape[:-1], dtype=np.int64)
        if self.m == 1:
            return prod.sum(axis=-1) % self.p
        out = prod[..., 0]
        for i in range(1, prod.shape[-1]):
            out = self.add(out, prod[..., i])
        return out

    def matvec(self, A, x):
        """``A @ x`` over the field; ``A`` is (..., K, B) and ``x`` is (..., B)."""
        A = np.asarray(A, dtype=np.int64)
        x = np.asarray(x, dtype=np.int64)
        return self.dot(A, x[..., None, :])

    def scale_rows(self, A, s):
        """Multiply row ``k`` of ``A`` by ``s[k]``."""
        return self.mul(np.asarray(A), np.asarray(s)[..., :, None])

    # -- element helpers ----------------------------------------------------

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(int(value), self)

    def elements(self) -> range:
        return range(self.q)

    def nonzero(self) -> range:
        return range(1, self.q)

    def random(self, rng: np.random.Generator, size=None):
        return rng.integers(0, self.q, size=size, dtype=np.int64)

    def random_nonzero(self, rng: np.random.Generator, size=None):
        return rng.integers(1, self.q, size=size, dtype=np.int64)

    def coefficients(self, a: int) -> tuple[int, ...]:
        """Polynomial coefficients of ``a``, low -> high."""
        return tuple((a // p_i) % self.p for p_i in self._weights.tolist())

    @property
    def name(self) -> str:
        return f"GF({self.q})"

    def __repr__(self) -> str:
        return self.name

    def __reduce__(self):
        return (field_make, (self.p, self.m))


def _primitive_root(p: int) -> int:
    if p == 2:
        return 1
    n = p - 1
    factors, r, f = set(), n, 2
    while f * f <= r:
        while r % f == 0:
            factors.add(f)
            r //= f
        f += 1
    if r > 1:
        factors.add(r)
    for g in range(2, p):
        if all(pow(g, n // f, p) != 1 for f in factors):
            return g
    raise RuntimeError("unreachable")


@lru_cache(maxsize=None)
def field_make(p: int, m: int = 1) -> GF:
    """Cached constructor: ``field_make(3, 2) is field_make(3, 2)``."""
    return GF(p, m)


def field_of_order(q: int) -> GF:
    p, m = prime_power(q)
    return field_make(p, m)


_FIELD_RE = re.compile(r"^\s*(?:GF|F)\s*\(\s*(\d+)\s*(?:\^\s*(\d+))?\s*\)\s*$", re.I)


def parse_field(text: str | int | GF) -> GF:
    """Accept ``"GF(9)"``, ``"GF(3^2)"``, ``9`` or a field instance."""
    if isinstance(text, GF):
        return text
    if isinstance(text, (int, np.integer)):
        return field_of_order(int(text))
    match = _FIELD_RE.match(str(text))
    if not match:
        raise ValueError(f"cannot parse field {text!r}; expected e.g. 'GF(5)'")
    base = int(match.group(1))
    if match.group(2) is not None:
        if not _is_prime(base):
            raise ValueError(f"{base} is not prime")
        return field_make(base, int(match.group(2)))
    return field_of_order(base)


@dataclass(frozen=True)
class FieldElement:
    """A single field element with operator overloading."""

    value: int
    field: GF

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise ValueError(f"{self.value} is not an element of {self.field}")

    def _other(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field is not self.field:
                raise ValueError(f"field mismatch: {self.field} vs {other.field}")
            return other.value
        if isinstance(other, (int, np.integer)):
            return int(other) % self.field.q if self.field.m == 1 else int(other)
        return NotImplemented

    def __add__(self, other):
        o = self._other(other)
        return FieldElement(self.field.add(self.value, o), self.field)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        return FieldElement(self.field.sub(self.value, o), self.field)

    def __rsub__(self, other):
        o = self._other(other)
        return FieldElement(self.field.sub(o, self.value), self.field)

    def __mul__(self, other):
        o = self._other(other)
        return FieldElement(self.field.mul(self.value, o), self.field)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._other(other)
        return FieldElement(self.field.div(self.value, o), self.field)

    def __rtruediv__(self, other):
        o = self._other(other)
        return FieldElement(self.field.div(o, self.value), self.field)

    def __neg__(self):
        return FieldElement(self.field.neg(self.value), self.field)

    def __pow__(self, k: int):
        return FieldElement(self.field.power(self.value, k), self.field)

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field.inv(self.value), self.field)

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"{self.field.name}[{self.value}]"


def sample_uniform_nonzero(field: GF, rng: np.random.Generator) -> FieldElement:
    return FieldElement(int(rng.integers(1, field.q)), field)


# -- linear algebra ---------------------------------------------------------


def batch_rank(field: GF, mats) -> np.ndarray:
    """Rank of every matrix in a (N, K, B) stack, by vectorised elimination."""
    A = np.array(mats, dtype=np.int64, copy=True)
    if A.ndim == 2:
        A = A[None]
    N, K, B = A.shape
    rank = np.zeros(N, dtype=np.int64)
    rows = np.arange(K)
    idx = np.arange(N)
    for j in range(B):
        cand = (A[:, :, j] != 0) & (rows[None, :] >= rank[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        piv = np.argmax(cand, axis=1)
        sel = idx[has]
        r, pr = rank[has], piv[has]
        top, low = A[sel, r].copy(), A[sel, pr].copy()
        A[sel, r], A[sel, pr] = low, top
        pivrow = field.mul(A[sel, r], field.inv(A[sel, r, j])[:, None])
        A[sel, r] = pivrow
        factor = A[sel, :, j].copy()
        factor[np.arange(len(sel)), r] = 0
        A[sel] = field.sub(A[sel], field.mul(factor[:, :, None], pivrow[:, None, :]))
        rank[has] += 1
    return rank


def rank(field: GF, mat) -> int:
    mat = np.asarray(mat, dtype=np.int64)
    if mat.size == 0:
        return 0
    return int(batch_rank(field, mat[None])[0])
