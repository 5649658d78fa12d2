"""Exact linear algebra over Z_q, SIS instance modeling, and q-ary lattice
brute-force oracles.

All arithmetic on matrix entries is exact: int64 NumPy kernels are used only
when a proven bound rules out overflow, otherwise computation falls back to
Python big integers.  Lattice membership (A x = 0 mod q) is therefore never
subject to rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadDimensions,
    BudgetExceeded,
    DimensionMismatch,
    NonInvertiblePivot,
    RankDeficient,
)
from .rngutil import derive_np_rng

_INT64_SAFE = 1 << 62

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin; deterministic for n < 3.3e24 with the fixed witness set."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def centered(v, q: int):
    """Representative of v mod q in (-q/2, q/2], elementwise for arrays."""
    if isinstance(v, np.ndarray):
        r = np.mod(v, q)
        return np.where(2 * r > q, r - q, r)
    r = v % q
    return r - q if 2 * r > q else r


def as_matrix(rows, q: int) -> np.ndarray:
    """Immutable matrix with entries reduced into [0, q)."""
    if q < (1 << 31):
        arr = np.array(rows, dtype=np.int64) % q
    else:
        arr = np.array([[int(x) % q for x in row] for row in rows], dtype=object)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SisInstance:
    """An SIS instance: find nonzero x with A x = 0 mod q and small norm."""

    n: int
    m: int
    q: int
    A: np.ndarray
    beta: Optional[Fraction] = None
    norm_kind: str = "linf"
    q_prime: bool = field(default=False, compare=False)
    systematic: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not (1 <= self.n <= self.m):
            raise BadDimensions(f"need 1 <= n <= m, got n={self.n} m={self.m}")
        if self.q < 2:
            raise BadDimensions(f"modulus must be >= 2, got {self.q}")
        if self.A.shape != (self.n, self.m):
            raise DimensionMismatch(f"A has shape {self.A.shape}, expected {(self.n, self.m)}")
        if self.A.dtype == np.int64:
            amin, amax = int(self.A.min()), int(self.A.max())
        else:
            amin = min(int(x) for row in self.A for x in row)
            amax = max(int(x) for row in self.A for x in row)
        if amin < 0 or amax >= self.q:
            raise BadDimensions("matrix entries must lie in [0, q)")
        if self.norm_kind not in ("linf", "l2"):
            raise BadDimensions(f"unknown norm kind {self.norm_kind!r}")
        if self.beta is not None and self.beta <= 0:
            raise BadDimensions("beta must be positive")
        object.__setattr__(self, "q_prime", is_probable_prime(self.q))
        object.__setattr__(self, "systematic", self._detect_systematic())

    def _detect_systematic(self) -> bool:
        if self.m < self.n:
            return False
        tail = np.asarray(self.A)[:, self.m - self.n:]
        if tail.dtype == np.int64:
            return bool(np.array_equal(tail, np.eye(self.n, dtype=np.int64)))
        return all(
            int(tail[i, j]) == (1 if i == j else 0)
            for i in range(self.n) for j in range(self.n)
        )

    @classmethod
    def create(cls, rows, q: int, beta=None, norm_kind: str = "linf") -> "SisInstance":
        A = as_matrix(rows, q)
        n, m = A.shape
        b = None if beta is None else Fraction(beta)
        return cls(n=n, m=m, q=q, A=A, beta=b, norm_kind=norm_kind)

    @property
    def a_prime(self) -> np.ndarray:
        """The A' block of a systematic instance (first m-n columns)."""
        if not self.systematic:
            raise BadDimensions("instance is not in systematic form")
        return np.asarray(self.A)[:, : self.m - self.n]

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "m": self.m,
            "q": self.q,
            "beta": None if self.beta is None else (
                int(self.beta) if self.beta.denominator == 1 else float(self.beta)
            ),
            "norm": self.norm_kind,
            "A": [[int(x) for x in row] for row in self.A],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SisInstance":
        doc = json.loads(text)
        inst = cls.create(doc["A"], doc["q"], beta=doc.get("beta"),
                          norm_kind=doc.get("norm", "linf"))
        if inst.n != doc["n"] or inst.m != doc["m"]:
            raise DimensionMismatch("declared dimensions disagree with the matrix")
        return inst


@dataclass(frozen=True)
class Solution:
    """Candidate SIS solution with its precomputed norm."""

    x: tuple
    norm_value: float

    @classmethod
    def from_vector(cls, x: Sequence[int], norm_kind: str = "linf") -> "Solution":
        xs = tuple(int(v) for v in x)
        if norm_kind == "linf":
            nv = float(max((abs(v) for v in xs), default=0))
        else:
            nv = float(sum(v * v for v in xs)) ** 0.5
        return cls(x=xs, norm_value=nv)

    def to_json(self) -> str:
        return json.dumps({"x": list(self.x), "norm": self.norm_value})

    @classmethod
    def from_json(cls, text: str) -> "Solution":
        doc = json.loads(text)
        return cls(x=tuple(int(v) for v in doc["x"]), norm_value=float(doc.get("norm", 0.0)))


def matvec_mod(A, x, q: int) -> np.ndarray:
    """Exact A @ x mod q with entries in [0, q); no intermediate overflow."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise DimensionMismatch("A must be a matrix")
    n, m = A.shape
    xs = [int(v) for v in x]
    if len(xs) != m:
        raise DimensionMismatch(f"x has length {len(xs)}, expected {m}")
    max_x = max((abs(v) for v in xs), default=0)
    if A.dtype == np.int64 and m * (q - 1) * max(1, max_x) < _INT64_SAFE:
        out = (A @ np.array(xs, dtype=np.int64)) % q
        return out.astype(np.int64)
    acc = [0] * n
    for i in range(n):
        acc[i] = sum(int(A[i, j]) * xs[j] for j in range(m)) % q
    return np.array(acc, dtype=object if q >= (1 << 31) else np.int64)


def random_instance(n: int, m: int, q: int, seed: int, *, beta=None,
                    norm_kind: str = "linf") -> SisInstance:
    """Uniform SIS instance; identical output for identical (n, m, q, seed)."""
    if m < n or n < 1:
        raise BadDimensions(f"need m >= n >= 1, got n={n} m={m}")
    if q < 2:
        raise BadDimensions(f"modulus must be >= 2, got {q}")
    rng = derive_np_rng(seed, "instance", n, m, q)
    if q < (1 << 62):
        A = rng.integers(0, q, size=(n, m), dtype=np.int64)
    else:
        A = np.array([[int(rng.integers(0, q)) for _ in range(m)] for _ in range(n)],
                     dtype=object)
    return SisInstance.create(A, q, beta=beta, norm_kind=norm_kind)


def _modinv(a: int, q: int):
    g, s = _ext_gcd(a % q, q)
    return s % q if g == 1 else None


def _ext_gcd(a: int, b: int):
    old_r, r = a, b
    old_s, s = 1, 0
    while r:
        quot = old_r // r
        old_r, r = r, old_r - quot * r
        old_s, s = s, old_s - quot * s
    return old_r, old_s


def systematic_form(inst: SisInstance):
    """Row reduce to A = [A' | I_n], swapping columns as needed.

    Returns (systematic instance, perm) where perm[t] is the input column now
    at output position t: y solves the output instance iff x with
    x[perm[t]] = y[t] solves the input.
    """
    n, m, q = inst.n, inst.m, inst.q
    M = [[int(v) for v in row] for row in inst.A]
    cols = list(range(m))
    off = m - n  # identity block target: columns off .. m-1
    for i in range(n):
        target = off + i
        pivot_col = None
        if _modinv(M[i][target], q) is not None:
            pivot_col = target
        else:
            used = set(range(off, off + i))  # earlier pivot columns are fixed
            for j in range(m):
                if j in used or j == target:
                    continue
                if _modinv(M[i][j], q) is not None:
                    pivot_col = j
                    break
        if pivot_col is None:
            row_nonzero = any(
                M[i][j] % q != 0 for j in range(m) if j not in range(off, off + i)
            )
            if row_nonzero and not inst.q_prime:
                raise NonInvertiblePivot(
                    f"row {i}: nonzero entries but no unit pivot mod composite q={q}"
                )
            raise RankDeficient(f"row {i} lies in the span of earlier rows mod {q}")
        if pivot_col != target:
            for row in M:
                row[pivot_col], row[target] = row[target], row[pivot_col]
            cols[pivot_col], cols[target] = cols[target], cols[pivot_col]
        inv = _modinv(M[i][target], q)
        M[i] = [(v * inv) % q for v in M[i]]
        for r in range(n):
            if r != i and M[r][target] % q:
                f = M[r][target] % q
                M[r] = [(M[r][j] - f * M[i][j]) % q for j in range(m)]
    out = SisInstance.create(M, q, beta=inst.beta, norm_kind=inst.norm_kind)
    assert out.systematic
    return out, tuple(cols)


def permute_solution_back(perm, y):
    """Map a solution of the systematic instance back to the original columns."""
    x = [0] * len(perm)
    for t, orig in enumerate(perm):
        x[orig] = int(y[t])
    return tuple(x)


def lambda1_inf_bruteforce(A, q: int, budget: int = 1 << 22) -> int:
    """Exact lambda_1^infty of Lambda_q(A) = A^T Z^n + q Z^m by enumerating
    all q^n - 1 nonzero syndromes.  Degenerate syndromes (A^T s = 0 mod q)
    contribute only multiples of q, hence the value q for them."""
    A = np.asarray(A)
    n, m = A.shape
    if q ** n > budget:
        raise BudgetExceeded(f"q^n = {q ** n} exceeds enumeration budget {budget}")
    best = q  # q * e_1 is always in the lattice
    Amat = A.astype(np.int64) if A.dtype != np.int64 else A
    chunk = 1 << 14
    total = q ** n
    idx = 1  # skip s = 0
    while idx < total:
        hi = min(total, idx + chunk)
        ss = np.arange(idx, hi, dtype=np.int64)
        S = np.empty((hi - idx, n), dtype=np.int64)
        rem = ss.copy()
        for j in range(n - 1, -1, -1):
            S[:, j] = rem % q
            rem //= q
        V = np.mod(S @ Amat, q)  # rows are A^T s transposed
        V = np.where(2 * V > q, V - q, V)
        norms = np.abs(V).max(axis=1)
        nz = norms[norms > 0]
        if nz.size:
            best = min(best, int(nz.min()))
        idx = hi
    return int(best)
