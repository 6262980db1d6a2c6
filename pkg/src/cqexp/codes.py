"""Exact linear algebra over prime fields Z_d.

Everything here is integer arithmetic; there is no floating point. Vectors are
column vectors, so a matrix ``A`` acts as ``z -> A z mod d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from cqexp.config import DEFAULTS
from cqexp.errors import ResourceError, ValidationError


def is_prime(d: int) -> bool:
    if d < 2:
        return False
    f = 2
    while f * f <= d:
        if d % f == 0:
            return False
        f += 1
    return True


def require_prime(d: int) -> int:
    d = int(d)
    if not is_prime(d):
        raise ValidationError(f"modulus must be prime, got {d}")
    return d


@dataclass(frozen=True, eq=False)
class FieldMatrix:
    d: int
    entries: np.ndarray

    def __post_init__(self):
        require_prime(self.d)
        e = np.array(self.entries, dtype=np.int64)
        if e.ndim == 1:
            e = e.reshape(1, -1) if e.size else e.reshape(0, 0)
        if e.ndim != 2:
            raise ValidationError("field matrix must be two-dimensional")
        e = np.mod(e, self.d)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def apply(self, z) -> np.ndarray:
        return np.mod(self.entries @ np.asarray(z, dtype=np.int64), self.d)

    def __matmul__(self, other: "FieldMatrix") -> "FieldMatrix":
        return FieldMatrix(self.d, self.entries @ other.entries)

    @property
    def T(self) -> "FieldMatrix":
        return FieldMatrix(self.d, self.entries.T)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FieldMatrix)
            and self.d == other.d
            and self.shape == other.shape
            and bool(np.array_equal(self.entries, other.entries))
        )

    def tolist(self) -> list[list[int]]:
        return self.entries.tolist()

    @classmethod
    def identity(cls, d: int, n: int) -> "FieldMatrix":
        return cls(d, np.eye(n, dtype=np.int64))

    @classmethod
    def empty(cls, d: int, n: int) -> "FieldMatrix":
        return cls(d, np.zeros((0, n), dtype=np.int64))


@dataclass(frozen=True)
class LinearFunctionPair:
    check: FieldMatrix  # m x n
    hat: FieldMatrix  # (n - m) x n
    combined: FieldMatrix  # n x n, check stacked over hat


def _inv_mod(a: int, d: int) -> int:
    return pow(int(a), -1, d)


def row_reduce(a: FieldMatrix) -> tuple[FieldMatrix, int, list[int]]:
    """Reduced row echelon form, rank and pivot columns.

    Pivots are the first nonzero entry found scanning columns left to right.
    """
    d = a.d
    m = a.entries.copy()
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        nz = np.flatnonzero(m[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            m[[r, p]] = m[[p, r]]
        m[r] = (m[r] * _inv_mod(m[r, c], d)) % d
        for i in range(rows):
            if i != r and m[i, c]:
                m[i] = (m[i] - m[i, c] * m[r]) % d
        pivots.append(c)
        r += 1
    return FieldMatrix(d, m), r, pivots


def rank(a: FieldMatrix) -> int:
    return row_reduce(a)[1]


def is_full_row_rank(a: FieldMatrix) -> bool:
    return rank(a) == a.rows


def toeplitz(seed: Sequence[int], m: int, n: int, d: int) -> tuple[FieldMatrix, bool]:
    """``T[i][j] = seed[i - j + n - 1]`` and whether T is surjective.

    Rank-deficient draws are reported, not rejected.
    """
    if not 0 <= m <= n:
        raise ValidationError(f"need 0 <= m <= n, got m={m}, n={n}")
    seed = [int(s) for s in seed]
    if m and len(seed) != m + n - 1:
        raise ValidationError(f"seed must have m+n-1 = {m + n - 1} entries, got {len(seed)}")
    if m == 0:
        t = FieldMatrix.empty(d, n)
        return t, True
    e = np.array([[seed[i - j + n - 1] for j in range(n)] for i in range(m)], dtype=np.int64)
    t = FieldMatrix(d, e)
    return t, is_full_row_rank(t)


def random_toeplitz(rng: np.random.Generator, m: int, n: int, d: int, max_draws: int = 10_000):
    """Draw Toeplitz seeds until the matrix is surjective.

    Returns ``(matrix, seed, resamples)``; every rejected draw is counted.
    """
    for resamples in range(max_draws):
        seed = rng.integers(0, d, size=max(m + n - 1, 0)).tolist() if m else []
        t, ok = toeplitz(seed, m, n, d)
        if ok:
            return t, seed, resamples
    raise ResourceError(f"no surjective Toeplitz matrix in {max_draws} draws")


def invert(a: FieldMatrix) -> FieldMatrix:
    n = a.rows
    if a.shape != (n, n):
        raise ValidationError(f"only square matrices are invertible, got {a.shape}")
    aug = FieldMatrix(a.d, np.hstack([a.entries, np.eye(n, dtype=np.int64)]))
    red, r, piv = row_reduce(aug)
    if piv[:n] != list(range(n)):
        raise ValidationError("matrix is singular over Z_%d" % a.d)
    return FieldMatrix(a.d, red.entries[:, n:])


def complete_invertible(h: FieldMatrix) -> LinearFunctionPair:
    """Stack standard basis rows on the non-pivot columns under ``h``."""
    _, r, piv = row_reduce(h)
    if r != h.rows:
        raise ValidationError(f"check matrix must have full row rank ({r} < {h.rows})")
    n = h.cols
    free = [c for c in range(n) if c not in piv]
    hat = np.zeros((len(free), n), dtype=np.int64)
    for i, c in enumerate(free):
        hat[i, c] = 1
    hat_m = FieldMatrix(h.d, hat)
    combined = FieldMatrix(h.d, np.vstack([h.entries, hat]))
    return LinearFunctionPair(h, hat_m, combined)


def dual_map(combined: FieldMatrix, m: int) -> tuple[FieldMatrix, FieldMatrix]:
    """Split ``(M^{-1})^T`` into its first ``m`` and remaining rows."""
    g = invert(combined).T
    n = combined.rows
    if not 0 <= m <= n:
        raise ValidationError(f"need 0 <= m <= n, got m={m}")
    return FieldMatrix(g.d, g.entries[:m]), FieldMatrix(g.d, g.entries[m:])


def generator_from_check(h: FieldMatrix) -> FieldMatrix:
    """Rows spanning the null space of ``h``, so that ``H G^T = 0``."""
    red, r, piv = row_reduce(h)
    if r != h.rows:
        raise ValidationError(f"check matrix must have full row rank ({r} < {h.rows})")
    n, d = h.cols, h.d
    free = [c for c in range(n) if c not in piv]
    g = np.zeros((len(free), n), dtype=np.int64)
    for i, c in enumerate(free):
        g[i, c] = 1
        for row, pc in enumerate(piv):
            g[i, pc] = (-red.entries[row, c]) % d
    return FieldMatrix(d, g)


def coset_enumerate(h: FieldMatrix, syndrome: Sequence[int]) -> list[tuple[int, ...]]:
    """All ``z`` with ``H z = syndrome``, in lexicographic order."""
    d, m, n = h.d, h.rows, h.cols
    s = np.mod(np.asarray(syndrome, dtype=np.int64).reshape(-1), d)
    if s.size != m:
        raise ValidationError(f"syndrome length {s.size} does not match {m} checks")
    if d ** (n - m) > DEFAULTS.max_enumeration:
        raise ResourceError(f"coset of size {d}^{n - m} exceeds the enumeration budget")
    if m == 0:
        return [tuple(z) for z in product(range(d), repeat=n)]
    aug = FieldMatrix(d, np.hstack([h.entries, s.reshape(-1, 1)]))
    red, r, piv = row_reduce(aug)
    if n in piv:
        return []
    particular = np.zeros(n, dtype=np.int64)
    for row, pc in enumerate(piv):
        particular[pc] = red.entries[row, n]
    g = generator_from_check(h)
    out = set()
    for coeffs in product(range(d), repeat=g.rows):
        z = (particular + np.asarray(coeffs, dtype=np.int64) @ g.entries) % d
        out.add(tuple(int(v) for v in z))
    return sorted(out)


def syndromes(d: int, m: int) -> list[tuple[int, ...]]:
    return list(product(range(d), repeat=m))
