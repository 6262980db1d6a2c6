"""Dense Hermitian linear algebra used by every other module.

Matrices are plain complex ``numpy`` arrays. Fractional powers are taken on
the support: eigenvalues below ``support_cutoff * lambda_max`` count as exact
zeros and ``0**p`` is defined to be ``0`` for every ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from cqexp.config import DEFAULTS
from cqexp.errors import ValidationError


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # unitary, columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def check_hermitian(a, tol: float = DEFAULTS.herm_tol) -> np.ndarray:
    m = as_matrix(a)
    scale = max(1.0, float(np.max(np.abs(m))))
    dev = float(np.max(np.abs(m - m.conj().T)))
    if dev > tol * scale:
        raise ValidationError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return (m + m.conj().T) / 2


def check_psd(a, tol: float = DEFAULTS.psd_tol) -> np.ndarray:
    m = check_hermitian(a)
    lo = float(np.linalg.eigvalsh(m)[0])
    if lo < -tol * max(1.0, float(np.max(np.abs(m)))):
        raise ValidationError(f"matrix is not positive semidefinite (eigenvalue {lo:.3e})")
    return m


def check_density(a, tol: float = DEFAULTS.trace_tol) -> np.ndarray:
    m = check_psd(a)
    tr = float(np.trace(m).real)
    if abs(tr - 1.0) > tol:
        raise ValidationError(f"density matrix must have unit trace, got {tr!r}")
    return m


def _phase_fix(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            c = col[nz[0]]
            out[:, j] = col * (abs(c) / c)
    return out


def herm_eig(m) -> SpectralDecomposition:
    """Eigendecomposition with descending eigenvalues.

    Each eigenvector is rotated so that its first nonzero component is real
    and positive, which makes the output reproducible.
    """
    h = check_hermitian(m)
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    return SpectralDecomposition(w[order], _phase_fix(v[:, order]))


def _eigh(a: np.ndarray):
    h = (a + a.conj().T) / 2
    return np.linalg.eigh(h)


def support_mask(w: np.ndarray, cutoff: float = DEFAULTS.support_cutoff) -> np.ndarray:
    top = float(np.max(w)) if w.size else 0.0
    if top <= 0:
        return np.zeros_like(w, dtype=bool)
    return w > cutoff * top


def mat_pow(a, p: float, *, check: bool = True) -> np.ndarray:
    """``a**p`` for PSD ``a``, computed on the support of ``a``."""
    if not np.isfinite(p):
        raise ValidationError(f"power must be finite, got {p}")
    m = check_psd(a) if check else np.asarray(a, dtype=complex)
    w, v = _eigh(m)
    keep = support_mask(w)
    wp = np.zeros_like(w)
    wp[keep] = w[keep] ** p
    return (v * wp) @ v.conj().T


def mat_log2(a) -> np.ndarray:
    """Base-2 logarithm on the support (zero on the kernel)."""
    w, v = _eigh(as_matrix(a))
    keep = support_mask(w)
    lw = np.zeros_like(w)
    lw[keep] = np.log2(w[keep])
    return (v * lw) @ v.conj().T


def support_projector(a) -> np.ndarray:
    w, v = _eigh(as_matrix(a))
    vs = v[:, support_mask(w)]
    return vs @ vs.conj().T


def support_basis(a) -> np.ndarray:
    """Orthonormal columns spanning the support of a PSD matrix."""
    w, v = _eigh(as_matrix(a))
    keep = support_mask(w)
    return v[:, keep][:, ::-1]


def positive_part(a) -> np.ndarray:
    w, v = _eigh(as_matrix(a))
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


def trace_norm(a) -> float:
    m = as_matrix(a)
    if np.allclose(m, m.conj().T, atol=DEFAULTS.herm_tol):
        return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def fidelity(rho, sigma) -> float:
    """``|| sqrt(rho) sqrt(sigma) ||_1``; inputs need only be PSD."""
    r, s = as_matrix(rho), as_matrix(sigma)
    if r.shape != s.shape:
        raise ValidationError(f"dimension mismatch: {r.shape} vs {s.shape}")
    return _fidelity(check_psd(r), check_psd(s))


def _fidelity(r: np.ndarray, s: np.ndarray) -> float:
    # singular values of sqrt(r) sqrt(s): eigenvalues of sqrt(r) s sqrt(r) would
    # turn rounding noise of order eps into errors of order sqrt(eps)
    prod = mat_pow(r, 0.5, check=False) @ mat_pow(s, 0.5, check=False)
    return float(np.sum(np.linalg.svd(prod, compute_uv=False)))


def purified_distance(rho, sigma) -> float:
    f = min(fidelity(rho, sigma), 1.0)
    return float(np.sqrt(max(0.0, 1.0 - f * f)))


def kron(*ops) -> np.ndarray:
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduce ``rho`` on subsystems ``dims`` to the subsystems listed in ``keep``.

    Kept subsystems stay in their original order.
    """
    m = as_matrix(rho)
    dims = [int(x) for x in dims]
    if any(x < 1 for x in dims) or int(np.prod(dims)) != m.shape[0]:
        raise ValidationError(f"subsystem dims {dims} do not match matrix size {m.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValidationError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = m.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # contract traced pairs one at a time, highest index first so labels stay valid
    cur = n
    for i in sorted(traced, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + cur)
        cur -= 1
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d, d)


def ket_to_dm(psi) -> np.ndarray:
    v = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


def random_density_matrix(dim: int, rank: int | None = None, rng=None) -> np.ndarray:
    """Induced-measure random state of the given rank (full rank by default)."""
    rng = np.random.default_rng(rng)
    r = dim if rank is None else rank
    g = rng.normal(size=(dim, r)) + 1j * rng.normal(size=(dim, r))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_pure_state(dim: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
