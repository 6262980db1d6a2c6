"""Classical-quantum channels, purified sources and the measurements on them.

Subsystem order is fixed everywhere: ``A, A', B, C``. For an n-fold source the
order is ``A^n, A'^n, B^n, C^n`` and within each block site 1 is the most
significant tensor factor.

Two source families are supported:

``"z"``
    ``sum_z sqrt(P(z)) |z>_A |z>_A' |phi(z)>_BC`` with the channel output
    ``phi(z)`` on B and its purification on C. Compression side information is
    B; privacy-amplification side information is A'C.
``"x"``
    ``sum_x sqrt(P(x)) |x~>_A |x>_A' |theta(x)>_BC`` with the channel output
    ``theta(x)`` on C and its purification on B. Compression side information
    is A'B; privacy-amplification side information is C.

The conjugate basis is ``|x~> = d^{-1/2} sum_z w^{xz} |z>`` with
``w = exp(2 pi i / d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import product
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import linear_sum_assignment

from cqexp.config import DEFAULTS
from cqexp.entropy import BipartiteState
from cqexp.errors import ResourceError, ValidationError
from cqexp.linalg import as_matrix, check_density, herm_eig

SYSTEMS = ("A", "A'", "B", "C")
PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def as_distribution(p, d: int | None = None, *, normalize: bool = False) -> np.ndarray:
    """Validate a probability vector. Renormalisation only when asked for."""
    v = np.asarray(p, dtype=float).reshape(-1)
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ValidationError("probability vector must be non-empty and finite")
    if d is not None and v.size != d:
        raise ValidationError(f"expected {d} probabilities, got {v.size}")
    if np.any(v < -DEFAULTS.prob_tol):
        raise ValidationError("probabilities must be nonnegative")
    v = np.clip(v, 0.0, None)
    total = float(v.sum())
    if normalize:
        if total <= 0:
            raise ValidationError("cannot normalise an all-zero vector")
        return v / total
    if abs(total - 1.0) > DEFAULTS.prob_tol:
        raise ValidationError(f"probabilities must sum to 1, got {total!r}")
    return v


def uniform(d: int) -> np.ndarray:
    return np.full(d, 1.0 / d)


@dataclass(frozen=True)
class GroupAction:
    """Unitaries ``V(z)`` with ``phi(z) = V(z) phi(0) V(z)^dagger``."""

    unitaries: tuple

    def __post_init__(self):
        us = tuple(as_matrix(u) for u in self.unitaries)
        for u in us:
            if not np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-9):
                raise ValidationError("group action element is not unitary")
        object.__setattr__(self, "unitaries", us)


@dataclass(frozen=True)
class CQChannel:
    d: int
    outputs: tuple
    symmetry: GroupAction | None = field(default=None, compare=False)

    def __post_init__(self):
        outs = tuple(check_density(o) for o in self.outputs)
        if self.d < 2:
            raise ValidationError(f"alphabet size must be at least 2, got {self.d}")
        if len(outs) != self.d:
            raise ValidationError(f"expected {self.d} outputs, got {len(outs)}")
        if len({o.shape for o in outs}) != 1:
            raise ValidationError("channel outputs must share one dimension")
        object.__setattr__(self, "outputs", outs)
        if self.symmetry is not None:
            if len(self.symmetry.unitaries) != self.d:
                raise ValidationError("symmetry block needs one unitary per input")
            if not is_symmetric(self, self.symmetry):
                raise ValidationError("supplied unitaries do not act simply transitively on the outputs")

    @property
    def dim(self) -> int:
        return self.outputs[0].shape[0]

    def with_symmetry(self, action: GroupAction | None) -> "CQChannel":
        return CQChannel(self.d, self.outputs, action)


def build_cq_state(p, channel: CQChannel) -> BipartiteState:
    p = as_distribution(p, channel.d)
    blocks = [pz * out for pz, out in zip(p, channel.outputs)]
    return cq_state_from_blocks(blocks)


def cq_state_from_blocks(blocks: Sequence[np.ndarray]) -> BipartiteState:
    """Block-diagonal ``sum_x |x><x| (x) blocks[x]`` for sub-normalised blocks."""
    return BipartiteState(block_diag(*blocks).astype(complex), len(blocks), blocks[0].shape[0])


def cq_blocks(state: BipartiteState, tol: float = 1e-10) -> list[np.ndarray]:
    """Diagonal blocks of a state that is classical on A; rejects coherences."""
    k, q = state.dims
    t = state.state.reshape(k, q, k, q)
    off = t.copy()
    for x in range(k):
        off[x, :, x, :] = 0
    if np.max(np.abs(off)) > tol:
        raise ValidationError("state is not classical on its first subsystem")
    return [t[x, :, x, :].copy() for x in range(k)]


def _purify(rho: np.ndarray, width: int) -> np.ndarray:
    """Columns ``sqrt(l_k) e_k`` padded to ``width``; ``V V^dagger = rho``."""
    spec = herm_eig(rho)
    w = np.clip(spec.eigenvalues, 0.0, None)
    keep = w > DEFAULTS.support_cutoff * max(float(w[0]), 0.0)
    cols = spec.eigenvectors[:, keep] * np.sqrt(w[keep])
    out = np.zeros((rho.shape[0], width), dtype=complex)
    out[:, : cols.shape[1]] = cols
    return out


def _rank(rho: np.ndarray) -> int:
    w = np.linalg.eigvalsh(rho)
    return int(np.sum(w > DEFAULTS.support_cutoff * max(float(w[-1]), 0.0)))


def fourier_matrix(d: int) -> np.ndarray:
    """Columns are the conjugate-basis vectors ``|x~>``."""
    z = np.arange(d)
    return np.exp(2j * np.pi * np.outer(z, z) / d) / np.sqrt(d)


@dataclass(frozen=True)
class PurifiedSource:
    amplitudes: np.ndarray
    dims: tuple  # (A, A', B, C) after grouping n sites per system
    d: int
    n: int
    family: str
    distribution: np.ndarray
    channel: CQChannel | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in ("z", "x"):
            raise ValidationError(f"unknown source family {self.family!r}")
        if self.amplitudes.size != int(np.prod(self.dims)):
            raise ValidationError("amplitude vector does not match subsystem dims")
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1.0) > DEFAULTS.trace_tol:
            raise ValidationError(f"source state must have unit norm, got {norm!r}")

    @property
    def dc_side(self) -> tuple[str, ...]:
        return ("B",) if self.family == "z" else ("A'", "B")

    @property
    def pa_side(self) -> tuple[str, ...]:
        return ("A'", "C") if self.family == "z" else ("C",)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def purify_source(p, channel: CQChannel, family: str = "z") -> PurifiedSource:
    p = as_distribution(p, channel.d)
    d = channel.d
    width = max(_rank(o) for o in channel.outputs)
    psi = np.zeros((d, d, channel.dim, width) if family == "z" else (d, d, width, channel.dim), dtype=complex)
    fz = fourier_matrix(d)
    for a in range(d):
        v = _purify(channel.outputs[a], width) * np.sqrt(p[a])
        if family == "z":
            psi[a, a] = v
        elif family == "x":
            # |x~>_A |x>_A' |theta(x)>_BC, purification of theta on B
            for z in range(d):
                psi[z, a] += fz[z, a] * v.T
        else:
            raise ValidationError(f"unknown source family {family!r}")
    return PurifiedSource(psi.reshape(-1), psi.shape, d, 1, family, p, channel)


def _check_budget(dim: int):
    if dim > DEFAULTS.max_pure_dim:
        raise ResourceError(f"state dimension {dim} exceeds the budget of {DEFAULTS.max_pure_dim}")


def tensor_power(psi: PurifiedSource, n: int) -> PurifiedSource:
    if n < 1:
        raise ValidationError(f"blocklength must be positive, got {n}")
    if n == 1:
        return psi
    _check_budget(int(np.prod(psi.dims)) ** n)
    t = psi.amplitudes
    for _ in range(n - 1):
        t = np.kron(t, psi.amplitudes)
    t = t.reshape(list(psi.dims) * n)
    # (A A' B C)_1 ... (A A' B C)_n  ->  A_1..A_n, A'_1..A'_n, B_1..B_n, C_1..C_n
    perm = [4 * i + s for s in range(4) for i in range(n)]
    t = np.transpose(t, perm)
    dims = tuple(x**n for x in psi.dims)
    return replace(psi, amplitudes=t.reshape(-1).copy(), dims=dims, n=psi.n * n)


def digits(index: int, d: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        out.append(index % d)
        index //= d
    return tuple(reversed(out))


def index_of(vec, d: int) -> int:
    idx = 0
    for v in vec:
        idx = idx * d + int(v)
    return idx


def apply_linear_permutation(psi: PurifiedSource, matrix) -> PurifiedSource:
    """Apply ``U_f: |z^n> -> |M z^n>`` to the A^n register."""
    from cqexp.codes import FieldMatrix, invert

    if not isinstance(matrix, FieldMatrix):
        raise ValidationError("expected a FieldMatrix")
    n, d = psi.n, psi.d
    if matrix.d != d or matrix.shape != (n, n):
        raise ValidationError(f"need an invertible {n}x{n} matrix over Z_{d}")
    invert(matrix)  # raises on singular input
    t = psi.tensor()
    out = np.zeros_like(t)
    for idx in range(d**n):
        z = np.array(digits(idx, d, n))
        out[index_of(matrix.apply(z), d)] = t[idx]
    return replace(psi, amplitudes=out.reshape(-1))


def measure_blocks(
    psi: PurifiedSource,
    basis: str,
    keep: Sequence[str],
    positions: Sequence[int] | None = None,
) -> list[np.ndarray]:
    """Measure the A^n register and return sub-normalised conditional states.

    ``basis`` is ``"z"`` (computational) or ``"x"`` (conjugate). Only the
    outcomes at ``positions`` (default: all sites) are kept; blocks are
    ordered by the kept outcome string read as a base-d number. ``keep`` names
    the quantum systems among ``A', B, C`` that survive.
    """
    keep = tuple(keep)
    bad = [s for s in keep if s not in SYSTEMS[1:]]
    if bad or len(set(keep)) != len(keep):
        raise ValidationError(f"invalid systems to keep: {keep}")
    n, d = psi.n, psi.d
    positions = tuple(range(n)) if positions is None else tuple(int(p) for p in positions)
    if any(p < 0 or p >= n for p in positions) or len(set(positions)) != len(positions):
        raise ValidationError(f"invalid outcome positions {positions} for n={n}")
    t = psi.tensor()
    if basis == "x":
        f = fourier_matrix(d)
        fn = f
        for _ in range(n - 1):
            fn = np.kron(fn, f)
        t = np.tensordot(fn.conj().T, t, axes=(1, 0))
    elif basis != "z":
        raise ValidationError(f"unknown measurement basis {basis!r}")
    kept_axes = [SYSTEMS.index(s) for s in SYSTEMS[1:] if s in keep]
    traced_axes = [i for i in (1, 2, 3) if i not in kept_axes]
    qdim = int(np.prod([psi.dims[i] for i in kept_axes])) if kept_axes else 1
    blocks = [np.zeros((qdim, qdim), dtype=complex) for _ in range(d ** len(positions))]
    for a in range(d**n):
        v = np.transpose(t[a], [i - 1 for i in kept_axes + traced_axes]).reshape(qdim, -1)
        if not np.any(v):
            continue
        dig = digits(a, d, n)
        key = index_of([dig[p] for p in positions], d)
        blocks[key] += v @ v.conj().T
    return blocks


def measure(psi: PurifiedSource, basis: str, keep: Sequence[str], positions=None) -> BipartiteState:
    return cq_state_from_blocks(measure_blocks(psi, basis, keep, positions))


def measure_conjugate(psi: PurifiedSource, keep: Sequence[str] | None = None, positions=None) -> BipartiteState:
    """CQ state of the conjugate-basis outcome on A^n against ``keep``
    (default: the privacy-amplification side systems of the source)."""
    return measure(psi, "x", psi.pa_side if keep is None else keep, positions)


def dc_state(psi: PurifiedSource) -> BipartiteState:
    """The compression problem: computational outcome vs. its side information."""
    return measure(psi, "z", psi.dc_side)


def pa_state(psi: PurifiedSource) -> BipartiteState:
    """The privacy-amplification problem: conjugate outcome vs. its side information."""
    return measure(psi, "x", psi.pa_side)


# --- symmetric channels -----------------------------------------------------


def _close(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    return float(np.max(np.abs(a - b))) <= tol


def is_symmetric(channel: CQChannel, action: GroupAction, tol: float = 1e-8) -> bool:
    """Check that ``action`` certifies the channel as symmetric.

    Requires ``V(z) phi(0) V(z)^dagger = phi(z)`` for every z, that each
    ``V(g)`` permutes the list of outputs, and, when the outputs are pairwise
    distinct, that exactly one g maps any ``phi(z)`` to any ``phi(z')``.
    """
    us, outs, d = action.unitaries, channel.outputs, channel.d
    if len(us) != d or any(u.shape != outs[0].shape for u in us):
        return False
    if not all(_close(u @ outs[0] @ u.conj().T, outs[z], tol) for z, u in enumerate(us)):
        return False
    for u in us:
        moved = [u @ o @ u.conj().T for o in outs]
        cost = np.array([[np.max(np.abs(m - o)) for o in outs] for m in moved])
        rows, cols = linear_sum_assignment(cost)
        if cost[rows, cols].max() > tol:
            return False
    distinct = all(not _close(outs[i], outs[j], tol) for i in range(d) for j in range(i + 1, d))
    if distinct:
        for z, zp in product(range(d), repeat=2):
            hits = sum(_close(u @ outs[z] @ u.conj().T, outs[zp], tol) for u in us)
            if hits != 1:
                return False
    return True


def find_symmetry(channel: CQChannel, candidates: Sequence[np.ndarray] | None = None) -> GroupAction | None:
    """Exhaustive search for a certifying action among ``candidates``.

    Only verifies supplied candidates (Pauli operators for qubits by
    default); failure does not prove the channel lacks a symmetry.
    """
    if candidates is None:
        if channel.dim != 2:
            return None
        candidates = PAULIS
    cands = [as_matrix(c) for c in candidates]
    options = []
    for out in channel.outputs:
        opts = [c for c in cands if _close(c @ channel.outputs[0] @ c.conj().T, out, 1e-8)]
        if not opts:
            return None
        options.append(opts)
    for choice in product(*options):
        action = GroupAction(choice)
        if is_symmetric(channel, action):
            return action
    return None


def _ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _bloch_xz(angle: float, r: float) -> np.ndarray:
    x, z = r * np.sin(angle), r * np.cos(angle)
    return 0.5 * np.array([[1 + z, x], [x, 1 - z]], dtype=complex)


def symmetric_channel(family: str, **params) -> CQChannel:
    """Build a channel together with its certifying group action.

    families
    --------
    ``"classical-symmetric"``: ``row`` (length-d distribution); outputs are the
        diagonal matrices of the cyclic shifts of ``row``, acted on by powers
        of the shift operator.
    ``"bsc"``: ``p``; the binary symmetric channel as a diagonal qubit channel.
    ``"dihedral-qubit"``: ``theta``, optional ``r`` (Bloch length, default 1)
        and even ``d`` (default 2). Outputs sit at Bloch angles
        ``2 pi k/(d/2) +/- theta`` in the x-z plane; the dihedral group acts by
        y-rotations and the reflection Z.
    ``"group-unitaries"``: ``base`` state and list ``unitaries``.
    """
    if family == "bsc":
        p = float(params["p"])
        return symmetric_channel("classical-symmetric", row=[1 - p, p])
    if family == "classical-symmetric":
        row = as_distribution(params["row"])
        d = row.size
        shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
        us = [np.linalg.matrix_power(shift, z) for z in range(d)]
        outs = [np.diag(np.roll(row, z)).astype(complex) for z in range(d)]
        return CQChannel(d, tuple(outs), GroupAction(tuple(us)))
    if family == "dihedral-qubit":
        theta = float(params["theta"])
        r = float(params.get("r", 1.0))
        d = int(params.get("d", 2))
        if d < 2 or d % 2 or not 0 <= r <= 1:
            raise ValidationError("dihedral-qubit needs even d >= 2 and 0 <= r <= 1")
        q = d // 2
        refl = PAULIS[3]
        us, outs = [], []
        base = _bloch_xz(theta, r)
        for k in range(q):
            for b in (0, 1):
                u = _ry(2 * np.pi * k / q) @ (refl if b else np.eye(2))
                us.append(u)
                outs.append(u @ base @ u.conj().T)
        return CQChannel(d, tuple(outs), GroupAction(tuple(us)))
    if family == "group-unitaries":
        base = check_density(params["base"])
        us = [as_matrix(u) for u in params["unitaries"]]
        outs = [u @ base @ u.conj().T for u in us]
        return CQChannel(len(us), tuple(outs), GroupAction(tuple(us)))
    raise ValidationError(f"unknown symmetric channel family {family!r}")
