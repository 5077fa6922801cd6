"""Truncated tensor-product Hilbert spaces and the operator algebra on them.

Subsystems are addressed by label: the qutrits ``q0``/``q1`` and the
resonator modes ``A``/``B``/``C``. Operators and states are dense complex
numpy arrays over the composite space. Everything is immutable after
construction; all operations are pure functions.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import expm

QUBIT_LABELS = ("q0", "q1")
RESONATOR_LABELS = ("A", "B", "C")
KNOWN_LABELS = QUBIT_LABELS + RESONATOR_LABELS

# Canonical subsystem order when all five circuit elements are present.
FULL_DEVICE_ORDER = ("q0", "q1", "A", "B", "C")

MAX_DISPLACEMENT = 2.0
DISPLACEMENT_GUARD = 6
GUARD_TOL = 1e-4


class TruncationError(ValueError):
    """A Fock index or displacement exceeds what the truncation supports."""


@dataclass(frozen=True)
class SubsystemSpec:
    """One tensor factor: a qutrit or a truncated resonator mode.

    ``levels`` is the qudit level count, or n_max + 1 for a resonator.
    """

    label: str
    levels: int

    def __post_init__(self):
        if self.label not in KNOWN_LABELS:
            raise ValueError(f"unknown subsystem label {self.label!r}")
        if self.levels < 2:
            raise ValueError(f"subsystem {self.label}: needs at least 2 levels")

    @property
    def is_resonator(self) -> bool:
        return self.label in RESONATOR_LABELS


@dataclass(frozen=True)
class CompositeSpace:
    """Ordered tensor product of subsystems."""

    subsystems: tuple[SubsystemSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate subsystem labels in composite space")
        # The full device always uses the canonical ordering.
        if set(labels) == set(FULL_DEVICE_ORDER) and labels != FULL_DEVICE_ORDER:
            raise ValueError(f"full device must be ordered {FULL_DEVICE_ORDER}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(s.levels for s in self.subsystems)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def has(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no subsystem {label!r} in space {self.labels}") from None

    def levels(self, label: str) -> int:
        return self.subsystems[self.index(label)].levels

    def subspace(self, keep: Sequence[str]) -> "CompositeSpace":
        """Space spanned by the kept subsystems, in this space's order."""
        idx = sorted(self.index(lbl) for lbl in keep)
        return CompositeSpace(tuple(self.subsystems[i] for i in idx))

    def flat_index(self, occupations: Mapping[str, int] | Sequence[int]) -> int:
        """Row index of the product basis state with the given level indices."""
        occ = _occupation_list(self, occupations)
        return int(np.ravel_multi_index(occ, self.shape))


def space(*factors: tuple[str, int]) -> CompositeSpace:
    """Shorthand constructor: ``space(("q0", 3), ("A", 6))``."""
    return CompositeSpace(tuple(SubsystemSpec(lbl, lv) for lbl, lv in factors))


@dataclass(frozen=True)
class Operator:
    """Dense complex matrix over a composite space."""

    space: CompositeSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        if m.shape[0] != self.space.dim:
            raise ValueError(
                f"operator dimension {m.shape[0]} != space dim {self.space.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.space != self.space:
            raise ValueError("operator spaces differ")
        return Operator(self.space, self.matrix @ other.matrix)


@dataclass(frozen=True)
class QuantumState:
    """Pure state vector or density matrix over a composite space.

    ``atol`` loosens the construction checks for states coming out of a
    numerical integrator (norm/trace drift is reported there, not hidden).
    """

    space: CompositeSpace
    kind: str  # "pure" | "density"
    data: np.ndarray
    atol: float = 1e-9

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        dim = self.space.dim
        if self.kind == "pure":
            d = d.reshape(-1)
            if d.shape[0] != dim:
                raise ValueError(f"state length {d.shape[0]} != space dim {dim}")
            nrm = np.linalg.norm(d)
            if abs(nrm - 1.0) > self.atol:
                raise ValueError(f"pure state norm {nrm} != 1 beyond atol={self.atol}")
        elif self.kind == "density":
            if d.ndim != 2 or d.shape != (dim, dim):
                raise ValueError(f"density shape {d.shape} != ({dim}, {dim})")
            herm = np.max(np.abs(d - d.conj().T))
            if herm > max(self.atol, 1e-9):
                raise ValueError(f"density not Hermitian (deviation {herm:.2e})")
            tr = np.trace(d).real
            if abs(tr - 1.0) > max(self.atol, 1e-9):
                raise ValueError(f"density trace {tr} != 1 beyond tolerance")
        else:
            raise ValueError(f"unknown state kind {self.kind!r}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def density(self) -> np.ndarray:
        """Density matrix representation regardless of kind."""
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def assert_physical(self, eig_floor: float = -1e-8) -> None:
        """Check the eigenvalue floor (costs an eigendecomposition)."""
        if self.is_pure:
            return
        lo = float(np.linalg.eigvalsh(self.data)[0])
        if lo < eig_floor:
            raise ValueError(f"density has eigenvalue {lo:.3e} below {eig_floor:.1e}")


def _occupation_list(
    space_: CompositeSpace, occupations: Mapping[str, int] | Sequence[int]
) -> list[int]:
    if isinstance(occupations, Mapping):
        unknown = set(occupations) - set(space_.labels)
        if unknown:
            raise KeyError(f"no subsystem {sorted(unknown)} in space {space_.labels}")
        occ = [int(occupations.get(lbl, 0)) for lbl in space_.labels]
    else:
        occ = [int(k) for k in occupations]
        if len(occ) != len(space_.subsystems):
            raise ValueError(
                f"need {len(space_.subsystems)} occupation indices, got {len(occ)}"
            )
    for sub, k in zip(space_.subsystems, occ):
        if not 0 <= k < sub.levels:
            raise TruncationError(
                f"level index {k} out of range for subsystem {sub.label!r} "
                f"with {sub.levels} levels"
            )
    return occ


def fock_state(
    space_: CompositeSpace, occupations: Mapping[str, int] | Sequence[int]
) -> QuantumState:
    """Product basis state with the given per-subsystem level indices.

    A mapping may omit subsystems, which default to the ground level.
    """
    vec = np.zeros(space_.dim, dtype=complex)
    vec[space_.flat_index(occupations)] = 1.0
    return QuantumState(space_, "pure", vec)


def lowering_matrix(levels: int) -> np.ndarray:
    """Truncated harmonic-oscillator lowering operator, <n-1|b|n> = sqrt(n)."""
    m = np.zeros((levels, levels), dtype=complex)
    for n in range(1, levels):
        m[n - 1, n] = np.sqrt(n)
    return m


def embed_matrix(space_: CompositeSpace, label: str, local: np.ndarray) -> np.ndarray:
    """Embed a single-subsystem matrix into the full space (identity elsewhere)."""
    i = space_.index(label)
    if local.shape != (space_.levels(label),) * 2:
        raise ValueError("local matrix does not match subsystem dimension")
    out = np.array([[1.0 + 0j]])
    for j, sub in enumerate(space_.subsystems):
        out = np.kron(out, local if j == i else np.eye(sub.levels))
    return out


def ladder_ops(space_: CompositeSpace, label: str) -> tuple[Operator, Operator]:
    """(lowering, raising) for one subsystem, embedded in the full space.

    Raising is exactly the conjugate transpose of lowering.
    """
    low = embed_matrix(space_, label, lowering_matrix(space_.levels(label)))
    lowering = Operator(space_, low)
    return lowering, lowering.dag


def number_op(space_: CompositeSpace, label: str) -> Operator:
    """Level-index (photon-number) operator for one subsystem, embedded."""
    n = np.diag(np.arange(space_.levels(label), dtype=float)).astype(complex)
    return Operator(space_, embed_matrix(space_, label, n))


def displacement_matrix(
    levels: int,
    alpha: complex,
    guard: int = DISPLACEMENT_GUARD,
    max_alpha: float = MAX_DISPLACEMENT,
) -> np.ndarray:
    """Single-mode displacement exp(alpha*b+ - alpha*b) on a truncated mode.

    The generator is exponentiated on the working truncation, which keeps the
    result exactly unitary. Adequacy of the truncation is certified on a
    guard-extended copy: the displaced vacuum there must put < 1e-4 of its
    population on the top two levels, otherwise the truncation is too small
    for this amplitude and a TruncationError is raised.
    """
    alpha = complex(alpha)
    if abs(alpha) > max_alpha:
        raise TruncationError(
            f"|alpha|={abs(alpha):.3f} exceeds configured maximum {max_alpha}"
        )
    if alpha == 0:
        return np.eye(levels, dtype=complex)
    ext = levels + guard
    b_ext = lowering_matrix(ext)
    u_ext = expm(alpha * b_ext.conj().T - np.conj(alpha) * b_ext)
    top = np.abs(u_ext[ext - 2 :, 0]) ** 2
    if top.sum() >= GUARD_TOL:
        raise TruncationError(
            f"displacement alpha={alpha} leaks {top.sum():.2e} past the "
            f"guard-extended truncation ({levels}+{guard} levels)"
        )
    b = lowering_matrix(levels)
    return expm(alpha * b.conj().T - np.conj(alpha) * b)


def displacement_op(
    space_: CompositeSpace,
    label: str,
    alpha: complex,
    guard: int = DISPLACEMENT_GUARD,
    max_alpha: float = MAX_DISPLACEMENT,
) -> Operator:
    """Displacement of one resonator mode, embedded in the full space."""
    i = space_.index(label)
    if not space_.subsystems[i].is_resonator:
        raise ValueError(f"subsystem {label!r} is not a resonator")
    local = displacement_matrix(space_.levels(label), alpha, guard, max_alpha)
    return Operator(space_, embed_matrix(space_, label, local))


def partial_trace(state: QuantumState, keep: Sequence[str]) -> QuantumState:
    """Reduced density matrix on the kept subsystems (in the space's order)."""
    if len(keep) == 0:
        raise ValueError("keep list must be non-empty")
    sp = state.space
    keep_idx = sorted(sp.index(lbl) for lbl in keep)
    drop_idx = [i for i in range(len(sp.subsystems)) if i not in keep_idx]
    shape = sp.shape
    sub = sp.subspace(keep)
    if state.is_pure:
        psi = state.data.reshape(shape)
        red = np.tensordot(psi, psi.conj(), axes=(drop_idx, drop_idx))
    else:
        n = len(shape)
        letters = string.ascii_letters
        row = [letters[i] for i in range(n)]
        col = [row[i] if i in drop_idx else letters[n + i] for i in range(n)]
        out = [row[i] for i in keep_idx] + [col[i] for i in keep_idx]
        red = np.einsum(
            "".join(row + col) + "->" + "".join(out),
            state.data.reshape(shape + shape),
        )
    d = sub.dim
    return QuantumState(sub, "density", red.reshape(d, d), atol=max(state.atol, 1e-9))


def partial_transpose(state: QuantumState, which: str) -> Operator:
    """Transpose of one factor of a bipartite density matrix.

    The result is Hermitian but in general not positive, so it is returned
    as an Operator rather than a QuantumState.
    """
    if state.kind != "density":
        raise ValueError("partial transpose is defined on density matrices")
    sp = state.space
    if len(sp.subsystems) != 2:
        raise ValueError("partial transpose expects exactly two subsystems")
    a, b = sp.shape
    t = state.data.reshape(a, b, a, b)
    perm = (2, 1, 0, 3) if sp.index(which) == 0 else (0, 3, 2, 1)
    return Operator(sp, t.transpose(perm).reshape(sp.dim, sp.dim))


def product_state(
    space_: CompositeSpace, parts: Mapping[str, np.ndarray | int]
) -> QuantumState:
    """Pure product state from per-subsystem kets (ints mean Fock indices)."""
    vec = np.array([1.0 + 0j])
    for sub in space_.subsystems:
        part = parts.get(sub.label, 0)
        if isinstance(part, (int, np.integer)):
            local = np.zeros(sub.levels, dtype=complex)
            if not 0 <= part < sub.levels:
                raise TruncationError(
                    f"level index {part} out of range for subsystem {sub.label!r}"
                )
            local[part] = 1.0
        else:
            local = np.asarray(part, dtype=complex).reshape(-1)
            if local.shape[0] != sub.levels:
                raise ValueError(f"ket for {sub.label!r} has wrong length")
            local = local / np.linalg.norm(local)
        vec = np.kron(vec, local)
    return QuantumState(space_, "pure", vec)


def product_density(
    space_: CompositeSpace, parts: Mapping[str, np.ndarray | int]
) -> QuantumState:
    """Product density matrix from per-subsystem density matrices or kets."""
    rho = np.array([[1.0 + 0j]])
    for sub in space_.subsystems:
        part = parts.get(sub.label, 0)
        if isinstance(part, (int, np.integer)):
            local = np.zeros((sub.levels, sub.levels), dtype=complex)
            local[part, part] = 1.0
        else:
            arr = np.asarray(part, dtype=complex)
            if arr.ndim == 1:
                arr = arr / np.linalg.norm(arr)
                local = np.outer(arr, arr.conj())
            else:
                local = arr
            if local.shape != (sub.levels,) * 2:
                raise ValueError(f"part for {sub.label!r} has wrong shape")
        rho = np.kron(rho, local)
    return QuantumState(space_, "density", rho)


def apply_subsystem(
    space_: CompositeSpace, label: str, local: np.ndarray, data: np.ndarray
) -> np.ndarray:
    """Apply a single-subsystem matrix to a state vector or density matrix.

    Vectors are contracted on the subsystem axis; density matrices get
    ``local . rho . local^dag``. Much cheaper than embedding ``local`` into
    the full space first.
    """
    i = space_.index(label)
    shape = space_.shape
    arr = np.asarray(data, dtype=complex)
    if arr.ndim == 1:
        t = np.tensordot(local, arr.reshape(shape), axes=([1], [i]))
        return np.moveaxis(t, 0, i).reshape(-1)
    n = len(shape)
    t = arr.reshape(shape + shape)
    t = np.moveaxis(np.tensordot(local, t, axes=([1], [i])), 0, i)
    t = np.moveaxis(np.tensordot(local.conj(), t, axes=([1], [n + i])), 0, n + i)
    d = space_.dim
    return t.reshape(d, d)


def apply_subsystem_to_columns(
    space_: CompositeSpace, label: str, local: np.ndarray, columns: np.ndarray
) -> np.ndarray:
    """Apply a single-subsystem matrix to a (dim, K) batch of state vectors."""
    i = space_.index(label)
    shape = space_.shape
    k = columns.shape[1]
    t = np.tensordot(local, columns.reshape(shape + (k,)), axes=([1], [i]))
    return np.moveaxis(t, 0, i).reshape(space_.dim, k)


def embed_state(state: QuantumState, target: CompositeSpace) -> QuantumState:
    """Zero-pad a state into a larger truncation of the same subsystems."""
    sp = state.space
    if sp.labels != target.labels:
        raise ValueError("embed_state requires identical subsystem labels/order")
    for lbl in sp.labels:
        if target.levels(lbl) < sp.levels(lbl):
            raise TruncationError(f"target truncation smaller for {lbl!r}")
    sl = tuple(slice(0, s) for s in sp.shape)
    if state.is_pure:
        out = np.zeros(target.shape, dtype=complex)
        out[sl] = state.data.reshape(sp.shape)
        return QuantumState(target, "pure", out.reshape(-1), atol=state.atol)
    out = np.zeros(target.shape + target.shape, dtype=complex)
    out[sl + sl] = state.data.reshape(sp.shape + sp.shape)
    d = target.dim
    return QuantumState(target, "density", out.reshape(d, d), atol=state.atol)
