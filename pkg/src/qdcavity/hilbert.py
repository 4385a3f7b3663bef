"""Operator algebra on (two-level emitter) x (truncated Fock mode).

Basis convention used everywhere in the package: the emitter slot comes
first and the Fock slot second, and the emitter basis is ordered
``(ground, excited)``.  A composite basis index is therefore
``i = e * (n_max + 1) + n`` with ``e`` in ``{0, 1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CompositionError, InvalidCutoffError

EMITTER = "emitter"
FIELD = "field"
COMPOSITE = "composite"

HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class CompositeSpace:
    """Emitter (x) Fock space with photon levels ``0..n_max``."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise InvalidCutoffError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def fock_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    def index(self, excited: bool, n: int) -> int:
        return int(excited) * self.fock_dim + n

    def basis_projector(self, excited: bool, n: int) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        i = self.index(excited, n)
        out[i, i] = 1.0
        return out

    def operators(self) -> "CompositeOperators":
        return composite_operators(self)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense complex matrix tagged with the slot it acts on.

    ``slot`` is one of ``"emitter"``, ``"field"`` or ``"composite"``.  Field
    and composite operators also carry the Fock cutoff.  Setting
    ``hermitian=True`` checks the property at construction.
    """

    entries: np.ndarray
    slot: str = COMPOSITE
    n_max: int | None = None
    hermitian: bool = False

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise CompositionError(f"operator must be square, got shape {m.shape}")
        expected = _slot_dim(self.slot, self.n_max)
        if expected is not None and m.shape[0] != expected:
            raise CompositionError(
                f"{self.slot} operator with n_max={self.n_max} must be {expected}x{expected}, "
                f"got {m.shape}"
            )
        if self.hermitian and not np.allclose(m, m.conj().T, atol=HERMITIAN_ATOL, rtol=0):
            dev = np.max(np.abs(m - m.conj().T))
            raise CompositionError(f"operator flagged Hermitian deviates by {dev:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def space(self) -> CompositeSpace | None:
        if self.slot == COMPOSITE:
            return CompositeSpace(self.n_max)
        return None

    def dag(self) -> "OperatorMatrix":
        return self._like(self.entries.conj().T, hermitian=self.hermitian)

    def is_hermitian(self, atol: float = HERMITIAN_ATOL) -> bool:
        return bool(np.allclose(self.entries, self.entries.conj().T, atol=atol, rtol=0))

    def _like(self, entries, hermitian=False) -> "OperatorMatrix":
        return OperatorMatrix(entries, self.slot, self.n_max, hermitian)

    def _check_same(self, other: "OperatorMatrix"):
        if (self.slot, self.n_max) != (other.slot, other.n_max):
            raise CompositionError(
                f"cannot combine {self.slot}(n_max={self.n_max}) with "
                f"{other.slot}(n_max={other.n_max})"
            )

    def __matmul__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        self._check_same(other)
        return self._like(self.entries @ other.entries)

    def __add__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        self._check_same(other)
        return self._like(self.entries + other.entries)

    def __sub__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        self._check_same(other)
        return self._like(self.entries - other.entries)

    def __neg__(self):
        return self._like(-self.entries, hermitian=self.hermitian)

    def __mul__(self, scalar):
        if isinstance(scalar, OperatorMatrix):
            return NotImplemented
        scalar = complex(scalar)
        return self._like(self.entries * scalar, hermitian=self.hermitian and scalar.imag == 0)

    __rmul__ = __mul__

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)


def _slot_dim(slot: str, n_max: int | None) -> int | None:
    if slot == EMITTER:
        return 2
    if slot == FIELD:
        return None if n_max is None else n_max + 1
    if slot == COMPOSITE:
        return None if n_max is None else 2 * (n_max + 1)
    raise CompositionError(f"unknown slot {slot!r}")


def annihilation(n_max: int) -> OperatorMatrix:
    """Truncated photon annihilation operator on Fock levels ``0..n_max``."""
    if int(n_max) != n_max or n_max < 1:
        raise InvalidCutoffError(f"n_max must be an integer >= 1, got {n_max!r}")
    m = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)
    return OperatorMatrix(m, FIELD, int(n_max))


def emitter_operators() -> tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix]:
    """Return ``(sigma_minus, sigma_plus, sigma_z)`` in the basis ``(g, e)``.

    ``sigma_z = |e><e| - |g><g|`` so the ground state has ``<sigma_z> = -1``.
    """
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    sz = np.diag([-1.0, 1.0]).astype(complex)
    return (
        OperatorMatrix(sm, EMITTER),
        OperatorMatrix(sm.conj().T, EMITTER),
        OperatorMatrix(sz, EMITTER, hermitian=True),
    )


def identity(slot: str, n_max: int | None = None) -> OperatorMatrix:
    dim = _slot_dim(slot, n_max)
    if dim is None:
        raise CompositionError(f"{slot} identity needs n_max")
    return OperatorMatrix(np.eye(dim, dtype=complex), slot, n_max, hermitian=True)


def tensor(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    """Kronecker product ``a (x) b`` of an emitter and a field operator.

    Only the fixed order emitter-then-field is accepted.
    """
    if a.slot != EMITTER or b.slot != FIELD:
        raise CompositionError(
            f"tensor expects (emitter, field) operands, got ({a.slot}, {b.slot})"
        )
    return OperatorMatrix(
        np.kron(a.entries, b.entries),
        COMPOSITE,
        b.n_max,
        hermitian=a.hermitian and b.hermitian,
    )


class CompositeOperators(NamedTuple):
    a: OperatorMatrix
    sigma_minus: OperatorMatrix
    sigma_plus: OperatorMatrix
    sigma_z: OperatorMatrix
    identity: OperatorMatrix


def composite_operators(space: CompositeSpace) -> CompositeOperators:
    """The cavity and emitter operators embedded in ``space``."""
    sm, sp, sz = emitter_operators()
    a = annihilation(space.n_max)
    i_e = identity(EMITTER)
    i_f = identity(FIELD, space.n_max)
    return CompositeOperators(
        a=tensor(i_e, a),
        sigma_minus=tensor(sm, i_f),
        sigma_plus=tensor(sp, i_f),
        sigma_z=tensor(sz, i_f),
        identity=tensor(i_e, i_f),
    )
