"""Product-operator expansions of spin density matrices.

A density matrix for ``n`` spin-1/2 nuclei is written as a real linear
combination of product operators: tensor words whose single-spin factors are
the angular momentum operators Ix, Iy, Iz or the identity, scaled by
``2**(q-1)`` where ``q`` counts the non-identity factors.  With that scaling
every word with at least one active spin equals a Pauli string divided by
two, so the family is orthogonal under the trace inner product with

    Tr(P * P) = 2**(n - 2)

independent of ``q``.  Coefficients are therefore recovered as
``Tr(m @ P) / 2**(n - 2)``.

The module is deliberately free of any spin-system metadata: terms address
spins by index, and labels enter only at formatting time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "AXES",
    "ProductTerm",
    "OperatorExpansion",
    "to_dense",
    "from_dense",
    "format_expansion",
]

#: Letters allowed in a term word.  "e" marks an identity factor.
AXES = "xyz"
_LETTERS = "e" + AXES

_PAULI = {
    "e": np.eye(2, dtype=complex),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

#: Single-spin angular momentum operators, sigma / 2.
SPIN_HALF = {a: _PAULI[a] / 2.0 for a in AXES}


@dataclass(frozen=True)
class ProductTerm:
    """One basis word of a product-operator expansion.

    Parameters
    ----------
    word:
        String of length ``n_spins`` over the alphabet ``exyz``; position k
        names the factor acting on spin k.  The all-``e`` word denotes the
        identity operator (used for trace offsets, never produced by ideal
        traceless states).
    """

    word: str

    def __post_init__(self) -> None:
        if not self.word:
            raise ValueError("term word must name at least one spin")
        bad = set(self.word) - set(_LETTERS)
        if bad:
            raise ValueError(f"term word may only contain 'exyz', got {sorted(bad)!r}")

    @classmethod
    def build(cls, n_spins: int, factors: Mapping[int, str]) -> "ProductTerm":
        """Assemble a word from a sparse ``{spin index: axis}`` mapping."""
        letters = ["e"] * n_spins
        for idx, axis in factors.items():
            if not 0 <= idx < n_spins:
                raise ValueError(f"spin index {idx} out of range for {n_spins} spins")
            if axis not in AXES:
                raise ValueError(f"factor axis must be one of 'xyz', got {axis!r}")
            letters[idx] = axis
        return cls("".join(letters))

    @property
    def n_spins(self) -> int:
        return len(self.word)

    @property
    def order(self) -> int:
        """Number of non-identity factors in the word."""
        return sum(1 for c in self.word if c != "e")

    @property
    def active(self) -> tuple[tuple[int, str], ...]:
        """``(spin index, axis)`` pairs for the non-identity factors."""
        return tuple((i, c) for i, c in enumerate(self.word) if c != "e")

    def matrix(self) -> np.ndarray:
        """Dense matrix of the term, including the 2**(q-1) scaling."""
        out = np.ones((1, 1), dtype=complex)
        for c in self.word:
            out = np.kron(out, SPIN_HALF[c] if c != "e" else _PAULI["e"])
        q = self.order
        if q:
            out *= 2.0 ** (q - 1)
        return out

    def _sort_key(self) -> tuple:
        idx = tuple(i for i, _ in self.active)
        axes = tuple(a for _, a in self.active)
        return (len(idx), idx, axes)


@dataclass
class OperatorExpansion:
    """Sparse real-coefficient combination of :class:`ProductTerm` words."""

    n_spins: int
    terms: dict[ProductTerm, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_spins < 1:
            raise ValueError("expansion needs at least one spin")
        for term in self.terms:
            if term.n_spins != self.n_spins:
                raise ValueError(
                    f"term {term.word!r} sized for {term.n_spins} spins, "
                    f"expansion has {self.n_spins}"
                )

    def coefficient(self, term: ProductTerm | str) -> float:
        """Coefficient of ``term``; zero when the word is absent."""
        if isinstance(term, str):
            term = ProductTerm(term)
        if term.n_spins != self.n_spins:
            raise ValueError("term size does not match expansion")
        return self.terms.get(term, 0.0)

    def items(self) -> list[tuple[ProductTerm, float]]:
        """Term/coefficient pairs in canonical display order."""
        return sorted(self.terms.items(), key=lambda kv: kv[0]._sort_key())

    def __iter__(self) -> Iterator[tuple[ProductTerm, float]]:
        return iter(self.items())

    def __len__(self) -> int:
        return len(self.terms)


def to_dense(expansion: OperatorExpansion) -> np.ndarray:
    """Realize an expansion as a dense complex matrix."""
    dim = 2 ** expansion.n_spins
    out = np.zeros((dim, dim), dtype=complex)
    for term, coeff in expansion.terms.items():
        out += coeff * term.matrix()
    return out


def _pauli_transform(matrix: np.ndarray, n_spins: int) -> np.ndarray:
    """All 4**n Pauli-string overlaps Tr(m @ S_w) / 2**n in one contraction.

    Reshapes ``m`` into a rank-2n tensor and contracts one spin at a time
    against the stacked Pauli basis, costing O(n * 4**n) instead of the
    naive O(16**n).
    """
    basis = np.stack([_PAULI[c] for c in _LETTERS])  # (4, 2, 2)
    # tensor[r0..r_{n-1}, c0..c_{n-1}] = m[r, c]
    tensor = matrix.reshape((2,) * (2 * n_spins))
    for k in range(n_spins):
        # After k steps the axes read [a_{k-1}..a_0, r_k..r_{n-1}, c_k..c_{n-1}],
        # so spin k's column axis always sits at position n and its row axis
        # at position k.  Contract both against sigma[a, c, r].
        tensor = np.tensordot(basis, tensor, axes=[[1, 2], [n_spins, k]])
    # Spin axes accumulate most-recent-first; flip back to spin order.
    coeffs = tensor.transpose(tuple(reversed(range(n_spins))))
    return coeffs / 2.0 ** n_spins


def from_dense(matrix: np.ndarray, tol: float = 1e-9) -> OperatorExpansion:
    """Project a Hermitian matrix onto the product-operator basis.

    Coefficients whose magnitude does not exceed ``tol`` are dropped.  The
    same tolerance bounds the allowed anti-Hermitian part of the input.

    Raises
    ------
    ValueError
        If the matrix is not square with a power-of-two dimension, or is
        not Hermitian within ``tol``.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    dim = m.shape[0]
    n_spins = dim.bit_length() - 1
    if dim < 2 or 2 ** n_spins != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    herm_defect = float(np.max(np.abs(m - m.conj().T)))
    if herm_defect > tol:
        raise ValueError(
            f"matrix is not Hermitian within {tol:g} (defect {herm_defect:.3e})"
        )

    overlaps = _pauli_transform(m, n_spins)
    # product operator = Pauli string / 2 whenever at least one factor is
    # active, so those coefficients pick up a factor of two
    active_count = np.zeros(overlaps.shape, dtype=np.int8)
    marker = np.array([0, 1, 1, 1], dtype=np.int8)
    for k in range(n_spins):
        shape = (1,) * k + (4,) + (1,) * (n_spins - k - 1)
        active_count = active_count + marker.reshape(shape)
    scaled = overlaps.real * np.where(active_count > 0, 2.0, 1.0)

    terms: dict[ProductTerm, float] = {}
    for multi in np.argwhere(np.abs(scaled) > tol):
        word = "".join(_LETTERS[d] for d in multi)
        terms[ProductTerm(word)] = float(scaled[tuple(multi)])
    return OperatorExpansion(n_spins, terms)


def _term_label(term: ProductTerm, labels: Sequence[str]) -> str:
    q = term.order
    if q == 0:
        return "E"
    # display factors x before y before z, index order inside each axis
    ordered = sorted(term.active, key=lambda ia: (AXES.index(ia[1]), ia[0]))
    body = "".join(f"I{axis}^{{{labels[idx]}}}" for idx, axis in ordered)
    prefix = str(2 ** (q - 1)) if q > 1 else ""
    return prefix + body


def format_expansion(
    expansion: OperatorExpansion,
    labels: Sequence[str],
    precision: int = 3,
) -> str:
    """Render an expansion as a signed sum of labelled words.

    Terms appear in canonical order (by active spin indices, then axes), each
    as ``coefficient*word`` with a centred-dot separator, e.g.
    ``1.000*Iz^{C1} + 0.707*2Ix^{C2}Iz^{C1}`` (with U+00B7 for ``*``).  An
    empty expansion renders as ``"0"``.
    """
    if len(labels) != expansion.n_spins:
        raise ValueError(
            f"got {len(labels)} labels for {expansion.n_spins} spins"
        )
    pieces: list[str] = []
    for term, coeff in expansion.items():
        name = _term_label(term, labels)
        mag = f"{abs(coeff):.{precision}f}·{name}"
        if not pieces:
            pieces.append(mag if coeff >= 0 else f"-{mag}")
        else:
            pieces.append(f"+ {mag}" if coeff >= 0 else f"- {mag}")
    return " ".join(pieces) if pieces else "0"
