"""Baseline stabilizer codes: [[3,1,1]] repetition and the [[5,1,3]] perfect code.

Recovery is realized measurement-free, as a deterministic CPTP map whose
Kraus branches are (correction x syndrome projector) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from .channels import PAULIS
from .qsim import KrausSet, Unitary


class CodeError(ValueError):
    pass


def pauli_matrix(pauli_string: str) -> np.ndarray:
    """Dense matrix of an n-qubit Pauli string like 'XZZXI'."""
    mat = np.array([[1.0 + 0j]])
    for ch in pauli_string:
        try:
            mat = np.kron(mat, PAULIS[ch])
        except KeyError:
            raise CodeError(f"invalid Pauli letter {ch!r} in {pauli_string!r}")
    return mat


def paulis_commute(a: str, b: str) -> bool:
    """Pauli strings commute iff they anticommute on an even number of sites."""
    if len(a) != len(b):
        raise CodeError("Pauli strings differ in length")
    odd = sum(
        1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y
    )
    return odd % 2 == 0


@dataclass(frozen=True)
class StabilizerCode:
    """A k=1 stabilizer code with a fixed syndrome-correction table."""

    name: str
    n: int
    d: int
    generators: tuple  # Pauli strings
    codewords: tuple = field(repr=False)  # two orthonormal state vectors
    correction_table: dict = field(repr=False)  # syndrome tuple -> Pauli string

    k: int = 1

    def __post_init__(self):
        for g in self.generators:
            if len(g) != self.n:
                raise CodeError(f"generator {g} has wrong length")
        for a in self.generators:
            for b in self.generators:
                if not paulis_commute(a, b):
                    raise CodeError(f"generators {a} and {b} anticommute")
        cw0, cw1 = (np.asarray(c, dtype=complex) for c in self.codewords)
        if abs(np.vdot(cw0, cw0) - 1) > 1e-10 or abs(np.vdot(cw1, cw1) - 1) > 1e-10:
            raise CodeError("codewords are not normalized")
        if abs(np.vdot(cw0, cw1)) > 1e-10:
            raise CodeError("codewords are not orthogonal")
        for g in self.generators:
            gm = pauli_matrix(g)
            for cw in (cw0, cw1):
                if np.max(np.abs(gm @ cw - cw)) > 1e-8:
                    raise CodeError(f"generator {g} does not stabilize a codeword")

    def syndrome(self, error: str) -> tuple:
        """Commutation pattern of a Pauli error with the generators."""
        return tuple(0 if paulis_commute(error, g) else 1 for g in self.generators)


def _single_qubit_errors(n: int, letters=("X", "Y", "Z")):
    for q in range(n):
        for letter in letters:
            yield "I" * q + letter + "I" * (n - q - 1)


def _build_table(n: int, generators, letters) -> dict:
    """Syndrome table mapping each single-qubit error to itself as correction."""
    table = {(0,) * len(generators): "I" * n}
    for err in _single_qubit_errors(n, letters):
        s = tuple(0 if paulis_commute(err, g) else 1 for g in generators)
        if s in table:
            raise CodeError(f"degenerate syndrome {s} for error {err}")
        table[s] = err
    # any syndrome not reached by a single-qubit error gets the identity
    for s in product((0, 1), repeat=len(generators)):
        table.setdefault(s, "I" * n)
    return table


@lru_cache(maxsize=None)
def repetition_code() -> StabilizerCode:
    """[[3,1,1]] bitflip repetition code with majority-vote correction."""
    n = 3
    cw0 = np.zeros(8, dtype=complex)
    cw0[0b000] = 1.0
    cw1 = np.zeros(8, dtype=complex)
    cw1[0b111] = 1.0
    generators = ("ZZI", "IZZ")
    table = _build_table(n, generators, letters=("X",))
    return StabilizerCode("rep3", n, 1, generators, (cw0, cw1), table)


@lru_cache(maxsize=None)
def perfect_code() -> StabilizerCode:
    """[[5,1,3]] perfect code: generators XZZXI and cyclic shifts."""
    n = 5
    generators = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")
    proj = np.eye(32, dtype=complex)
    for g in generators:
        proj = proj @ (np.eye(32) + pauli_matrix(g)) / 2.0
    # logical Z = ZZZZZ splits the 2-dim codespace into |0_L>, |1_L>
    z_l = pauli_matrix("ZZZZZ")
    sub = proj @ (np.eye(32) + z_l) / 2.0 @ proj
    evals, evecs = np.linalg.eigh(sub)
    cw0 = evecs[:, -1]
    # deterministic phase: first sizeable amplitude made real positive
    pivot = np.argmax(np.abs(cw0) > 1e-8)
    cw0 = cw0 * (abs(cw0[pivot]) / cw0[pivot])
    cw1 = pauli_matrix("XXXXX") @ cw0
    table = _build_table(n, generators, letters=("X", "Y", "Z"))
    return StabilizerCode("perfect5", n, 3, generators, (cw0, cw1), table)


CODE_REGISTRY = {"rep3": repetition_code, "perfect5": perfect_code}


def get_code(code_id: str) -> StabilizerCode:
    try:
        return CODE_REGISTRY[code_id]()
    except KeyError:
        raise CodeError(
            f"unknown code id {code_id!r}, expected one of {sorted(CODE_REGISTRY)}"
        )


def encoder_unitary(code: StabilizerCode) -> Unitary:
    """An n-qubit unitary with |b>|0...0> -> |b_L> for b in {0, 1}.

    The remaining columns are completed deterministically by Gram-Schmidt
    over the computational basis; only the two codeword columns matter for
    the encode/decode pipeline.
    """
    dim = 2**code.n
    cols = np.zeros((dim, dim), dtype=complex)
    pos = {0: 0, 1: 1 << (code.n - 1)}
    basis = [np.asarray(code.codewords[0]), np.asarray(code.codewords[1])]
    cols[:, pos[0]] = basis[0]
    cols[:, pos[1]] = basis[1]
    free_positions = [j for j in range(dim) if j not in pos.values()]
    idx = 0
    for j in range(dim):
        if idx >= len(free_positions):
            break
        v = np.zeros(dim, dtype=complex)
        v[j] = 1.0
        for b in basis:
            v = v - np.vdot(b, v) * b
        nrm = np.linalg.norm(v)
        if nrm > 1e-6:
            v = v / nrm
            basis.append(v)
            cols[:, free_positions[idx]] = v
            idx += 1
    if idx != len(free_positions):
        raise CodeError("failed to complete encoder unitary")
    return Unitary(code.n, cols)


def recovery_channel(code: StabilizerCode) -> KrausSet:
    """Kraus branches C_s Pi_s over all syndromes s.

    Trace-preserving because the syndrome projectors resolve the identity
    and the corrections are unitary.
    """
    n_gen = len(code.generators)
    expected = 2**n_gen
    if len(code.correction_table) != expected:
        raise CodeError(
            f"correction table has {len(code.correction_table)} entries, "
            f"expected {expected}"
        )
    dim = 2**code.n
    gen_mats = [pauli_matrix(g) for g in code.generators]
    ops = []
    for s, correction in sorted(code.correction_table.items()):
        proj = np.eye(dim, dtype=complex)
        for bit, gm in zip(s, gen_mats):
            proj = proj @ (np.eye(dim) + (-1) ** bit * gm) / 2.0
        ops.append(pauli_matrix(correction) @ proj)
    return KrausSet(tuple(ops))
