"""Randomized entangling ansatz: layouts, synthesis, and serialization.

Every gate is of the form exp(-i * theta * G) for a Pauli(-product)
generator G, so the circuit is the identity at zero parameters and exactly
2*pi-periodic in every coordinate.

Structure: an initial Euler layer of (Z, Y, Z) rotations on every qubit
(3 parameters each), then the entangling blocks.  A block on qubit pair
(i, j) carries 5 parameters:

    exp(-i t0 XX) . exp(-i t1 ZZ) . RY_i(t2) . RZ_i(t3) . RY_j(t4)

The missing Z rotation on the second qubit is supplied by other blocks and
the initial layer; together with the XX entangler the gate set is universal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qsim import Unitary, apply_matrix_to_vectors

PARAMS_PER_SINGLE = 3
PARAMS_PER_BLOCK = 5

FORMAT_VERSION = 1


class AnsatzError(ValueError):
    pass


@dataclass(frozen=True)
class ReaLayout:
    n_qubits: int
    seed: int
    blocks: tuple  # ordered (i, j) qubit pairs

    def __post_init__(self):
        if self.n_qubits < 2:
            raise AnsatzError("layout needs at least 2 qubits")
        for i, j in self.blocks:
            if i == j or not (0 <= i < self.n_qubits and 0 <= j < self.n_qubits):
                raise AnsatzError(f"invalid block pair ({i}, {j})")


@dataclass(frozen=True)
class ReaParameters:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size


def build_rea(n_qubits: int, n_blocks: int, seed: int) -> ReaLayout:
    """Deterministic layout with uniformly drawn pairs, no immediate repeats."""
    if n_qubits < 2:
        raise AnsatzError("n_qubits must be at least 2")
    if n_blocks < 0:
        raise AnsatzError("n_blocks must be non-negative")
    rng = np.random.default_rng(seed)
    blocks = []
    previous = None
    for _ in range(n_blocks):
        while True:
            i, j = rng.choice(n_qubits, size=2, replace=False)
            pair = (int(i), int(j))
            if pair != previous:
                break
        blocks.append(pair)
        previous = pair
    return ReaLayout(n_qubits, int(seed), tuple(blocks))


def default_block_count(n_qubits: int) -> int:
    """n * (n + 1) entangling blocks, the default encoder capacity rule."""
    return n_qubits * (n_qubits + 1)


def default_recovery_block_count(n_qubits: int) -> int:
    """16 * n * (n + 1) / 3 blocks for recovery circuits (160 at n = 5).

    Recovery has to synthesize a syndrome-controlled correction on top of
    (un)encoding, which empirically needs five-plus times the encoder
    capacity: below this rule quasi-Newton training stalls in shallow
    plateaus well above the channel-adapted optimum.
    """
    return 16 * n_qubits * (n_qubits + 1) // 3


def parameter_count(layout: ReaLayout) -> int:
    return PARAMS_PER_SINGLE * layout.n_qubits + PARAMS_PER_BLOCK * len(layout.blocks)


def zero_parameters(layout: ReaLayout) -> ReaParameters:
    return ReaParameters(np.zeros(parameter_count(layout)))


def random_parameters(layout: ReaLayout, rng: np.random.Generator,
                      scale: float = 0.1) -> ReaParameters:
    """Near-identity initialization, uniform in [-scale, scale] radians."""
    return ReaParameters(rng.uniform(-scale, scale, size=parameter_count(layout)))


# gate kinds: ('z', (q,), idx), ('y', (q,), idx), ('xx', (i, j), idx), ('zz', ...)

def gate_sequence(layout: ReaLayout):
    """Ordered (kind, qubits, parameter index) triples of the circuit."""
    seq = []
    idx = 0
    for q in range(layout.n_qubits):
        seq.append(("z", (q,), idx))
        seq.append(("y", (q,), idx + 1))
        seq.append(("z", (q,), idx + 2))
        idx += 3
    for i, j in layout.blocks:
        seq.append(("xx", (i, j), idx))
        seq.append(("zz", (i, j), idx + 1))
        seq.append(("y", (i,), idx + 2))
        seq.append(("z", (i,), idx + 3))
        seq.append(("y", (j,), idx + 4))
        idx += 5
    return seq


_GEN = {
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_GEN["xx"] = np.kron(np.array([[0, 1], [1, 0]]), np.array([[0, 1], [1, 0]])).astype(complex)
_GEN["zz"] = np.kron(_GEN["z"], _GEN["z"])


def generator_matrix(kind: str) -> np.ndarray:
    return _GEN[kind]


def gate_matrix(kind: str, theta: float) -> np.ndarray:
    """exp(-i theta G) = cos(theta) I - i sin(theta) G (G is involutory)."""
    g = _GEN[kind]
    return np.cos(theta) * np.eye(g.shape[0]) - 1j * np.sin(theta) * g


def apply_rea(vecs: np.ndarray, layout: ReaLayout, params: ReaParameters,
              dagger: bool = False, total_qubits: int | None = None) -> np.ndarray:
    """Apply the circuit (or its inverse) to a batch of state vectors.

    ``total_qubits`` lets the circuit act on the lowest-indexed qubits of a
    larger register (identity elsewhere).
    """
    if len(params) != parameter_count(layout):
        raise AnsatzError(
            f"parameter length {len(params)} does not match layout "
            f"({parameter_count(layout)} expected)"
        )
    n = layout.n_qubits if total_qubits is None else total_qubits
    if n < layout.n_qubits:
        raise AnsatzError("total_qubits smaller than the layout register")
    seq = gate_sequence(layout)
    vals = params.values
    out = vecs
    if dagger:
        for kind, qubits, idx in reversed(seq):
            out = apply_matrix_to_vectors(out, gate_matrix(kind, -vals[idx]), qubits, n)
    else:
        for kind, qubits, idx in seq:
            out = apply_matrix_to_vectors(out, gate_matrix(kind, vals[idx]), qubits, n)
    return out


def synthesize(layout: ReaLayout, params: ReaParameters) -> Unitary:
    """Full unitary of the circuit (dense; intended for small registers)."""
    dim = 2**layout.n_qubits
    mat = apply_rea(np.eye(dim, dtype=complex), layout, params)
    return Unitary(layout.n_qubits, mat)


def serialize(layout: ReaLayout, params: ReaParameters, provenance: dict | None = None) -> dict:
    """Lossless record of a layout + parameter pair."""
    if len(params) != parameter_count(layout):
        raise AnsatzError("layout/parameter mismatch")
    record = {
        "format_version": FORMAT_VERSION,
        "n_qubits": layout.n_qubits,
        "seed": layout.seed,
        "blocks": [list(b) for b in layout.blocks],
        "params": [float(v) for v in params.values],
    }
    if provenance is not None:
        record["provenance"] = dict(provenance)
    return record


def deserialize(record: dict):
    """Inverse of :func:`serialize`; returns (layout, params)."""
    try:
        layout = ReaLayout(
            int(record["n_qubits"]),
            int(record["seed"]),
            tuple((int(i), int(j)) for i, j in record["blocks"]),
        )
        params = ReaParameters(np.array(record["params"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise AnsatzError(f"malformed ansatz record: {exc}")
    if len(params) != parameter_count(layout):
        raise AnsatzError(
            f"record parameter length {len(params)} does not match layout"
        )
    return layout, params
