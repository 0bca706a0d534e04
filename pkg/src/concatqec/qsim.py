"""Dense density-matrix simulation of small qubit registers.

Qubit ordering convention: qubit 0 is the most significant bit of the
computational-basis index, so on a 3-qubit register |100> (qubit 0 set)
has index 4.  Every function in the package follows this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

MAX_QUBITS = 12

TRACE_TOL = 1e-10
HERM_TOL = 1e-10
PSD_TOL = 1e-9


class SimulationError(ValueError):
    """Invalid state, operator, or qubit addressing."""


def _as_complex(data) -> np.ndarray:
    arr = np.array(data, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise SimulationError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def _n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if 2**n != dim:
        raise SimulationError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD, trace-1 operator on an n-qubit register."""

    n_qubits: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _as_complex(self.data)
        if _n_qubits_of(arr.shape[0]) != self.n_qubits:
            raise SimulationError(
                f"dimension {arr.shape[0]} does not match {self.n_qubits} qubits"
            )
        if self.n_qubits > MAX_QUBITS:
            raise SimulationError(f"register cap is {MAX_QUBITS} qubits")
        if abs(np.trace(arr) - 1.0) > TRACE_TOL:
            raise SimulationError(f"trace {np.trace(arr)} is not 1")
        if np.max(np.abs(arr - arr.conj().T)) > HERM_TOL:
            raise SimulationError("matrix is not Hermitian")
        evals = np.linalg.eigvalsh(arr)
        if evals[0] < -PSD_TOL:
            raise SimulationError(f"matrix is not PSD (min eigenvalue {evals[0]})")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @classmethod
    def from_vector(cls, vec) -> "DensityMatrix":
        """Pure state |v><v| from a (normalized) state vector."""
        v = np.asarray(vec, dtype=complex).ravel()
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            raise SimulationError("cannot normalize the zero vector")
        v = v / nrm
        return cls(_n_qubits_of(v.size), np.outer(v, v.conj()))

    @classmethod
    def computational(cls, n_qubits: int, index: int = 0) -> "DensityMatrix":
        vec = np.zeros(2**n_qubits, dtype=complex)
        vec[index] = 1.0
        return cls.from_vector(vec)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(
            self.n_qubits + other.n_qubits, np.kron(self.data, other.data)
        )


@dataclass(frozen=True)
class Unitary:
    n_qubits: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _as_complex(self.data)
        if _n_qubits_of(arr.shape[0]) != self.n_qubits:
            raise SimulationError(
                f"dimension {arr.shape[0]} does not match {self.n_qubits} qubits"
            )
        if np.max(np.abs(arr @ arr.conj().T - np.eye(arr.shape[0]))) > 1e-10:
            raise SimulationError("matrix is not unitary")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


@dataclass(frozen=True)
class KrausSet:
    """Trace-preserving set of Kraus operators of equal dimension."""

    operators: tuple = ()

    def __post_init__(self):
        ops = tuple(_as_complex(op) for op in self.operators)
        if not ops:
            raise SimulationError("KrausSet needs at least one operator")
        dim = ops[0].shape[0]
        if any(op.shape[0] != dim for op in ops):
            raise SimulationError("Kraus operators differ in dimension")
        total = sum(op.conj().T @ op for op in ops)
        if np.max(np.abs(total - np.eye(dim))) > 1e-10:
            raise SimulationError("Kraus set is not trace-preserving")
        for op in ops:
            op.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return _n_qubits_of(self.dim)


# ---------------------------------------------------------------------------
# low-level tensor kernels (raw ndarrays, no validation) shared by the package
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @_njit(cache=True)
    def _nb_gate1(flat, out, u, pre, post):
        for p in range(pre):
            base = p * 2 * post
            for s in range(post):
                a = flat[base + s]
                b = flat[base + post + s]
                out[base + s] = u[0, 0] * a + u[0, 1] * b
                out[base + post + s] = u[1, 0] * a + u[1, 1] * b

    @_njit(cache=True)
    def _nb_gate2_cross(flat, out, d, a, pre, mid, post):
        # u = diag(d) + antidiag(a): covers ZZ/XX rotations and generators
        half = mid * 2 * post
        for p in range(pre):
            for m in range(mid):
                b00 = p * 2 * half + m * 2 * post
                b01 = b00 + post
                b10 = b00 + half
                b11 = b10 + post
                for s in range(post):
                    x0 = flat[b00 + s]
                    x1 = flat[b01 + s]
                    x2 = flat[b10 + s]
                    x3 = flat[b11 + s]
                    out[b00 + s] = d[0] * x0 + a[0] * x3
                    out[b01 + s] = d[1] * x1 + a[1] * x2
                    out[b10 + s] = d[2] * x2 + a[2] * x1
                    out[b11 + s] = d[3] * x3 + a[3] * x0

    @_njit(cache=True)
    def _nb_gate2_dense(flat, out, u, pre, mid, post):
        half = mid * 2 * post
        for p in range(pre):
            for m in range(mid):
                b00 = p * 2 * half + m * 2 * post
                b01 = b00 + post
                b10 = b00 + half
                b11 = b10 + post
                for s in range(post):
                    x0 = flat[b00 + s]
                    x1 = flat[b01 + s]
                    x2 = flat[b10 + s]
                    x3 = flat[b11 + s]
                    out[b00 + s] = u[0, 0] * x0 + u[0, 1] * x1 + u[0, 2] * x2 + u[0, 3] * x3
                    out[b01 + s] = u[1, 0] * x0 + u[1, 1] * x1 + u[1, 2] * x2 + u[1, 3] * x3
                    out[b10 + s] = u[2, 0] * x0 + u[2, 1] * x1 + u[2, 2] * x2 + u[2, 3] * x3
                    out[b11 + s] = u[3, 0] * x0 + u[3, 1] * x1 + u[3, 2] * x2 + u[3, 3] * x3


def _accumulate_rows(out_slices, in_slices, u):
    """out_a = sum_b u[a, b] * in_b over strided slices, skipping zeros."""
    for a, o in enumerate(out_slices):
        started = False
        for b, src in enumerate(in_slices):
            coeff = u[a, b]
            if coeff == 0.0:
                continue
            if not started:
                np.multiply(src, coeff, out=o)
                started = True
            else:
                o += coeff * src
        if not started:
            o[...] = 0.0


def apply_matrix_to_vectors(vecs: np.ndarray, u: np.ndarray, targets, n: int) -> np.ndarray:
    """Apply a k-qubit operator to the given qubits of a batch of vectors.

    ``vecs`` has shape (2**n,) or (2**n, batch); ``u`` is (2**k, 2**k) acting
    on ``targets`` (in the given order).  One- and two-qubit operators use
    strided slice kernels (no axis permutation); larger ones fall back to a
    tensordot contraction.
    """
    targets = list(targets)
    k = len(targets)
    u = np.asarray(u)
    if k <= 2:
        flat = np.ascontiguousarray(vecs, dtype=complex).reshape(-1)
        u = np.ascontiguousarray(u, dtype=complex)
        total = flat.size
        if k == 1:
            q = targets[0]
            pre = 1 << q
            post = total // (2 * pre)
            if _HAVE_NUMBA:
                out = np.empty_like(flat)
                _nb_gate1(flat, out, u, pre, post)
            else:
                t = flat.reshape(pre, 2, post)
                out = np.empty_like(t)
                _accumulate_rows([out[:, 0, :], out[:, 1, :]],
                                 [t[:, 0, :], t[:, 1, :]], u)
        else:
            i, j = targets
            if i > j:
                u = np.ascontiguousarray(
                    u.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4))
                i, j = j, i
            pre = 1 << i
            mid = 1 << (j - i - 1)
            post = total // (4 * pre * mid)
            if _HAVE_NUMBA:
                out = np.empty_like(flat)
                diag = np.ascontiguousarray(np.diag(u))
                anti = np.ascontiguousarray(np.diag(np.fliplr(u)))
                cross = np.diag(diag) + np.fliplr(np.diag(anti))
                if np.array_equal(cross, u):
                    _nb_gate2_cross(flat, out, diag, anti, pre, mid, post)
                else:
                    _nb_gate2_dense(flat, out, u, pre, mid, post)
            else:
                t = flat.reshape(pre, 2, mid, 2, post)
                out = np.empty_like(t)
                _accumulate_rows(
                    [out[:, a, :, c, :] for a in (0, 1) for c in (0, 1)],
                    [t[:, b, :, d, :] for b in (0, 1) for d in (0, 1)], u)
        return out.reshape(vecs.shape)
    extra = vecs.shape[1:]
    t = vecs.reshape((2,) * n + extra)
    uk = u.reshape((2,) * (2 * k))
    t = np.tensordot(uk, t, axes=(tuple(range(k, 2 * k)), tuple(targets)))
    t = np.moveaxis(t, range(k), targets)
    return np.ascontiguousarray(t).reshape(vecs.shape)


def apply_unitary_raw(rho: np.ndarray, u: np.ndarray, targets, n: int) -> np.ndarray:
    """U rho U^dag on the target qubits, without wrapper validation."""
    out = apply_matrix_to_vectors(rho, u, targets, n)
    out = apply_matrix_to_vectors(out.T, np.conj(u), targets, n).T
    return out


def apply_kraus_raw(rho: np.ndarray, operators, targets, n: int) -> np.ndarray:
    out = np.zeros_like(rho)
    for op in operators:
        out += apply_unitary_raw(rho, op, targets, n)
    return out


def partial_trace_raw(rho: np.ndarray, keep, n: int) -> np.ndarray:
    keep = sorted(keep)
    t = rho.reshape((2,) * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise SimulationError("register too large for partial trace")
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for q in range(n):
        if q not in keep:
            col[q] = row[q]
    out_sub = "".join(row[q] for q in keep) + "".join(letters[n + q] for q in keep)
    sub = "".join(row) + "".join(col) + "->" + out_sub
    reduced = np.einsum(sub, t)
    d = 2 ** len(keep)
    return reduced.reshape(d, d)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _check_targets(targets, n: int, k: int):
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise SimulationError(f"duplicate targets {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise SimulationError(f"targets {targets} out of range for {n} qubits")
    if len(targets) != k:
        raise SimulationError(
            f"operator acts on {k} qubits but {len(targets)} targets given"
        )
    return targets


def apply_unitary(state: DensityMatrix, u: Unitary, targets) -> DensityMatrix:
    """Embed ``u`` on the target qubits and conjugate the state with it."""
    if isinstance(targets, (int, np.integer)):
        targets = [int(targets)]
    targets = _check_targets(targets, state.n_qubits, u.n_qubits)
    out = apply_unitary_raw(state.data, u.data, targets, state.n_qubits)
    return DensityMatrix(state.n_qubits, out)


def apply_kraus(state: DensityMatrix, channel: KrausSet, targets) -> DensityMatrix:
    """Sum_k E_k rho E_k^dag on the target qubit(s)."""
    if isinstance(targets, (int, np.integer)):
        targets = [int(targets)]
    targets = _check_targets(targets, state.n_qubits, channel.n_qubits)
    out = apply_kraus_raw(state.data, channel.operators, targets, state.n_qubits)
    return DensityMatrix(state.n_qubits, out)


def partial_trace(state: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state on the kept qubits (ascending register order)."""
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise SimulationError("keep set must be non-empty")
    if any(q < 0 or q >= state.n_qubits for q in keep):
        raise SimulationError(f"keep {keep} out of range")
    if len(keep) == state.n_qubits:
        return state
    reduced = partial_trace_raw(state.data, keep, state.n_qubits)
    return DensityMatrix(len(keep), reduced)


def _psd_part(arr: np.ndarray) -> np.ndarray:
    """Clip eigenvalue dust in [-PSD_TOL, 0) to 0 and renormalize."""
    evals, evecs = np.linalg.eigh(arr)
    if evals[0] < -PSD_TOL:
        raise SimulationError(f"matrix is not PSD (min eigenvalue {evals[0]})")
    evals = np.clip(evals, 0.0, None)
    out = (evecs * evals) @ evecs.conj().T
    return out / np.trace(out).real


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))**2, in [0, 1]."""
    if a.n_qubits != b.n_qubits:
        raise SimulationError("dimension mismatch")
    am = _psd_part(a.data)
    bm = _psd_part(b.data)
    evals, evecs = np.linalg.eigh(am)
    sqrt_a = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T
    inner = sqrt_a @ bm @ sqrt_a
    ivals = np.linalg.eigvalsh(inner)
    f = float(np.sum(np.sqrt(np.clip(ivals, 0.0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """0.5 * ||a - b||_1 via the eigenvalues of the difference."""
    if a.n_qubits != b.n_qubits:
        raise SimulationError("dimension mismatch")
    evals = np.linalg.eigvalsh(a.data - b.data)
    t = 0.5 * float(np.sum(np.abs(evals)))
    return min(max(t, 0.0), 1.0)
