"""Fidelity-only two-design estimation of the effective Pauli channel.

The six cardinal states |+X>, |-X>, |+Y>, |-Y>, |+Z>, |-Z> are pushed
through one encode-noise-recover-decode level; the Bloch diagonal follows
in closed form from the measured fidelities, and the Kraus probabilities
are recovered and, if needed, projected back onto the probability simplex.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channels import BlochDiagonal, PauliChannel, kraus_operators
from .qsim import DensityMatrix, fidelity

CARDINAL_LABELS = ("+X", "-X", "+Y", "-Y", "+Z", "-Z")

_SQ = 1.0 / np.sqrt(2.0)
CARDINAL_VECTORS = (
    np.array([_SQ, _SQ], dtype=complex),
    np.array([_SQ, -_SQ], dtype=complex),
    np.array([_SQ, 1j * _SQ], dtype=complex),
    np.array([_SQ, -1j * _SQ], dtype=complex),
    np.array([1.0, 0.0], dtype=complex),
    np.array([0.0, 1.0], dtype=complex),
)

CARDINAL_BLOCH = (
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
)

_VALID_TOL = 1e-12


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelEstimate:
    """Fitted Pauli channel with raw fit values and projection metadata."""

    eta: BlochDiagonal
    probs_raw: tuple  # (p_I, p_X, p_Y, p_Z), possibly invalid
    probs: PauliChannel
    projected: bool
    residual: float
    fidelities: tuple  # six values, CARDINAL_LABELS order

    # residuals above this indicate a non-Pauli effective channel
    RESIDUAL_FLAG = 1e-6

    @property
    def non_pauli_flagged(self) -> bool:
        return self.residual > self.RESIDUAL_FLAG

    def to_dict(self) -> dict:
        return {
            "p": self.probs.p,
            "proportions": list(self.probs.proportions),
            "probs": self.probs.to_dict(),
            "probs_raw": list(self.probs_raw),
            "eta": list(self.eta.as_tuple()),
            "residual": self.residual,
            "projected": self.projected,
            "fidelities": list(self.fidelities),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "ChannelEstimate":
        try:
            return cls(
                BlochDiagonal(*record["eta"]),
                tuple(float(x) for x in record["probs_raw"]),
                PauliChannel.from_dict(record["probs"]),
                bool(record["projected"]),
                float(record["residual"]),
                tuple(float(f) for f in record["fidelities"]),
            )
        except (KeyError, TypeError) as exc:
            raise EstimationError(f"malformed estimate record: {exc}")


def cardinal_states() -> tuple:
    """The six single-qubit cardinal states as density matrices."""
    return tuple(DensityMatrix.from_vector(v) for v in CARDINAL_VECTORS)


def eta_from_fidelities(fids) -> BlochDiagonal:
    """Closed-form least-squares solution eta_P = F(+P) + F(-P) - 1."""
    fids = [float(f) for f in fids]
    if len(fids) != 6:
        raise EstimationError("expected six fidelities (+X,-X,+Y,-Y,+Z,-Z)")
    if any(f < -1e-9 or f > 1.0 + 1e-9 for f in fids):
        raise EstimationError(f"fidelity out of [0, 1]: {fids}")
    return BlochDiagonal(
        fids[0] + fids[1] - 1.0,
        fids[2] + fids[3] - 1.0,
        fids[4] + fids[5] - 1.0,
    )


def design_matrix() -> np.ndarray:
    """A = [r_X^2, r_Y^2, r_Z^2]_i over the six cardinal states."""
    return np.array([[r[0] ** 2, r[1] ** 2, r[2] ** 2] for r in CARDINAL_BLOCH],
                    dtype=float)


def eta_lstsq(fids) -> tuple:
    """Generic dense least-squares fit of eta; cross-checks the closed form.

    Returns (BlochDiagonal, residual_norm) for the system A eta = b with
    b_i = 2 F_i - 1.
    """
    b = 2.0 * np.asarray(fids, dtype=float) - 1.0
    a = design_matrix()
    eta, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    residual = float(np.linalg.norm(a @ eta - b))
    return BlochDiagonal(*[float(x) for x in eta]), residual


def eta_to_probs(eta: BlochDiagonal) -> tuple:
    """Raw (p_I, p_X, p_Y, p_Z) from the Bloch diagonal; may be invalid."""
    ex, ey, ez = eta.as_tuple()
    p_x = 0.25 * (1.0 - ey - ez + ex)
    p_y = 0.25 * (1.0 - ex - ez + ey)
    p_z = 0.25 * (1.0 - ex - ey + ez)
    return (1.0 - p_x - p_y - p_z, p_x, p_y, p_z)


def project_to_simplex(raw) -> tuple:
    """Euclidean projection of (p_I, p_X, p_Y, p_Z) onto the 3-simplex.

    Sorting-based algorithm.  Returns (PauliChannel, projected) where
    projected is False when the input was already valid within 1e-12.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (4,) or not np.all(np.isfinite(raw)):
        raise EstimationError(f"invalid raw probability vector {raw}")
    valid = np.all(raw >= -_VALID_TOL) and abs(raw.sum() - 1.0) <= _VALID_TOL
    if valid:
        return PauliChannel(raw[1], raw[2], raw[3]), False
    u = np.sort(raw)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, 5)
    cond = u + (1.0 - css) / ks > 0
    rho = int(np.nonzero(cond)[0][-1])
    lam = (1.0 - css[rho]) / (rho + 1.0)
    q = np.maximum(raw + lam, 0.0)
    return PauliChannel(q[1], q[2], q[3]), True


def _max_workers() -> int:
    try:
        return max(1, int(os.environ.get("CONCATQEC_THREADS", "1")))
    except ValueError:
        return 1


def estimate_effective_channel(
    level_evaluator: Callable[[DensityMatrix], DensityMatrix],
) -> ChannelEstimate:
    """Run the six cardinal states through a level and fit a Pauli channel.

    ``level_evaluator`` maps a single-qubit density matrix through one full
    encode-noise-recover-decode cycle.  Fidelities are exact (no sampling).
    """
    states = cardinal_states()
    workers = _max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(level_evaluator, states))
    else:
        outputs = [level_evaluator(s) for s in states]
    fids = tuple(fidelity(s, out) for s, out in zip(states, outputs))
    eta = eta_from_fidelities(fids)
    _, residual = eta_lstsq(fids)
    raw = eta_to_probs(eta)
    probs, projected = project_to_simplex(raw)
    return ChannelEstimate(eta, raw, probs, projected, residual, fids)


def pauli_channel_evaluator(ch: PauliChannel) -> Callable[[DensityMatrix], DensityMatrix]:
    """Identity-code evaluator: just the physical channel on one qubit."""
    ops = kraus_operators(ch)

    def evaluate(state: DensityMatrix) -> DensityMatrix:
        out = np.zeros_like(state.data)
        for op in ops:
            out = out + op @ state.data @ op.conj().T
        return DensityMatrix(1, out)

    return evaluate
