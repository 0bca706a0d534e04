"""Single-qubit Pauli channels and their Bloch-diagonal representation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qsim import KrausSet

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

PAULIS = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

# Fixed X/Y/Z proportions of the asymmetric depolarizing channel; the
# asymmetry factor below is provenance metadata only, the proportions are
# what defines the channel here.
ADEP_PROPORTIONS = (0.07, 0.07, 0.86)
ADEP_ASYMMETRY_FACTOR = 0.5

_PROB_TOL = 1e-12


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class PauliChannel:
    """Pauli channel (1-p) rho + p_x X rho X + p_y Y rho Y + p_z Z rho Z."""

    p_x: float
    p_y: float
    p_z: float

    def __post_init__(self):
        probs = (self.p_x, self.p_y, self.p_z)
        if any(q < -_PROB_TOL for q in probs):
            raise ChannelError(f"negative error probability in {probs}")
        if sum(probs) > 1.0 + _PROB_TOL:
            raise ChannelError(f"error probabilities {probs} sum beyond 1")
        object.__setattr__(self, "p_x", float(max(self.p_x, 0.0)))
        object.__setattr__(self, "p_y", float(max(self.p_y, 0.0)))
        object.__setattr__(self, "p_z", float(max(self.p_z, 0.0)))

    @property
    def p(self) -> float:
        """Total error strength p_x + p_y + p_z."""
        return self.p_x + self.p_y + self.p_z

    @property
    def proportions(self) -> tuple:
        """(p_x/p, p_y/p, p_z/p); zeros for the noiseless channel."""
        total = self.p
        if total <= 0.0:
            return (0.0, 0.0, 0.0)
        return (self.p_x / total, self.p_y / total, self.p_z / total)

    def as_tuple(self) -> tuple:
        return (self.p_x, self.p_y, self.p_z)

    def to_dict(self) -> dict:
        return {"p_x": self.p_x, "p_y": self.p_y, "p_z": self.p_z}

    @classmethod
    def from_dict(cls, record: dict) -> "PauliChannel":
        return cls(record["p_x"], record["p_y"], record["p_z"])


@dataclass(frozen=True)
class BlochDiagonal:
    """Diagonal (eta_x, eta_y, eta_z) of the channel's Pauli transfer matrix."""

    eta_x: float
    eta_y: float
    eta_z: float

    def as_tuple(self) -> tuple:
        return (self.eta_x, self.eta_y, self.eta_z)


NAMED_CHANNELS = ("dep", "adep", "bit", "yflip")


def named_channel(name: str, p: float) -> PauliChannel:
    """One of the named noise channels at total strength p."""
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"noise strength {p} out of [0, 1]")
    if name == "dep":
        return PauliChannel(p / 3, p / 3, p / 3)
    if name == "adep":
        cx, cy, cz = ADEP_PROPORTIONS
        return PauliChannel(cx * p, cy * p, cz * p)
    if name == "bit":
        return PauliChannel(p, 0.0, 0.0)
    if name == "yflip":
        return PauliChannel(0.0, p, 0.0)
    raise ChannelError(f"unknown channel name {name!r}, expected one of {NAMED_CHANNELS}")


def bloch_eta(ch: PauliChannel) -> BlochDiagonal:
    """eta_P = 1 - 2 (p - p_P): the Bloch-vector scaling per axis."""
    return BlochDiagonal(
        1.0 - 2.0 * (ch.p_y + ch.p_z),
        1.0 - 2.0 * (ch.p_x + ch.p_z),
        1.0 - 2.0 * (ch.p_x + ch.p_y),
    )


def kraus(ch: PauliChannel) -> KrausSet:
    """Kraus operators {sqrt(1-p) I, sqrt(p_x) X, ...}, zero terms omitted."""
    ops = []
    p_i = 1.0 - ch.p
    if p_i > 0.0:
        ops.append(np.sqrt(p_i) * PAULI_I)
    for prob, op in ((ch.p_x, PAULI_X), (ch.p_y, PAULI_Y), (ch.p_z, PAULI_Z)):
        if prob > 0.0:
            ops.append(np.sqrt(prob) * op)
    return KrausSet(tuple(ops))


def kraus_operators(ch: PauliChannel):
    """Raw 2x2 Kraus arrays (cheap form for inner simulation loops)."""
    return kraus(ch).operators


def apply_to_bloch(ch: PauliChannel, r: np.ndarray) -> np.ndarray:
    """Image of a Bloch vector under the channel."""
    eta = bloch_eta(ch)
    return np.array([eta.eta_x * r[0], eta.eta_y * r[1], eta.eta_z * r[2]])


def worst_case_infidelity(ch: PauliChannel) -> float:
    """max over pure states of 1 - <psi|N(psi)|psi> = (1 - min eta)/2."""
    eta = bloch_eta(ch)
    return (1.0 - min(eta.as_tuple())) / 2.0
