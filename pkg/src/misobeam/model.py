"""Domain types and signal-level computations for the MISO downlink.

A base station with n_t transmit antennas serves n_u single-antenna users.
Channels are complex row vectors, the precoder is a complex n_t x n_u matrix
whose column k beamforms user k's symbol stream.  Everything here is a pure
function of its inputs; randomness always flows through an explicit numpy
Generator (or seed) so simulations stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DB_FLOOR = -100.0  # reporting floor for zero SINR


def _frozen_complex(a, shape_name: str) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite entry in {shape_name}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChannelSet:
    """Per-user channel row vectors, one length-n_t row per user.

    Rows are transmitter-side estimates when used for design, or true
    channels when used for evaluation.
    """

    rows: np.ndarray

    def __post_init__(self):
        arr = _frozen_complex(self.rows, "channel rows")
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("channel rows must be a nonempty 2-D array")
        object.__setattr__(self, "rows", arr)

    @property
    def n_users(self) -> int:
        return self.rows.shape[0]

    @property
    def n_tx(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class ErrorVector:
    """A channel perturbation for a single user."""

    e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "e", _frozen_complex(np.atleast_1d(self.e), "error vector"))


@dataclass(frozen=True)
class Precoder:
    """Complex n_t x n_u beamforming matrix; column k serves user k."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = _frozen_complex(self.matrix, "precoder matrix")
        if arr.ndim != 2:
            raise ValueError("precoder matrix must be 2-D")
        object.__setattr__(self, "matrix", arr)

    @property
    def n_tx(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_users(self) -> int:
        return self.matrix.shape[1]

    @property
    def total_power(self) -> float:
        return transmit_power(self)


@dataclass(frozen=True)
class QosSpec:
    """Per-user linear-scale SINR targets and noise standard deviations."""

    gamma: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.array(self.gamma, dtype=float))
        s = np.atleast_1d(np.array(self.sigma, dtype=float))
        if g.shape != s.shape or g.ndim != 1:
            raise ValueError("gamma and sigma must be 1-D with matching length")
        if np.any(g <= 0) or not np.all(np.isfinite(g)):
            raise ValueError("SINR targets must be positive and finite")
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ValueError("noise standard deviations must be positive and finite")
        g.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "sigma", s)

    @classmethod
    def from_db(cls, gamma_db, sigma) -> "QosSpec":
        return cls(gamma=db_to_linear(np.atleast_1d(np.array(gamma_db, dtype=float))),
                   sigma=sigma)

    @property
    def n_users(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class RealEmbedding:
    """Real-variable view of channels and precoder.

    h_bar stacks [Re h, Im h] per user; b_bar_matrix is the 2n_t x 2n_u
    block matrix [[Re B, Im B], [-Im B, Re B]] and b_bar holds its first
    n_u columns ([Re b_k, -Im b_k] for user k), so that
    h_bar_k . b_bar_k = Re(h_k b_k) and ||h_bar_k @ b_bar_matrix|| equals
    ||h_k B|| with real/imaginary parts unpacked.
    """

    h_bar: np.ndarray
    b_bar_matrix: np.ndarray
    b_bar: np.ndarray


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value, floor_db: float = DB_FLOOR):
    """10 log10 with a finite reporting floor for zero values."""
    value = np.asarray(value, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(value)
    return np.maximum(out, floor_db)


def generate_channels(n_u: int, n_t: int, rng) -> ChannelSet:
    """Draw i.i.d. unit-variance proper complex Gaussian channel rows.

    Real and imaginary parts are each Normal(0, 1/2), so E|h_ij|^2 = 1.
    ``rng`` is a numpy Generator or a seed.
    """
    if n_u < 1 or n_t < 1:
        raise ValueError("n_u and n_t must be at least 1")
    rng = np.random.default_rng(rng)
    rows = (rng.standard_normal((n_u, n_t)) + 1j * rng.standard_normal((n_u, n_t)))
    return ChannelSet(rows / np.sqrt(2.0))


def sample_error(n_t: int, delta: float, mode: str, rng) -> ErrorVector:
    """Sample a channel error in the radius-``delta`` complex sphere.

    boundary: ||e|| = delta, direction uniform (normalized Gaussian draw).
    ball: uniform over the solid ball; the boundary direction is scaled by
    U**(1/(2 n_t)) to match the 2 n_t real dimensions of C^{n_t}.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if mode not in ("boundary", "ball"):
        raise ValueError(f"unknown error mode {mode!r}")
    rng = np.random.default_rng(rng)
    direction = rng.standard_normal(n_t) + 1j * rng.standard_normal(n_t)
    if delta == 0.0:
        return ErrorVector(np.zeros(n_t, dtype=complex))
    norm = np.linalg.norm(direction)
    if norm == 0.0:  # measure-zero guard
        direction = np.zeros(n_t, dtype=complex)
        direction[0] = 1.0
        norm = 1.0
    e = direction * (delta / norm)
    if mode == "ball":
        e *= rng.uniform() ** (1.0 / (2.0 * n_t))
    return ErrorVector(e)


def achieved_sinr(true_channels: ChannelSet, precoder: Precoder, sigma) -> np.ndarray:
    """Per-user SINR |h_k b_k|^2 / (sum_{j != k} |h_k b_j|^2 + sigma_k^2)."""
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    H, B = true_channels.rows, precoder.matrix
    n_u = H.shape[0]
    if B.shape[0] != H.shape[1] or B.shape[1] != n_u or sigma.shape[0] != n_u:
        raise ValueError("channel, precoder and sigma dimensions disagree")
    gains = np.abs(H @ B) ** 2          # gains[k, j] = |h_k b_j|^2
    signal = np.diagonal(gains)
    interference = gains.sum(axis=1) - signal
    return signal / (interference + sigma**2)


def transmit_power(precoder: Precoder) -> float:
    """Total transmit power ||vec(B)||^2 = sum |B_ij|^2."""
    return float(np.sum(np.abs(precoder.matrix) ** 2))


def embed_channel(rows: np.ndarray) -> np.ndarray:
    """[Re h, Im h] per row."""
    rows = np.atleast_2d(rows)
    return np.hstack([rows.real, rows.imag])


def embed_error(e: np.ndarray) -> np.ndarray:
    """[Re e, Im e] for a single error vector."""
    e = np.asarray(e).reshape(-1)
    return np.concatenate([e.real, e.imag])


def embed_precoder(B: np.ndarray) -> np.ndarray:
    """The block matrix [[Re B, Im B], [-Im B, Re B]]."""
    return np.block([[B.real, B.imag], [-B.imag, B.real]])


def real_embedding(channels: ChannelSet, precoder: Precoder) -> RealEmbedding:
    """Real-variable embedding of a channel set and precoder pair."""
    b_bar_matrix = embed_precoder(precoder.matrix)
    return RealEmbedding(
        h_bar=embed_channel(channels.rows),
        b_bar_matrix=b_bar_matrix,
        b_bar=b_bar_matrix[:, : precoder.n_users],
    )
