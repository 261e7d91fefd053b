"""Finite-sample simulation of spiked Fisher spectra.

One replicate draws two independent data matrices with iid standardized
entries, W of shape (p, T) and Z of shape (p, n), forms

    S1 = X X^T / T  with  X = Sigma^{1/2} W,      S2 = Z Z^T / n,

where Sigma is the identity outside the M x M spiked block, and returns
the eigenvalues of the pencil (S1, S2), i.e. of the Fisher matrix
S2^{-1} S1.  The pencil is reduced through a Cholesky factorization of S2
(LAPACK's generalized symmetric-definite driver), which is both faster and
numerically cleaner than forming the non-symmetric product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, ParameterError
from .randomness import ensure_generator
from .spikes import SpikeSpec
from .wachter import FisherParams

__all__ = [
    "EntryDistribution",
    "GAUSSIAN",
    "RADEMACHER",
    "ModelDims",
    "SpectrumSample",
    "pencil_eigenvalues",
    "sample_spectrum",
    "spectrum_packets",
]

# Eigenvalues below ZERO_RTOL times the top one are reported as exact zeros;
# with p > T exactly p - T of them arise from the rank deficiency of S1.
ZERO_RTOL = 1e-10

_DIST_NAMES = ("gaussian", "rademacher")


@dataclass(frozen=True)
class EntryDistribution:
    """Standardized iid entry law of the data matrices.

    Supported laws, both mean 0 and variance 1:
        gaussian: standard normal, fourth moment 3.
        rademacher: symmetric +-1, fourth moment 1.
    """

    name: str

    def __post_init__(self) -> None:
        if self.name not in _DIST_NAMES:
            raise ParameterError(
                f"unknown entry distribution {self.name!r}; choose from {_DIST_NAMES}"
            )

    @property
    def fourth_moment(self) -> float:
        return 3.0 if self.name == "gaussian" else 1.0

    def draw(self, rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        if self.name == "gaussian":
            return rng.standard_normal(shape)
        return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0


GAUSSIAN = EntryDistribution("gaussian")
RADEMACHER = EntryDistribution("rademacher")


@dataclass(frozen=True)
class ModelDims:
    """Finite-sample dimensions (p, n, T) with p < n so S2 is invertible."""

    p: int
    n: int
    T: int

    def __post_init__(self) -> None:
        for label, value in (("p", self.p), ("n", self.n), ("T", self.T)):
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ParameterError(f"dimension {label} must be an integer, got {value!r}")
            if value < 1:
                raise ParameterError(f"dimension {label} must be positive, got {value}")
        if self.p >= self.n:
            raise ParameterError(
                f"need p < n for an invertible noise covariance estimate, got p={self.p}, n={self.n}"
            )

    @property
    def c_p(self) -> float:
        return self.p / self.T

    @property
    def y_p(self) -> float:
        return self.p / self.n

    def fisher_params(self) -> FisherParams:
        """Finite-sample stand-ins for the limiting ratios."""
        return FisherParams(c=self.c_p, y=self.y_p)


@dataclass(frozen=True, eq=False)
class SpectrumSample:
    """Eigenvalues of one simulated Fisher matrix, sorted descending.

    All values are nonnegative; when p > T exactly p - T of them are exact
    zeros (rank deficiency of S1, clamped at ZERO_RTOL times the top value).
    """

    eigenvalues: np.ndarray
    dims: ModelDims


def pencil_eigenvalues(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of the definite pencil (S1, S2).

    Raises:
        NumericalError: if S2 is not numerically positive definite, which
            makes the Fisher matrix undefined.
    """
    try:
        vals = scipy.linalg.eigh(s1, s2, eigvals_only=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(
            "noise covariance estimate is numerically singular; the Fisher "
            f"matrix is undefined ({exc})"
        ) from exc
    return vals[::-1].copy()


def sample_spectrum(
    rng,
    dims: ModelDims,
    spec: SpikeSpec,
    dist: EntryDistribution = GAUSSIAN,
) -> SpectrumSample:
    """Simulate one spiked Fisher matrix and return its spectrum.

    The signal matrix draws W first, then the noise matrix Z, from the
    same stream; Sigma^{1/2} touches only the first M rows of W, with the
    spiked block U diag(sqrt(a_i)) U^T in the leading coordinates.

    Args:
        rng: Generator or seed accepted by `ensure_generator`.

    Raises:
        ParameterError: if the spike rank exceeds p.
        NumericalError: if the simulated S2 is numerically singular (never
            the case for continuous entries when n >= p) or eigenvalues
            come out significantly negative.
    """
    rng = ensure_generator(rng)
    m = spec.rank
    if m > dims.p:
        raise ParameterError(
            f"total spike rank {m} exceeds the dimension p={dims.p}"
        )
    w = dist.draw(rng, (dims.p, dims.T))
    z = dist.draw(rng, (dims.p, dims.n))
    if m > 0:
        scales = np.repeat(
            np.sqrt(np.asarray(spec.values)), np.asarray(spec.multiplicities)
        )
        basis = spec.basis_or_identity()
        block_root = (basis * scales) @ basis.T
        w = np.concatenate([block_root @ w[:m], w[m:]], axis=0)
    s1 = w @ w.T / dims.T
    s2 = z @ z.T / dims.n
    vals = pencil_eigenvalues(s1, s2)
    tol = ZERO_RTOL * max(vals[0], 0.0)
    vals[np.abs(vals) <= tol] = 0.0
    if vals[-1] < 0.0:
        raise NumericalError(
            f"pencil solver returned a significantly negative eigenvalue {vals[-1]:.3e}"
        )
    return SpectrumSample(eigenvalues=vals, dims=dims)


def spectrum_packets(sample: SpectrumSample, spec: SpikeSpec) -> tuple[np.ndarray, ...]:
    """Extract each spike's packet of sample eigenvalues, in spike order.

    Packet i holds the n_i consecutive order statistics that track spike i:
    packets of spikes above 1 count from the top of the spectrum, packets
    of spikes below 1 from the bottom.

    Raises:
        ParameterError: if the spike rank exceeds the sample dimension.
    """
    positions = spec.packet_indices(sample.eigenvalues.size)
    return tuple(sample.eigenvalues[idx] for idx in positions)
