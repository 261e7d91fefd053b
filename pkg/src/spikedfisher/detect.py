"""Signal counting from two-sample Fisher spectra.

In the signal-plus-noise record model x_t = A s_t + e_t the number k of
signal channels equals the number of eigenvalues of A^T Sigma2^{-1} A
whose value + 1 detaches from the Fisher bulk.  The detector therefore
counts sample eigenvalues exceeding the bulk edge by a vanishing threshold:

    k_hat = #{ i : l_i >= b + shift },     shift = log(log p) / p^(2/3)

by default, with b the upper bulk edge at the finite-sample ratios
(p/T, p/n).  The count is consistent whenever every effective spike is
detectable, i.e. strictly above the critical interval.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .sampling import ModelDims, pencil_eigenvalues
from .spikes import critical_interval
from .wachter import FisherParams, support_edges

__all__ = [
    "SignalModel",
    "DetectorConfig",
    "estimate_count",
    "records_spectrum",
    "detect",
    "effective_spikes",
    "detectability",
    "standard_mixing",
    "block_noise_model",
    "equicorrelated_model",
    "null_model",
]

_SYM_RTOL = 1e-8
_IDENTITY_TOL = 1e-12


def _check_spd(mat: np.ndarray, label: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ParameterError(f"{label} must be a square matrix, got shape {mat.shape}")
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.T)) > _SYM_RTOL * scale:
        raise ParameterError(f"{label} must be symmetric")
    smallest = float(np.linalg.eigvalsh(mat)[0])
    if smallest <= 0.0:
        raise ParameterError(
            f"{label} must be positive definite; smallest eigenvalue {smallest:.3e}"
        )
    return mat


@dataclass(frozen=True, eq=False)
class SignalModel:
    """Record model x = A s + e with iid unit-variance signals.

    Attributes:
        mixing: p x k mixing matrix A (k may be 0 for a pure-noise model).
        noise_cov: p x p positive definite noise covariance Sigma2.
        dims: finite-sample dimensions; dims.p must match the matrices.
        signal_cov: fixed to the identity. Accepts None (meaning identity)
            or an explicit identity matrix; anything else is rejected, the
            model keeps signals standardized and pushes scale into A.
    """

    mixing: np.ndarray
    noise_cov: np.ndarray
    dims: ModelDims
    signal_cov: np.ndarray | None = None

    def __post_init__(self) -> None:
        mixing = np.asarray(self.mixing, dtype=float)
        if mixing.ndim != 2:
            raise ParameterError(f"mixing matrix must be 2-d, got shape {mixing.shape}")
        noise = _check_spd(self.noise_cov, "noise covariance")
        p, k = mixing.shape
        if p != self.dims.p:
            raise ParameterError(
                f"mixing matrix has {p} rows but dims.p={self.dims.p}"
            )
        if noise.shape[0] != p:
            raise ParameterError(
                f"noise covariance is {noise.shape[0]} x {noise.shape[1]} "
                f"but the mixing matrix has {p} rows"
            )
        if k > p:
            raise ParameterError(f"more signal channels ({k}) than records ({p})")
        if self.signal_cov is not None:
            sig = np.asarray(self.signal_cov, dtype=float)
            if sig.shape != (k, k) or np.max(np.abs(sig - np.eye(k))) > _IDENTITY_TOL:
                raise ParameterError(
                    "signal covariance is fixed to the identity; rescale the "
                    "mixing matrix instead"
                )
        mixing = mixing.copy()
        mixing.setflags(write=False)
        noise = noise.copy()
        noise.setflags(write=False)
        object.__setattr__(self, "mixing", mixing)
        object.__setattr__(self, "noise_cov", noise)
        object.__setattr__(self, "signal_cov", None)

    @property
    def num_signals(self) -> int:
        return self.mixing.shape[1]


@dataclass(frozen=True)
class DetectorConfig:
    """Threshold rule of the signal counter.

    Attributes:
        shift: fixed amount added to the bulk edge, or None for the default
            vanishing rule log(log p) / p^(2/3) (natural logarithms; needs
            p >= 3 to be positive).
    """

    shift: float | None = None

    def __post_init__(self) -> None:
        if self.shift is not None:
            if not (math.isfinite(self.shift) and self.shift > 0.0):
                raise ParameterError(
                    f"threshold shift must be finite and positive, got {self.shift}"
                )

    def offset(self, p: int) -> float:
        """Resolved threshold shift at dimension p."""
        if self.shift is not None:
            return self.shift
        if p < 3:
            raise ParameterError(
                f"default threshold rule log(log p)/p^(2/3) needs p >= 3, got p={p}"
            )
        return math.log(math.log(p)) / p ** (2.0 / 3.0)


def estimate_count(
    eigenvalues: np.ndarray,
    params: FisherParams,
    config: DetectorConfig = DetectorConfig(),
) -> int:
    """Count eigenvalues at or above the shifted bulk edge.

    Args:
        eigenvalues: 1-d array sorted in descending order (the natural
            output order of the samplers).
        params: dimension ratios fixing the bulk edge, typically the
            finite-sample ratios (p/T, p/n).

    Raises:
        ParameterError: if the input is empty, not 1-d, contains
            non-finite values, or is not sorted descending.
    """
    vals = np.asarray(eigenvalues, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise ParameterError(f"eigenvalues must be a nonempty 1-d array, got shape {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise ParameterError("eigenvalues contain non-finite values")
    if np.any(np.diff(vals) > 0.0):
        raise ParameterError("eigenvalues must be sorted in descending order")
    threshold = support_edges(params).upper + config.offset(vals.size)
    return int(np.count_nonzero(vals >= threshold))


def records_spectrum(
    signal_records: np.ndarray,
    noise_records: np.ndarray,
    center: bool = False,
) -> tuple[np.ndarray, FisherParams]:
    """Fisher spectrum of raw records plus the finite-sample ratios.

    Forms S1 from the p x T signal-bearing records and S2 from the p x n
    noise-only records and solves the pencil.

    Args:
        center: subtract each row's sample mean first (divisors stay T and
            n; records are assumed centered by default).

    Returns:
        Descending eigenvalues and FisherParams(p/T, p/n).

    Raises:
        ParameterError: on dimension mismatch or p >= n.
    """
    x = np.asarray(signal_records, dtype=float)
    z = np.asarray(noise_records, dtype=float)
    if x.ndim != 2 or z.ndim != 2:
        raise ParameterError(
            f"records must be 2-d arrays, got shapes {x.shape} and {z.shape}"
        )
    if x.shape[0] != z.shape[0]:
        raise ParameterError(
            f"signal and noise records disagree on the dimension: "
            f"{x.shape[0]} vs {z.shape[0]} rows"
        )
    p, t_len = x.shape
    n_len = z.shape[1]
    if p >= n_len:
        raise ParameterError(
            f"need more noise records than dimensions (p < n), got p={p}, n={n_len}"
        )
    if center:
        x = x - x.mean(axis=1, keepdims=True)
        z = z - z.mean(axis=1, keepdims=True)
    s1 = x @ x.T / t_len
    s2 = z @ z.T / n_len
    vals = pencil_eigenvalues(s1, s2)
    return vals, FisherParams(c=p / t_len, y=p / n_len)


def detect(
    signal_records: np.ndarray,
    noise_records: np.ndarray,
    config: DetectorConfig = DetectorConfig(),
    center: bool = False,
) -> int:
    """Estimate the signal count from raw records.

    Counts Fisher eigenvalues of the records above the shifted bulk edge
    at the finite-sample ratios; see `records_spectrum`.
    """
    vals, params = records_spectrum(signal_records, noise_records, center)
    return estimate_count(vals, params, config)


def effective_spikes(model: SignalModel) -> np.ndarray:
    """Descending eigenvalues of A^T Sigma2^{-1} A, the effective spikes.

    These play the role of a - 1 in the spiked Fisher ensemble: signal i is
    asymptotically detectable when effective spike + 1 clears the critical
    interval.  A rank-deficient mixing matrix yields fewer than k nonzero
    values; the full vector is returned as-is with a warning.
    """
    if model.num_signals == 0:
        return np.zeros(0)
    gram = model.mixing.T @ np.linalg.solve(model.noise_cov, model.mixing)
    vals = np.linalg.eigvalsh((gram + gram.T) / 2.0)[::-1].copy()
    tol = 1e-12 * max(1.0, float(vals[0]))
    nonzero = int(np.count_nonzero(vals > tol))
    if nonzero < model.num_signals:
        warnings.warn(
            f"mixing matrix has numerical rank {nonzero}, below its "
            f"{model.num_signals} columns; trailing effective spikes are zero",
            stacklevel=2,
        )
    return vals


def detectability(model: SignalModel, params: FisherParams) -> int:
    """Number of signals whose effective spike detaches from the bulk.

    Counts effective spikes with value + 1 strictly above the critical
    interval; the detector is consistent exactly when this equals k.
    """
    _, high = critical_interval(params)
    return int(np.count_nonzero(effective_spikes(model) + 1.0 > high))


def standard_mixing(p: int) -> np.ndarray:
    """Three-column benchmark mixing matrix used by the simulation studies.

    Column 1 is sqrt(10) e_1; columns 2 and 3 are sqrt(5) times unit
    vectors supported on coordinates 2 and 3, (1,1)/sqrt(2) and
    (1,-1)/sqrt(2).  Under identity noise the effective spikes are
    (10, 5, 5).

    Raises:
        ParameterError: if p < 3.
    """
    if p < 3:
        raise ParameterError(f"benchmark mixing matrix needs p >= 3, got p={p}")
    mixing = np.zeros((p, 3))
    mixing[0, 0] = math.sqrt(10.0)
    mixing[1, 1] = math.sqrt(5.0) / math.sqrt(2.0)
    mixing[2, 1] = math.sqrt(5.0) / math.sqrt(2.0)
    mixing[1, 2] = math.sqrt(5.0) / math.sqrt(2.0)
    mixing[2, 2] = -math.sqrt(5.0) / math.sqrt(2.0)
    return mixing


def block_noise_model(dims: ModelDims) -> SignalModel:
    """Benchmark model with two-block heteroscedastic noise.

    Noise covariance diag(1, ..., 1, 2, ..., 2) with p/2 entries each
    (p must be even); mixing matrix `standard_mixing`.  Effective spikes
    stay (10, 5, 5) because the mixing columns live in the unit-variance
    block.
    """
    if dims.p % 2 != 0:
        raise ParameterError(f"two-block noise needs an even dimension, got p={dims.p}")
    variances = np.ones(dims.p)
    variances[dims.p // 2 :] = 2.0
    return SignalModel(
        mixing=standard_mixing(dims.p), noise_cov=np.diag(variances), dims=dims
    )


def equicorrelated_model(dims: ModelDims, rho: float = 0.1) -> SignalModel:
    """Benchmark model with equicorrelated noise.

    Noise covariance (1 - rho) I + rho 11^T, positive definite for
    rho in (-1/(p-1), 1); mixing matrix `standard_mixing`.
    """
    if not (math.isfinite(rho) and -1.0 / (dims.p - 1) < rho < 1.0):
        raise ParameterError(
            f"equicorrelation must lie in (-1/(p-1), 1) for p={dims.p}, got {rho}"
        )
    noise = np.full((dims.p, dims.p), rho)
    np.fill_diagonal(noise, 1.0)
    return SignalModel(mixing=standard_mixing(dims.p), noise_cov=noise, dims=dims)


def null_model(dims: ModelDims) -> SignalModel:
    """Pure-noise model: no signal channels, identity noise covariance."""
    return SignalModel(
        mixing=np.zeros((dims.p, 0)), noise_cov=np.eye(dims.p), dims=dims
    )
