"""Monte Carlo studies over replicated Fisher spectra.

Two study drivers: `run_clt_study` pairs empirical sqrt(p)-scaled outlier
packets with draws from the limiting fluctuation law, `run_detection_study`
tabulates the signal counter along a dimension ladder.  Replicates are
embarrassingly parallel; each one derives its own counter-based stream from
(master_seed, stream tag, replicate index), so results are bit-identical
for any thread count and any scheduling order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats

from .detect import DetectorConfig, SignalModel, detect
from .errors import ParameterError
from .randomness import stream_generator
from .sampling import EntryDistribution, ModelDims, sample_spectrum, spectrum_packets
from .spikes import CLTConstants, SpikeSpec, clt_constants, sample_limit_batch

__all__ = [
    "ExperimentConfig",
    "ReplicateRecord",
    "CltStudyResult",
    "FrequencyTable",
    "SummaryStats",
    "run_clt_study",
    "run_detection_study",
    "silverman_bandwidth",
    "kde_1d",
    "kde_2d",
    "summarize",
]

# Stream tags keep the three consumers of the master seed independent.
_SPECTRUM_STREAM = 1
_LIMIT_STREAM = 2
_DETECT_STREAM = 3

_KNOWN_OUTPUTS = ("summary", "kde")

COUNT_BIN_LABELS = ("0", "1", "2", "3", "4", "5+")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """One simulation study.

    Attributes:
        ladder: tuple of ModelDims to sweep; CLT studies use exactly one.
        target: what to simulate.  A SpikeSpec (CLT study), a SignalModel
            (single-rung detection study), or a callable mapping ModelDims
            to a SignalModel (detection study along the ladder).
        dist: entry distribution of the data matrices.
        replicates: Monte Carlo replicates per rung.
        master_seed: root of all replicate streams (nonnegative, 64-bit).
        detector: threshold rule for detection studies.
        outputs: which summaries the front end should materialize, from
            {"summary", "kde"}.
    """

    ladder: tuple[ModelDims, ...]
    target: object
    dist: EntryDistribution
    replicates: int
    master_seed: int
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    outputs: tuple[str, ...] = ("summary", "kde")

    def __post_init__(self) -> None:
        rungs = tuple(
            d if isinstance(d, ModelDims) else ModelDims(*d) for d in self.ladder
        )
        if not rungs:
            raise ParameterError("dimension ladder must contain at least one (p, n, T)")
        object.__setattr__(self, "ladder", rungs)
        if not isinstance(self.dist, EntryDistribution):
            raise ParameterError(f"dist must be an EntryDistribution, got {self.dist!r}")
        if not isinstance(self.replicates, (int, np.integer)) or self.replicates < 1:
            raise ParameterError(f"replicates must be a positive integer, got {self.replicates!r}")
        if (
            not isinstance(self.master_seed, (int, np.integer))
            or isinstance(self.master_seed, bool)
            or not 0 <= self.master_seed < 2**64
        ):
            raise ParameterError(
                f"master seed must be a nonnegative 64-bit integer, got {self.master_seed!r}"
            )
        bad = [o for o in self.outputs if o not in _KNOWN_OUTPUTS]
        if bad:
            raise ParameterError(f"unknown outputs {bad}; choose from {_KNOWN_OUTPUTS}")
        if not isinstance(self.detector, DetectorConfig):
            raise ParameterError(f"detector must be a DetectorConfig, got {self.detector!r}")


@dataclass(frozen=True, eq=False)
class ReplicateRecord:
    """Per-replicate outcome: centered-scaled packets and/or a count."""

    index: int
    packets: tuple[np.ndarray, ...] = ()
    k_hat: int | None = None


@dataclass(frozen=True, eq=False)
class CltStudyResult:
    """Outcome of a fluctuation study at one (p, n, T).

    `empirical[i]` stacks sqrt(p)(l - lam_i) over replicates for spike i
    (shape (replicates, n_i), columns descending within the packet);
    `limit[i]` holds as many independent draws of the matching limit law.
    """

    dims: ModelDims
    spec: SpikeSpec
    dist: EntryDistribution
    constants: tuple[CLTConstants, ...]
    records: tuple[ReplicateRecord, ...]
    empirical: tuple[np.ndarray, ...]
    limit: tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Relative frequencies of the estimated count, one column per rung."""

    row_labels: tuple[str, ...]
    column_labels: tuple[str, ...]
    frequencies: np.ndarray

    def __post_init__(self) -> None:
        freq = np.asarray(self.frequencies, dtype=float)
        if freq.shape != (len(self.row_labels), len(self.column_labels)):
            raise ParameterError(
                f"frequency table shape {freq.shape} does not match "
                f"{len(self.row_labels)} rows x {len(self.column_labels)} columns"
            )
        if np.any(freq < 0.0):
            raise ParameterError("frequencies must be nonnegative")
        sums = freq.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > 1e-12:
            raise ParameterError(f"each column must sum to 1, got sums {sums}")
        freq = freq.copy()
        freq.setflags(write=False)
        object.__setattr__(self, "frequencies", freq)

    def column(self, label: str) -> np.ndarray:
        try:
            j = self.column_labels.index(label)
        except ValueError:
            raise ParameterError(
                f"no column {label!r}; have {self.column_labels}"
            ) from None
        return self.frequencies[:, j]


def _map_indexed(worker, count: int, threads: int) -> list:
    """Run worker(0..count-1), results in index order regardless of threads."""
    if threads < 1:
        raise ParameterError(f"thread count must be at least 1, got {threads}")
    if threads == 1:
        return [worker(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(count)))


def run_clt_study(config: ExperimentConfig, threads: int = 1) -> CltStudyResult:
    """Monte Carlo fluctuation study with paired limit-law draws.

    Replicate r simulates one spectrum from the stream (master_seed,
    spectrum tag, r) and extracts sqrt(p)(l - phi(a_i)) per spike packet;
    an equally sized batch of limit-law draws comes from its own stream,
    so empirical and limit samples are independent.

    Raises:
        ParameterError: unless the target is a SpikeSpec with at least one
            spike, all spikes detached, and the ladder has exactly one rung.
    """
    spec = config.target
    if not isinstance(spec, SpikeSpec):
        raise ParameterError("a CLT study needs a SpikeSpec target")
    if not spec.spikes:
        raise ParameterError("a CLT study needs at least one spike")
    if len(config.ladder) != 1:
        raise ParameterError(
            f"a CLT study runs at a single (p, n, T); got {len(config.ladder)} rungs"
        )
    dims = config.ladder[0]
    if spec.rank > dims.p:
        raise ParameterError(
            f"total spike rank {spec.rank} exceeds the dimension p={dims.p}"
        )
    params = dims.fisher_params()
    v4 = config.dist.fourth_moment
    # Validates detachment of every spike before any sampling starts.
    consts = tuple(clt_constants(params, v, v4) for v in spec.values)
    scale = math.sqrt(dims.p)

    def one(rep: int) -> ReplicateRecord:
        rng = stream_generator(config.master_seed, _SPECTRUM_STREAM, rep)
        sample = sample_spectrum(rng, dims, spec, config.dist)
        packets = spectrum_packets(sample, spec)
        stats = tuple(
            scale * (packet - c.lam) for packet, c in zip(packets, consts)
        )
        return ReplicateRecord(index=rep, packets=stats)

    records = tuple(_map_indexed(one, config.replicates, threads))
    empirical = tuple(
        np.vstack([r.packets[i] for r in records]) for i in range(len(spec.spikes))
    )
    limit_rng = stream_generator(config.master_seed, _LIMIT_STREAM)
    limit = tuple(
        sample_limit_batch(limit_rng, params, spec, v4, size=config.replicates)
    )
    return CltStudyResult(
        dims=dims,
        spec=spec,
        dist=config.dist,
        constants=consts,
        records=records,
        empirical=empirical,
        limit=limit,
    )


def _sym_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def run_detection_study(config: ExperimentConfig, threads: int = 1) -> FrequencyTable:
    """Frequency table of the estimated signal count along the ladder.

    The target must be a SignalModel (single rung) or a callable building
    one per rung.  Each replicate draws signal coefficients, signal-block
    noise, and pure-noise records in that order from its own stream, runs
    the detector at the rung's finite-sample ratios, and lands in one of
    the count bins 0..4 or "5+".
    """
    target = config.target
    if isinstance(target, SignalModel):
        if len(config.ladder) != 1:
            raise ParameterError(
                "a fixed SignalModel target needs a single-rung ladder"
            )
        if target.dims != config.ladder[0]:
            raise ParameterError(
                f"SignalModel dims {target.dims} disagree with the ladder rung "
                f"{config.ladder[0]}"
            )
        models = [target]
    elif callable(target):
        models = []
        for dims in config.ladder:
            model = target(dims)
            if not isinstance(model, SignalModel):
                raise ParameterError(
                    f"model builder returned {type(model).__name__}, not a SignalModel"
                )
            if model.dims != dims:
                raise ParameterError(
                    f"model builder returned dims {model.dims} for rung {dims}"
                )
            models.append(model)
    else:
        raise ParameterError(
            "a detection study needs a SignalModel or a model builder target"
        )

    freq = np.zeros((len(COUNT_BIN_LABELS), len(models)))
    for entry, model in enumerate(models):
        dims = model.dims
        noise_root = _sym_sqrt(model.noise_cov)

        def one(rep: int, _model=model, _root=noise_root, _entry=entry) -> int:
            rng = stream_generator(config.master_seed, _DETECT_STREAM, _entry, rep)
            dims_ = _model.dims
            k = _model.num_signals
            x = np.zeros((dims_.p, dims_.T))
            if k > 0:
                coeffs = config.dist.draw(rng, (k, dims_.T))
                x = _model.mixing @ coeffs
            x = x + _root @ config.dist.draw(rng, (dims_.p, dims_.T))
            noise = _root @ config.dist.draw(rng, (dims_.p, dims_.n))
            return detect(x, noise, config.detector)

        counts = _map_indexed(one, config.replicates, threads)
        for k_hat in counts:
            freq[min(k_hat, len(COUNT_BIN_LABELS) - 1), entry] += 1
    freq /= config.replicates

    if len({d.p for d in config.ladder}) == len(config.ladder):
        labels = tuple(f"p={d.p}" for d in config.ladder)
    else:
        labels = tuple(f"p={d.p},n={d.n},T={d.T}" for d in config.ladder)
    return FrequencyTable(
        row_labels=COUNT_BIN_LABELS, column_labels=labels, frequencies=freq
    )


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Normal-reference bandwidth 1.06 sd m^(-1/5) with the unbiased sd.

    Raises:
        ParameterError: with fewer than 2 samples or zero spread (the
            bandwidth would degenerate to 0).
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ParameterError(
            f"bandwidth selection needs a 1-d sample of size >= 2, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ParameterError("samples contain non-finite values")
    sd = float(arr.std(ddof=1))
    if sd == 0.0:
        raise ParameterError("all samples are equal; bandwidth would be zero")
    return 1.06 * sd * arr.size ** (-0.2)


def kde_1d(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Gaussian kernel density estimate on a grid, Silverman bandwidth."""
    arr = np.asarray(samples, dtype=float)
    h = silverman_bandwidth(arr)
    pts = np.asarray(grid, dtype=float)
    z = (pts[:, None] - arr[None, :]) / h
    return np.exp(-0.5 * z * z).sum(axis=1) / (arr.size * h * math.sqrt(2.0 * math.pi))


def kde_2d(
    samples: np.ndarray, grid_x: np.ndarray, grid_y: np.ndarray
) -> np.ndarray:
    """Product-kernel density estimate of paired samples on a lattice.

    Gaussian kernels with an independent Silverman bandwidth per axis.

    Args:
        samples: (m, 2) array of paired observations, m >= 2.

    Returns:
        Surface of shape (len(grid_x), len(grid_y)); entry (i, j) is the
        density at (grid_x[i], grid_y[j]).
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise ParameterError(
            f"2-d KDE needs an (m, 2) sample with m >= 2, got shape {arr.shape}"
        )
    h_x = silverman_bandwidth(arr[:, 0])
    h_y = silverman_bandwidth(arr[:, 1])
    zx = (np.asarray(grid_x, dtype=float)[:, None] - arr[None, :, 0]) / h_x
    zy = (np.asarray(grid_y, dtype=float)[:, None] - arr[None, :, 1]) / h_y
    kern_x = np.exp(-0.5 * zx * zx)
    kern_y = np.exp(-0.5 * zy * zy)
    return kern_x @ kern_y.T / (arr.shape[0] * h_x * h_y * 2.0 * math.pi)


@dataclass(frozen=True)
class SummaryStats:
    """Location, spread, and a goodness-of-fit distance for one sample."""

    mean: float
    variance: float
    ks_distance: float


def summarize(
    values: np.ndarray,
    ref_mean: float | None = None,
    ref_var: float | None = None,
) -> SummaryStats:
    """Sample mean, unbiased variance, and KS distance to a reference normal.

    The reference defaults to the normal matched to the sample's own mean
    and variance, which makes `ks_distance` the standardized-sample KS
    statistic.

    Raises:
        ParameterError: with fewer than 2 values, non-finite values, or a
            nonpositive reference variance.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ParameterError(
            f"summaries need a 1-d sample of size >= 2, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ParameterError("values contain non-finite entries")
    mean = float(arr.mean())
    variance = float(arr.var(ddof=1))
    if ref_mean is None:
        ref_mean = mean
    if ref_var is None:
        ref_var = variance
    if not (math.isfinite(ref_var) and ref_var > 0.0):
        raise ParameterError(f"reference variance must be positive, got {ref_var}")
    cdf = scipy_stats.norm(loc=ref_mean, scale=math.sqrt(ref_var)).cdf
    ks = float(scipy_stats.kstest(arr, cdf).statistic)
    return SummaryStats(mean=mean, variance=variance, ks_distance=ks)
