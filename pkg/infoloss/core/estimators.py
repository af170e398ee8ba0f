"""
Stochastic Loss Estimators

Monte Carlo average of the pointwise log-ratio T(x) = log2 r(x) and a
quantized-output histogram oracle for H(W|Y).

Samples are drawn in fixed-size chunks. Chunk k uses a Philox generator
keyed by the seed with its counter starting at k * 2**128, so every sample
index maps to a fixed stream position and results do not depend on how
chunks are spread over worker threads.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from infoloss.core.exceptions import EstimatorError
from infoloss.core.loss_engine import (
    LossMethod,
    LossReport,
    QuadratureConfig,
    attach_bounds,
    pointwise_loss_bits,
    prepare,
)
from infoloss.core.metrics import record_integrand_evaluations, record_mc_samples, set_last_loss, timed
from infoloss.core.settings import settings
from infoloss.densities.base import Density
from infoloss.functions.base import PwmFunction
from infoloss.utils.validators import ParameterValidator

logger = logging.getLogger(__name__)

MAX_REJECTION_FRACTION = 1e-6
T = TypeVar("T")


@dataclass(frozen=True)
class McConfig:
    """
    Monte Carlo run parameters.

    Attributes:
        n_samples: Total number of input samples (>= 1000)
        seed: Unsigned 64-bit key of the counter-based generator
        n_workers: Threads processing chunks; never changes the result
        chunk_size: Samples per chunk
    """
    n_samples: int
    seed: int
    n_workers: int = field(default_factory=lambda: settings.workers)
    chunk_size: int = field(default_factory=lambda: settings.mc_chunk)

    def __post_init__(self):
        ParameterValidator.validate_integer_range(self.n_samples, "n_samples", min_value=1000)
        ParameterValidator.validate_integer_range(self.seed, "seed", min_value=0, max_value=2 ** 64 - 1)
        ParameterValidator.validate_integer_range(self.n_workers, "n_workers", min_value=1)
        ParameterValidator.validate_integer_range(self.chunk_size, "chunk_size", min_value=1024)

    @property
    def n_chunks(self) -> int:
        return -(-self.n_samples // self.chunk_size)

    def chunk_length(self, k: int) -> int:
        return min(self.chunk_size, self.n_samples - k * self.chunk_size)


@dataclass(frozen=True)
class HistogramConfig:
    """
    Output binning of the histogram oracle.

    Level l uses y_bins * 2**l equal-mass bins, for l = 0..refinement_levels.
    """
    y_bins: int = 8
    refinement_levels: int = 4

    def __post_init__(self):
        ParameterValidator.validate_integer_range(self.y_bins, "y_bins", min_value=8)
        ParameterValidator.validate_integer_range(self.refinement_levels, "refinement_levels", min_value=0, max_value=30)

    def bins_at(self, level: int) -> int:
        return self.y_bins * 2 ** level


@dataclass
class OracleLevel:
    level: int
    bins_requested: int
    bins_used: int
    estimate_bits: float


@dataclass
class OracleReport:
    """Plug-in H(W|Y quantized) per refinement level."""
    levels: List[OracleLevel]
    n_samples: int
    seed: int
    L: int

    def as_pairs(self) -> List[Tuple[int, float]]:
        return [(lvl.level, lvl.estimate_bits) for lvl in self.levels]

    @property
    def final_estimate_bits(self) -> float:
        return self.levels[-1].estimate_bits

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    """Generator for chunk k: Philox keyed by seed, counter at k * 2**128."""
    return np.random.Generator(np.random.Philox(key=seed, counter=chunk << 128))


def _map_chunks(fn: Callable[[int], T], n_chunks: int, n_workers: int) -> List[T]:
    """Apply fn to every chunk index; results come back in chunk order."""
    if n_workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(fn, range(n_chunks)))
    return [fn(k) for k in range(n_chunks)]


@timed("mc_loss")
def mc_loss(
    f: PwmFunction,
    d: Density,
    cfg: McConfig,
    qcfg: Optional[QuadratureConfig] = None,
) -> LossReport:
    """
    Monte Carlo estimate of H(X|Y) as the sample mean of T(X).

    Samples where T is not finite (overflow next to a vanishing derivative)
    are rejected and counted. The report carries the standard error and the
    rejection fraction.

    Raises:
        FunctionValidationError: If f fails validation on the support of d
        EstimatorError: If every sample is rejected
    """
    qcfg = qcfg or QuadratureConfig()
    g, _ = prepare(f, d, qcfg)

    def run_chunk(k: int) -> Tuple[int, int, float, float]:
        size = cfg.chunk_length(k)
        x = d.sample(chunk_generator(cfg.seed, k), size)
        t = pointwise_loss_bits(g, d, x)
        ok = np.isfinite(t)
        values = t[ok]
        accepted = int(np.count_nonzero(ok))
        logger.debug(f"MC chunk {k}: {accepted}/{size} samples accepted")
        return accepted, size - accepted, math.fsum(values), math.fsum(values * values)

    chunks = _map_chunks(run_chunk, cfg.n_chunks, cfg.n_workers)
    accepted = sum(c[0] for c in chunks)
    rejected = sum(c[1] for c in chunks)
    record_mc_samples(cfg.n_samples, rejected)
    record_integrand_evaluations(LossMethod.MONTE_CARLO.value, cfg.n_samples)
    if accepted < 2:
        raise EstimatorError(f"Only {accepted} of {cfg.n_samples} samples could be evaluated")

    s1 = math.fsum(c[2] for c in chunks)
    s2 = math.fsum(c[3] for c in chunks)
    mean = s1 / accepted
    variance = max(0.0, (s2 / accepted - mean * mean) * accepted / (accepted - 1))
    stderr = math.sqrt(variance / accepted)
    fraction = rejected / cfg.n_samples

    report = LossReport(
        loss_bits=mean,
        method=LossMethod.MONTE_CARLO,
        error_estimate_bits=stderr,
        L=g.L,
        stderr_bits=stderr,
        rejection_fraction=fraction,
        n_evaluations=cfg.n_samples,
    )
    attach_bounds(report, g, d)
    if fraction > MAX_REJECTION_FRACTION:
        message = f"rejected {rejected} of {cfg.n_samples} samples ({fraction:.2e})"
        report.notes.append(message)
        logger.warning(f"Monte Carlo {message}")
    set_last_loss(report.method.value, mean)
    logger.info(
        f"MC H(X|Y) = {mean:.6f} +- {stderr:.2g} bits from {cfg.n_samples} samples "
        f"(seed {cfg.seed}, {cfg.n_chunks} chunks)"
    )
    return report


def _collect_pairs(g: PwmFunction, d: Density, mc: McConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Branch index W and output Y for every sample, in sample order."""
    def run_chunk(k: int) -> Tuple[np.ndarray, np.ndarray]:
        x = d.sample(chunk_generator(mc.seed, k), mc.chunk_length(k))
        w = np.asarray(g.branch_index(x), dtype=np.int64)
        y = np.asarray(g(x), dtype=float)
        keep = (w >= 0) & np.isfinite(y)
        return w[keep], y[keep]

    chunks = _map_chunks(run_chunk, mc.n_chunks, mc.n_workers)
    return np.concatenate([c[0] for c in chunks]), np.concatenate([c[1] for c in chunks])


def _conditional_entropy_bits(bins: np.ndarray, w: np.ndarray, n_bins: int, L: int) -> float:
    """Plug-in H(W|B) from joint counts."""
    joint = np.bincount(bins * L + w, minlength=n_bins * L).reshape(n_bins, L).astype(float)
    per_bin = joint.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log2(per_bin / joint), 0.0)
    return math.fsum(terms.ravel()) / float(w.size)


@timed("histogram_oracle")
def histogram_oracle(
    f: PwmFunction,
    d: Density,
    cfg: HistogramConfig,
    mc: McConfig,
    qcfg: Optional[QuadratureConfig] = None,
) -> OracleReport:
    """
    Brute-force H(W|Y) with Y quantized into equal-mass bins.

    Bin edges are empirical quantiles of the sampled outputs; duplicate
    edges merge empty bins into their neighbours. Quantization can only
    lose resolving power, so the estimates approach the loss from above as
    the bins refine (up to sampling noise).

    Raises:
        FunctionValidationError: If f fails validation on the support of d
        EstimatorError: If no sample could be mapped
    """
    qcfg = qcfg or QuadratureConfig()
    g, _ = prepare(f, d, qcfg)
    w, y = _collect_pairs(g, d, mc)
    if y.size == 0:
        raise EstimatorError("No sample fell inside the domain")
    y_sorted = np.sort(y)

    levels = []
    for level in range(cfg.refinement_levels + 1):
        requested = cfg.bins_at(level)
        positions = np.linspace(0, y_sorted.size - 1, requested + 1).round().astype(np.int64)
        edges = np.unique(y_sorted[positions])
        n_bins = max(1, edges.size - 1)
        bins = np.clip(np.searchsorted(edges, y, side="right") - 1, 0, n_bins - 1)
        estimate = _conditional_entropy_bits(bins, w, n_bins, g.L)
        levels.append(OracleLevel(level, requested, n_bins, estimate))
        logger.debug(f"Oracle level {level}: {n_bins}/{requested} bins -> {estimate:.6f} bits")

    report = OracleReport(levels=levels, n_samples=int(y.size), seed=mc.seed, L=g.L)
    logger.info(
        f"Histogram oracle for '{f.name}': {report.final_estimate_bits:.6f} bits at "
        f"{levels[-1].bins_used} bins from {y.size} samples"
    )
    return report


def seed_sweep(
    f: PwmFunction,
    d: Density,
    n_samples: int,
    seeds: Sequence[int],
    qcfg: Optional[QuadratureConfig] = None,
) -> List[LossReport]:
    """Independent Monte Carlo runs, one per seed."""
    return [mc_loss(f, d, McConfig(n_samples=n_samples, seed=s, n_workers=1), qcfg) for s in seeds]
