"""Monte Carlo verification of concentration certificates.

Every experiment here is deterministic given its master seed: replication
seeds come from a fixed avalanche derivation, work is cut into fixed-size
blocks whose layout does not depend on the worker count, and results are
reduced in block order.  Running with one worker or many produces the same
bytes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.stats import beta as beta_dist

from .dynamics import (
    SystemSpec,
    derive_seed,
    simulate_batch,
    system_digest,
)
from .lyapunov import HarrisMetricSpec
from .transport import (
    ConcentrationCertificate,
    NotContractiveError,
    bias_term,
    iid_deviation_bound,
    lds_certificate,
    trajectory_deviation_bound,
)

__all__ = [
    "NoSignalError",
    "PrecisionError",
    "SampleBatch",
    "WassersteinEstimate",
    "DeviationReport",
    "ContractionFit",
    "AutocovarianceReport",
    "MeanEstimate",
    "empirical_w1",
    "deviation_probability_experiment",
    "burn_in_sampler",
    "iid_deviation_experiment",
    "contraction_rate_fit",
    "empirical_autocovariance",
    "lds_stationary_covariance",
    "stationary_mean_reward",
    "clopper_pearson",
]


class NoSignalError(RuntimeError):
    """Every measured distance sits at the sampling noise floor."""


class PrecisionError(RuntimeError):
    """Requested precision is unreachable within the sample budget."""


_BLOCK = 256  # replication block size; fixed so results never depend on workers

# derived-seed substream labels
_STREAM_REPLICATION = 1
_STREAM_BIAS = 2
_STREAM_REFERENCE = 3
_STREAM_TARGET = 4
_STREAM_DIAGNOSTIC = 5


def _code_version() -> str:
    try:
        return metadata.version("concentrix")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "unknown"


def _substream(seed: int, label: int) -> int:
    return derive_seed(seed, label)


def _map_blocks(n_tasks: int, workers: int, fn):
    """Apply fn(start, stop) over fixed-size index blocks, in block order."""
    blocks = [(s, min(s + _BLOCK, n_tasks)) for s in range(0, n_tasks, _BLOCK)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda b: fn(*b), blocks))
    return [fn(*b) for b in blocks]


def _resolve_reward(reward):
    """Map a reward tag to (vectorized fn over (..., n) arrays, lipschitz, tag)."""
    if reward == "norm":
        return (lambda pts: np.linalg.norm(pts, axis=-1)), 1.0, "norm"
    if reward == "coordinate":
        return (lambda pts: pts[..., 0]), 1.0, "coordinate"
    if isinstance(reward, tuple) and len(reward) == 2 and callable(reward[0]):
        fn, lipschitz = reward
        if not lipschitz > 0:
            raise ValueError("custom reward needs a positive Lipschitz constant")
        return fn, float(lipschitz), "custom"
    raise ValueError(
        "reward must be 'norm', 'coordinate', or a (callable, lipschitz) pair"
    )


def clopper_pearson(successes: int, trials: int, level: float = 0.99):
    """Two-sided exact binomial confidence interval for a frequency."""
    if not (0 <= successes <= trials) or trials < 1:
        raise ValueError("need 0 <= successes <= trials, trials >= 1")
    tail = (1.0 - level) / 2.0
    if successes == 0:
        low = 0.0
    else:
        low = float(beta_dist.ppf(tail, successes, trials - successes + 1))
    if successes == trials:
        high = 1.0
    else:
        high = float(beta_dist.ppf(1.0 - tail, successes + 1, trials - successes))
    return low, high


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Points with provenance so reports can say where samples came from."""

    points: np.ndarray  # (m, n)
    provenance: str  # "single_trajectory" | "burn_in_endpoints" | "analytic_gaussian"
    master_seed: int | None = None
    burn_in: int | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("sample batch must be nonempty")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class WassersteinEstimate:
    """Empirical order-1 transport distance between equal-size batches."""

    value: float
    size: int
    metric: str  # "euclidean" | "harris"
    solver: str  # "sorted_1d" | "assignment"

    def to_dict(self) -> dict:
        return {
            "kind": "empirical_w1",
            "value": self.value,
            "size": self.size,
            "metric": self.metric,
            "solver": self.solver,
        }


def _batch_points(batch) -> np.ndarray:
    if isinstance(batch, SampleBatch):
        return batch.points
    return np.atleast_2d(np.asarray(batch, dtype=float))


def empirical_w1(a, b, metric="euclidean") -> WassersteinEstimate:
    """Exact empirical W1 between two equal-size point sets.

    One-dimensional euclidean inputs take the sorted-matching fast path,
    which provably equals the optimal assignment; everything else solves
    the full assignment problem (size capped at 1024).  ``metric`` is
    either "euclidean" or a :class:`HarrisMetricSpec` for the weighted
    point metric.
    """
    pa, pb = _batch_points(a), _batch_points(b)
    if pa.shape[0] != pb.shape[0]:
        raise ValueError("batches must have equal sizes")
    if pa.shape[1] != pb.shape[1]:
        raise ValueError("batches must share a dimension")
    m = pa.shape[0]
    if m > 1024:
        raise ValueError("batch size exceeds the 1024 assignment cap; subsample first")
    if isinstance(metric, HarrisMetricSpec):
        va = np.linalg.norm(pa, axis=1)
        vb = np.linalg.norm(pb, axis=1)
        cost = 2.0 + metric.weight * (va[:, None] + vb[None, :])
        equal = (pa[:, None, :] == pb[None, :, :]).all(axis=2)
        cost[equal] = 0.0
        tag = "harris"
    elif metric == "euclidean":
        if pa.shape[1] == 1:
            value = float(np.mean(np.abs(np.sort(pa[:, 0]) - np.sort(pb[:, 0]))))
            return WassersteinEstimate(value, m, "euclidean", "sorted_1d")
        cost = cdist(pa, pb)
        tag = "euclidean"
    else:
        raise ValueError(f"unknown metric: {metric!r}")
    rows, cols = linear_sum_assignment(cost)
    value = float(cost[rows, cols].mean())
    return WassersteinEstimate(value, m, tag, "assignment")


def burn_in_sampler(
    spec: SystemSpec,
    count: int,
    burn_in: int,
    seed: int,
    x0=None,
    workers: int = 1,
) -> SampleBatch:
    """Final states of ``count`` independent trajectories of length ``burn_in``.

    Each trajectory gets its own derived seed, so the batch is identical
    however the work is scheduled.  ``x0`` defaults to the origin.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    start = np.zeros(spec.dim) if x0 is None else x0

    def run(lo, hi):
        seeds = [derive_seed(seed, i) for i in range(lo, hi)]
        return simulate_batch(spec, start, burn_in, seeds)[:, -1, :]

    parts = _map_blocks(count, workers, run)
    return SampleBatch(
        points=np.concatenate(parts, axis=0),
        provenance="burn_in_endpoints",
        master_seed=seed,
        burn_in=burn_in,
    )


@dataclass(frozen=True)
class DeviationReport:
    """Tail-frequency verification result, one row per epsilon.

    A row passes when the 99% upper confidence bound of the empirical
    frequency stays below the theoretical bound, or when no exceedance was
    observed at all (a finite-sample experiment cannot resolve frequencies
    below roughly 1/replications, while the bound may be far smaller).
    """

    epsilons: tuple
    counts: tuple
    frequencies: tuple
    ci_low: tuple
    ci_high: tuple
    bounds: tuple
    passes: tuple
    replications: int
    n_samples: int
    target_mean: float
    target_provenance: str
    bias: float
    details: dict

    @property
    def all_pass(self) -> bool:
        return all(self.passes)

    def to_dict(self) -> dict:
        return {
            "kind": self.details.get("bound_kind", "deviation_report"),
            "epsilons": list(self.epsilons),
            "counts": list(self.counts),
            "frequencies": list(self.frequencies),
            "ci_low": list(self.ci_low),
            "ci_high": list(self.ci_high),
            "bounds": list(self.bounds),
            "passes": list(self.passes),
            "replications": self.replications,
            "n_samples": self.n_samples,
            "target_mean": self.target_mean,
            "target_provenance": self.target_provenance,
            "bias": self.bias,
            "all_pass": self.all_pass,
            "details": self.details,
        }

    def to_csv(self, path) -> None:
        """Per-epsilon rows: epsilon, empirical, ci_low, ci_high, bound, pass."""
        import csv

        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epsilon", "empirical", "ci_low", "ci_high", "bound", "pass"])
            for i, eps in enumerate(self.epsilons):
                writer.writerow(
                    [
                        repr(float(eps)),
                        repr(float(self.frequencies[i])),
                        repr(float(self.ci_low[i])),
                        repr(float(self.ci_high[i])),
                        repr(float(self.bounds[i])),
                        "true" if self.passes[i] else "false",
                    ]
                )


def _check_epsilons(epsilons) -> tuple:
    grid = tuple(float(e) for e in epsilons)
    if not grid:
        raise ValueError("epsilon grid must be nonempty")
    if any(e <= 0 for e in grid):
        raise ValueError("epsilons must be positive")
    return grid


def _tail_rows(deviations: np.ndarray, epsilons, bias: float, bound_at):
    """Count threshold exceedances and pair them with bounds and intervals."""
    m = deviations.size
    counts, freqs, lows, highs, bounds, passes = [], [], [], [], [], []
    for eps in epsilons:
        k = int(np.sum(deviations > bias + eps))
        low, high = clopper_pearson(k, m)
        bound = bound_at(eps)
        counts.append(k)
        freqs.append(k / m)
        lows.append(low)
        highs.append(high)
        bounds.append(bound)
        passes.append(high <= bound or k == 0)
    return tuple(counts), tuple(freqs), tuple(lows), tuple(highs), tuple(bounds), tuple(passes)


def _stationary_reward_estimate(spec, reward_fn, seed, samples, burn_in, workers):
    batch = burn_in_sampler(spec, samples, burn_in, seed, workers=workers)
    vals = np.asarray(reward_fn(batch.points), dtype=float)
    stderr = float(vals.std(ddof=1) / math.sqrt(vals.size))
    return float(vals.mean()), stderr


def deviation_probability_experiment(
    spec: SystemSpec,
    reward,
    x0,
    n_samples: int,
    epsilons,
    replications: int,
    seed: int,
    target_mean: float | None = None,
    target_provenance: str | None = None,
    workers: int = 1,
    bias_samples: int = 512,
    bias_burn_in: int = 200,
    target_samples: int = 100_000,
) -> DeviationReport:
    """Tail-frequency experiment for time averages along one trajectory.

    Runs ``replications`` independent trajectories of ``n_samples`` steps
    from ``x0``, averages the reward over the sampled states (the start
    point is excluded), and counts deviations from the target mean beyond
    ``bias + epsilon``.  The bias shift is estimated as the empirical W1
    between one-step samples and a burn-in reference batch, divided by
    ``n_samples * (1 - rate)``.  Bounds come from the per-step transport
    certificate of the linear system; the target mean is estimated from an
    independent burn-in batch when not supplied (supplied targets must
    state their provenance).
    """
    epsilons = _check_epsilons(epsilons)
    if replications < 100:
        raise ValueError("need at least 100 replications")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if spec.kind != "lds":
        raise ValueError(
            "trajectory deviation bounds need a per-step transport certificate; "
            "only linear systems are supported here"
        )
    reward_fn, lipschitz, tag = _resolve_reward(reward)
    t1, contraction = lds_certificate(spec)
    rate = contraction.rate

    if target_mean is None:
        target_mean, target_se = _stationary_reward_estimate(
            spec, reward_fn, _substream(seed, _STREAM_TARGET),
            target_samples, bias_burn_in, workers,
        )
        target_provenance = "monte_carlo_burn_in"
        target_detail = {"target_stderr": target_se, "target_samples": target_samples}
    else:
        if not target_provenance:
            raise ValueError("a supplied target mean must state its provenance")
        target_mean = float(target_mean)
        target_detail = {}

    x0v = np.asarray(x0, dtype=float).reshape(-1)
    one_step = simulate_batch(
        spec, x0v, 1,
        [derive_seed(_substream(seed, _STREAM_BIAS), i) for i in range(bias_samples)],
    )[:, -1, :]
    reference = burn_in_sampler(
        spec, bias_samples, bias_burn_in, _substream(seed, _STREAM_REFERENCE),
        workers=workers,
    )
    w1_start = empirical_w1(one_step, reference).value
    bias = bias_term(w1_start, n_samples, rate)

    rep_stream = _substream(seed, _STREAM_REPLICATION)

    def run(lo, hi):
        seeds = [derive_seed(rep_stream, i) for i in range(lo, hi)]
        states = simulate_batch(spec, x0v, n_samples, seeds)
        return np.asarray(reward_fn(states[:, 1:, :]), dtype=float).mean(axis=1)

    averages = np.concatenate(_map_blocks(replications, workers, run))
    deviations = np.abs(averages - target_mean)

    cert = ConcentrationCertificate(
        constant=t1.constant,
        rate=rate,
        n_samples=n_samples,
        lipschitz=lipschitz,
        bias=bias,
    )
    rows = _tail_rows(
        deviations, epsilons, bias, lambda eps: trajectory_deviation_bound(cert, eps)
    )
    counts, freqs, lows, highs, bounds, passes = rows
    details = {
        "bound_kind": "trajectory_subgaussian",
        "system_digest": system_digest(spec),
        "master_seed": int(seed),
        "code_version": _code_version(),
        "reward": tag,
        "lipschitz": lipschitz,
        "constant": t1.constant,
        "rate": rate,
        "x0": [float(v) for v in x0v],
        "bias_w1": w1_start,
        "bias_samples": bias_samples,
        "bias_burn_in": bias_burn_in,
        **target_detail,
    }
    return DeviationReport(
        epsilons=epsilons,
        counts=counts,
        frequencies=freqs,
        ci_low=lows,
        ci_high=highs,
        bounds=bounds,
        passes=passes,
        replications=replications,
        n_samples=n_samples,
        target_mean=target_mean,
        target_provenance=target_provenance,
        bias=bias,
        details=details,
    )


def iid_deviation_experiment(
    spec: SystemSpec,
    reward,
    n_samples: int,
    replications: int,
    burn_in: int,
    epsilons,
    te_const: float,
    seed: int,
    target_mean: float | None = None,
    target_provenance: str | None = None,
    workers: int = 1,
    diagnostic_samples: int = 512,
    target_samples: int = 100_000,
) -> DeviationReport:
    """Tail-frequency experiment for averages of independent endpoints.

    Each replication averages the reward over ``n_samples`` independent
    burn-in endpoints; bounds use the stationary transport-entropy constant
    ``te_const``.  The bound assumes exactly stationary samples while
    endpoints are only approximately stationary, so the report carries a
    diagnostic: the empirical W1 between endpoint batches at ``burn_in``
    and at four times that horizon.
    """
    epsilons = _check_epsilons(epsilons)
    if replications < 100:
        raise ValueError("need at least 100 replications")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if te_const <= 0:
        raise ValueError("transport-entropy constant must be positive")
    reward_fn, lipschitz, tag = _resolve_reward(reward)

    if target_mean is None:
        target_mean, target_se = _stationary_reward_estimate(
            spec, reward_fn, _substream(seed, _STREAM_TARGET),
            target_samples, 2 * burn_in, workers,
        )
        target_provenance = "monte_carlo_burn_in"
        target_detail = {"target_stderr": target_se, "target_burn_in": 2 * burn_in}
    else:
        if not target_provenance:
            raise ValueError("a supplied target mean must state its provenance")
        target_mean = float(target_mean)
        target_detail = {}

    diag_stream = _substream(seed, _STREAM_DIAGNOSTIC)
    short = burn_in_sampler(
        spec, diagnostic_samples, burn_in, derive_seed(diag_stream, 0), workers=workers
    )
    long = burn_in_sampler(
        spec, diagnostic_samples, 4 * burn_in, derive_seed(diag_stream, 1), workers=workers
    )
    diagnostic_w1 = empirical_w1(short, long).value

    rep_stream = _substream(seed, _STREAM_REPLICATION)

    def run(lo, hi):
        out = np.empty(hi - lo)
        for j, i in enumerate(range(lo, hi)):
            rep_seed = derive_seed(rep_stream, i)
            seeds = [derive_seed(rep_seed, k) for k in range(n_samples)]
            endpoints = simulate_batch(spec, np.zeros(spec.dim), burn_in, seeds)[:, -1, :]
            out[j] = np.asarray(reward_fn(endpoints), dtype=float).mean()
        return out

    averages = np.concatenate(_map_blocks(replications, workers, run))
    deviations = np.abs(averages - target_mean)

    rows = _tail_rows(
        deviations, epsilons, 0.0,
        lambda eps: iid_deviation_bound(te_const, lipschitz, n_samples, eps),
    )
    counts, freqs, lows, highs, bounds, passes = rows
    details = {
        "bound_kind": "iid_subgaussian",
        "system_digest": system_digest(spec),
        "master_seed": int(seed),
        "code_version": _code_version(),
        "reward": tag,
        "lipschitz": lipschitz,
        "te_constant": te_const,
        "burn_in": burn_in,
        "burn_in_diagnostic_w1": diagnostic_w1,
        "burn_in_diagnostic_note": (
            "bound assumes exactly stationary samples; endpoints after burn-in "
            "are approximate, see the diagnostic distance"
        ),
        **target_detail,
    }
    return DeviationReport(
        epsilons=epsilons,
        counts=counts,
        frequencies=freqs,
        ci_low=lows,
        ci_high=highs,
        bounds=bounds,
        passes=passes,
        replications=replications,
        n_samples=n_samples,
        target_mean=target_mean,
        target_provenance=target_provenance,
        bias=0.0,
        details=details,
    )


@dataclass(frozen=True)
class ContractionFit:
    """Log-linear fit of per-step empirical distances to a reference batch."""

    rate: float
    steps: tuple
    distances: tuple
    used: tuple  # bool per step, True where above the noise floor and fitted
    noise_floor: float

    def to_dict(self) -> dict:
        return {
            "kind": "contraction_fit",
            "rate": self.rate,
            "steps": list(self.steps),
            "distances": list(self.distances),
            "used": list(self.used),
            "noise_floor": self.noise_floor,
        }


def contraction_rate_fit(
    spec: SystemSpec,
    x0,
    n_max: int,
    per_step: int,
    reference: SampleBatch,
    metric="euclidean",
    seed: int = 0,
) -> ContractionFit:
    """Estimate the Wasserstein contraction rate towards a reference batch.

    Simulates ``per_step`` trajectories from ``x0`` and measures the
    empirical W1 between their step-n marginals and the first half of the
    reference batch, for n = 1..n_max.  The second half of the reference
    estimates the noise floor (the W1 between two independent stationary
    batches); steps within three floors are dropped, and the contraction
    rate is ``exp`` of the fitted slope of log-distance against n over the
    leading usable range.

    Raises
    ------
    NoSignalError
        If fewer than two leading steps rise above the noise floor.
    """
    if n_max < 2:
        raise ValueError("need at least two steps to fit a rate")
    if per_step > 1024:
        raise ValueError("per_step exceeds the 1024 assignment cap")
    ref = _batch_points(reference)
    if ref.shape[0] < 2 * per_step:
        raise ValueError("reference batch must hold at least 2 * per_step points")
    ref_a, ref_b = ref[:per_step], ref[per_step : 2 * per_step]
    noise_floor = empirical_w1(ref_a, ref_b, metric).value

    seeds = [derive_seed(_substream(seed, _STREAM_REPLICATION), i) for i in range(per_step)]
    states = simulate_batch(spec, x0, n_max, seeds)
    distances = np.array(
        [empirical_w1(states[:, n, :], ref_a, metric).value for n in range(1, n_max + 1)]
    )

    usable = distances > 3.0 * noise_floor
    leading = 0
    while leading < n_max and usable[leading]:
        leading += 1
    if leading < 2:
        raise NoSignalError(
            "distances reach the noise floor too quickly to fit a contraction rate"
        )
    steps = np.arange(1, leading + 1)
    slope = float(np.polyfit(steps, np.log(distances[:leading]), 1)[0])
    used = tuple(bool(i < leading) for i in range(n_max))
    return ContractionFit(
        rate=float(math.exp(slope)),
        steps=tuple(range(1, n_max + 1)),
        distances=tuple(float(d) for d in distances),
        used=used,
        noise_floor=float(noise_floor),
    )


@dataclass(frozen=True)
class AutocovarianceReport:
    """Sample autocovariances with batch-means errors and optional envelopes."""

    lags: tuple
    values: tuple
    stderrs: tuple
    bounds: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "kind": "autocovariance",
            "lags": list(self.lags),
            "values": list(self.values),
            "stderrs": list(self.stderrs),
            "bounds": list(self.bounds) if self.bounds is not None else None,
        }


def empirical_autocovariance(
    trajectory,
    f_tag,
    max_lag: int,
    constant: float | None = None,
    rate: float | None = None,
    lipschitz: float | None = None,
) -> AutocovarianceReport:
    """Sample autocovariance of an observable along one trajectory.

    Lags run 0..max_lag; the series is centered at its sample mean and each
    lag's standard error comes from batch means with sqrt(length) batches.
    When (constant, rate, lipschitz) are given, the stationary envelope
    ``rate^k * constant * lipschitz^2 / (1 - rate^2)`` is attached per lag.
    """
    states = trajectory.states if hasattr(trajectory, "states") else np.asarray(trajectory)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] == 1 and states.shape[1] > 1:
        states = states.T
    if f_tag == "identity":
        if states.shape[1] != 1:
            raise ValueError("identity observable needs a one-dimensional system")
        series = states[:, 0]
    else:
        fn, _, _ = _resolve_reward(f_tag)
        series = np.asarray(fn(states), dtype=float)
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    if series.size < 10 * max(max_lag, 1):
        raise ValueError("trajectory too short: need length >= 10 * max_lag")

    centered = series - series.mean()
    values, stderrs, bounds = [], [], []
    for k in range(max_lag + 1):
        prod = centered[: centered.size - k] * centered[k:] if k else centered * centered
        values.append(float(prod.mean()))
        nb = int(math.sqrt(prod.size))
        width = prod.size // nb
        batches = prod[: nb * width].reshape(nb, width).mean(axis=1)
        stderrs.append(float(batches.std(ddof=1) / math.sqrt(nb)))
        if constant is not None and rate is not None and lipschitz is not None:
            from .transport import correlation_bound

            bounds.append(correlation_bound(constant, rate, lipschitz, k))
    return AutocovarianceReport(
        lags=tuple(range(max_lag + 1)),
        values=tuple(values),
        stderrs=tuple(stderrs),
        bounds=tuple(bounds) if bounds else None,
    )


def lds_stationary_covariance(a) -> np.ndarray:
    """Stationary covariance of a contractive linear system.

    Fixed-point iteration ``S <- A S A^T + I`` from the identity until the
    Frobenius update drops below 1e-12; the result satisfies the balance
    equation to better than 1e-10.
    """
    if isinstance(a, SystemSpec):
        if a.kind != "lds":
            raise ValueError("stationary covariance solver expects a linear system")
        a = a.matrices[0]
    a = np.asarray(a, dtype=float)
    from .dynamics import spectral_norm

    if spectral_norm(a) >= 1.0:
        raise NotContractiveError("matrix 2-norm must be strictly below 1")
    n = a.shape[0]
    eye = np.eye(n)
    sigma = eye.copy()
    for _ in range(1_000_000):
        nxt = a @ sigma @ a.T + eye
        if float(np.linalg.norm(nxt - sigma)) < 1e-12:
            return nxt
        sigma = nxt
    raise RuntimeError("fixed-point iteration failed to converge")  # pragma: no cover


@dataclass(frozen=True)
class MeanEstimate:
    """Stationary mean of a reward, exact or Monte Carlo with a 99% CI."""

    value: float
    ci_halfwidth: float
    method: str
    samples: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": "stationary_mean",
            "value": self.value,
            "ci_halfwidth": self.ci_halfwidth,
            "method": self.method,
            "samples": self.samples,
        }


def _psd_root(sigma: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (sigma + sigma.T))
    return v * np.sqrt(np.clip(w, 0.0, None))


def stationary_mean_reward(
    target,
    reward="norm",
    precision: float = 1e-3,
    seed: int = 0,
    sample_budget: int = 1_000_000,
) -> MeanEstimate:
    """Mean reward under the stationary Gaussian law of a linear system.

    ``target`` is a linear SystemSpec, a stationary covariance matrix, or a
    SampleBatch of (approximately) stationary points.  The scalar norm
    reward has the half-normal closed form ``sigma * sqrt(2/pi)``; the
    coordinate reward is exactly zero by symmetry; other cases fall back to
    Monte Carlo with a CLT interval at the requested precision.

    Raises
    ------
    PrecisionError
        If the CLT 99% half-width still exceeds ``precision`` after the
        full sample budget.
    """
    reward_fn, _, tag = _resolve_reward(reward)
    if isinstance(target, SampleBatch):
        vals = np.asarray(reward_fn(target.points), dtype=float)
        half = 2.5758293035489004 * float(vals.std(ddof=1) / math.sqrt(vals.size))
        return MeanEstimate(
            value=float(vals.mean()),
            ci_halfwidth=half,
            method="burn_in_monte_carlo",
            samples=int(vals.size),
        )
    if isinstance(target, SystemSpec):
        sigma = lds_stationary_covariance(target)
    else:
        sigma = np.atleast_2d(np.asarray(target, dtype=float))
    n = sigma.shape[0]
    if tag == "norm" and n == 1:
        value = math.sqrt(float(sigma[0, 0])) * math.sqrt(2.0 / math.pi)
        return MeanEstimate(value=value, ci_halfwidth=0.0, method="half_normal_closed_form")
    if tag == "coordinate":
        return MeanEstimate(value=0.0, ci_halfwidth=0.0, method="symmetry_closed_form")
    root = _psd_root(sigma)
    gen = np.random.Generator(np.random.PCG64(seed))
    draws = gen.standard_normal((sample_budget, n)) @ root.T
    vals = np.asarray(reward_fn(draws), dtype=float)
    half = 2.5758293035489004 * float(vals.std(ddof=1) / math.sqrt(vals.size))
    if half > precision:
        raise PrecisionError(
            f"99% half-width {half:.3g} exceeds requested precision {precision:g} "
            f"within the {sample_budget}-sample budget"
        )
    return MeanEstimate(
        value=float(vals.mean()),
        ci_halfwidth=half,
        method="gaussian_monte_carlo",
        samples=sample_budget,
    )
