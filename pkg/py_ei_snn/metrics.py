"""
This module implements the spike-train and network metrics used to analyse
trained networks: Van Rossum distances between hidden neurons grouped by
excitatory/inhibitory pair category, inter-spike intervals, firing
frequencies, binned activity, the share of excitatory activity, weight
distribution summaries, and the Kruskal-Wallis and Welch tests used to compare
groups of networks.

All functions are pure; rasters are boolean ``(time, units)`` arrays or
:obj:`py_ei_snn.models.SpikeRaster` objects, batches of rasters carry a
leading case axis.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special, stats

from py_ei_snn.utils import DataError, NumericError, ParameterError

logger = logging.getLogger(__name__)

PAIR_CATEGORIES = ("E-E", "E-I", "I-I")


@dataclass(frozen=True)
class MetricConfig:
    """
    Which cases the analysis metrics are computed on, and their parameters.

    ``distance_split`` selects the split the Van Rossum distances are averaged
    over (``"train"`` or ``"test"``); ``distance_cases`` caps it to a seeded
    subsample. ``histogram_bins`` and ``histogram_range`` fix the weight
    histogram; with no range each snapshot spans its own minimum and maximum.
    """

    van_rossum_tau: float = 1.0
    distance_split: str = "train"
    distance_cases: int = 1000
    probe_cases: int = 256
    histogram_bins: int = 40
    histogram_range: tuple = None
    activity_bin_steps: int = 1

    def __post_init__(self):
        if not self.van_rossum_tau > 0:
            raise ParameterError("van_rossum_tau must be positive")
        if self.distance_split not in ("train", "test"):
            raise ParameterError("distance_split must be 'train' or 'test'")
        if self.distance_cases is not None and self.distance_cases < 1:
            raise ParameterError("distance_cases must be at least 1")
        if self.probe_cases < 1:
            raise ParameterError("probe_cases must be at least 1")
        if self.histogram_bins < 1 or self.activity_bin_steps < 1:
            raise ParameterError("bin counts must be at least 1")


@dataclass(frozen=True)
class StatTestResult:
    statistic: float
    p_value: float
    n: int
    df: float = None


@dataclass
class ActivitySummary:
    """
    Mean hidden-layer spikes per case split into excitatory and inhibitory
    populations, overall and per class. ``percent_excitatory`` is ``None`` for
    a silent network.
    """

    spikes_per_case_excitatory: float
    spikes_per_case_inhibitory: float
    percent_excitatory: float
    per_class: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _spike_matrix(raster):
    return np.asarray(getattr(raster, "spikes", raster))


def _check_times(times, name):
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1:
        raise DataError(f"{name} must be a 1-D list of spike times")
    if times.size > 1 and not (np.diff(times) > 0).all():
        raise DataError(f"{name} spike times must be strictly increasing")
    return times


def spike_times(raster, unit, dt=None):
    """
    Returns the spike times (ms) of one unit of a raster.
    """
    if dt is None:
        dt = getattr(raster, "dt", 1.0)
    return np.flatnonzero(_spike_matrix(raster)[:, unit]) * dt


def _kernel_sum(a, b, tau):
    if a.size == 0 or b.size == 0:
        return 0.0
    return float(np.exp(-np.abs(np.subtract.outer(a, b)) / tau).sum())


def van_rossum_distance(a, b, tau=1.0):
    """
    Van Rossum distance between two spike trains with a causal exponential
    kernel of amplitude 1, in closed form:

    .. math::

        d^2 = \\frac{1}{2}\\left[\\sum_{i,j \\in a} e^{-|t_i-t_j|/\\tau}
        + \\sum_{i,j \\in b} e^{-|t_i-t_j|/\\tau}
        - 2\\sum_{i \\in a, j \\in b} e^{-|t_i-t_j|/\\tau}\\right]

    Args:
        a (:obj:`list`): Strictly increasing spike times in ms.
        b (:obj:`list`): Strictly increasing spike times in ms.
        tau (:obj:`float`): Kernel time constant in ms.

    Examples:
        >>> from py_ei_snn.metrics import van_rossum_distance
        >>> round(van_rossum_distance([5.0], [], tau=1.0), 10)
        0.7071067812
        >>> round(van_rossum_distance([0.0], [1.0], tau=1.0), 6)
        0.79506
    """
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    a = _check_times(a, "a")
    b = _check_times(b, "b")
    d2 = 0.5 * (_kernel_sum(a, a, tau) + _kernel_sum(b, b, tau) - 2 * _kernel_sum(a, b, tau))
    return float(np.sqrt(max(d2, 0.0)))


def van_rossum_matrices(rasters, tau=1.0, dt=1.0, chunk=64):
    """
    Pairwise Van Rossum distances between all units, for every case.

    With :math:`K_{st} = e^{-|s-t| dt/\\tau}` and the case raster :math:`S`,
    the kernel sums of every pair are the entries of :math:`S^T K S`.

    Args:
        rasters (:obj:`numpy.ndarray`): ``(cases, time, units)`` spikes.
        tau (:obj:`float`): Kernel time constant in ms.
        dt (:obj:`float`): Raster step in ms.
        chunk (:obj:`int`): Cases processed at once.

    Returns:
        A ``(cases, units, units)`` array of distances.
    """
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    rasters = np.asarray(rasters, dtype=np.float64)
    if rasters.ndim == 2:
        rasters = rasters[np.newaxis]
    n_steps = rasters.shape[1]
    lags = np.abs(np.subtract.outer(np.arange(n_steps), np.arange(n_steps)))
    kernel = np.exp(-lags * dt / tau)

    out = np.empty((rasters.shape[0], rasters.shape[2], rasters.shape[2]))
    for start in range(0, rasters.shape[0], chunk):
        s = rasters[start : start + chunk]
        gram = np.matmul(s.transpose(0, 2, 1), np.matmul(kernel, s))
        diag = np.diagonal(gram, axis1=1, axis2=2)
        d2 = 0.5 * (diag[:, :, None] + diag[:, None, :] - 2 * gram)
        out[start : start + chunk] = np.sqrt(np.maximum(d2, 0.0))
    return out


def category_pairs(is_excitatory):
    """
    Returns, for each pair category, the ``(rows, cols)`` index arrays of all
    unordered pairs of hidden units in that category.
    """
    is_excitatory = np.asarray(is_excitatory, dtype=bool)
    exc = np.flatnonzero(is_excitatory)
    inh = np.flatnonzero(~is_excitatory)

    def within(units):
        rows, cols = np.triu_indices(units.size, k=1)
        return units[rows], units[cols]

    e_rows, i_cols = np.meshgrid(exc, inh, indexing="ij")
    return {
        "E-E": within(exc),
        "E-I": (e_rows.ravel(), i_cols.ravel()),
        "I-I": within(inh),
    }


def mean_category_distances(rasters, is_excitatory, tau=1.0, dt=1.0):
    """
    Mean Van Rossum distance of E-E, E-I and I-I hidden unit pairs. Distances
    are averaged over cases for every pair, then over the pairs of a category.
    Both averages are plain means, so the order does not change the result.

    Args:
        rasters (:obj:`numpy.ndarray`): ``(cases, time, units)`` hidden spikes.
        is_excitatory (:obj:`numpy.ndarray`): Boolean partition of the units.
        tau (:obj:`float`): Kernel time constant in ms.
        dt (:obj:`float`): Raster step in ms.

    Returns:
        A :obj:`dict` mapping ``"E-E"``, ``"E-I"`` and ``"I-I"`` to the mean
        distance, or to ``None`` when the category has no pairs.
    """
    rasters = np.asarray(rasters)
    if rasters.ndim != 3 or rasters.shape[0] == 0:
        raise DataError("need at least one case of hidden spikes")
    is_excitatory = np.asarray(is_excitatory, dtype=bool)
    if is_excitatory.shape != (rasters.shape[2],):
        raise DataError("partition does not match the number of hidden units")

    mean_distance = van_rossum_matrices(rasters, tau=tau, dt=dt).mean(axis=0)
    result = {}
    for category, (rows, cols) in category_pairs(is_excitatory).items():
        if rows.size == 0:
            logger.warning("no %s pairs; category reported as absent", category)
            result[category] = None
        else:
            result[category] = float(mean_distance[rows, cols].mean())
    return result


def isi_list(raster, dt=None):
    """
    Inter-spike intervals (ms) of every unit, concatenated unit by unit. Units
    with fewer than two spikes contribute nothing.

    Args:
        raster: A :obj:`py_ei_snn.models.SpikeRaster`, a ``(time, units)``
            array, or a list of spike time lists.
        dt (:obj:`float`): Raster step in ms (taken from the raster if
            omitted).

    Examples:
        >>> from py_ei_snn.metrics import isi_list
        >>> isi_list([[3.0, 7.0, 20.0], [5.0]]).tolist()
        [4.0, 13.0]
    """
    if isinstance(raster, (list, tuple)):
        trains = [np.asarray(t, dtype=np.float64) for t in raster]
    else:
        spikes = _spike_matrix(raster)
        if dt is None:
            dt = getattr(raster, "dt", 1.0)
        trains = [np.flatnonzero(spikes[:, u]) * dt for u in range(spikes.shape[1])]
    intervals = [np.diff(t) for t in trains if t.size > 1]
    if not intervals:
        return np.zeros(0)
    return np.concatenate(intervals)


def isi_summary(rasters, is_excitatory, dt=1.0):
    """
    Count, mean and median ISI of the excitatory and inhibitory populations
    over a batch of hidden rasters.
    """
    rasters = np.asarray(rasters)
    is_excitatory = np.asarray(is_excitatory, dtype=bool)
    summary = {}
    for name, units in (("excitatory", is_excitatory), ("inhibitory", ~is_excitatory)):
        values = [isi_list(case[:, units], dt) for case in rasters]
        values = np.concatenate(values) if values else np.zeros(0)
        summary[name] = {
            "count": int(values.size),
            "mean_ms": float(values.mean()) if values.size else None,
            "median_ms": float(np.median(values)) if values.size else None,
        }
    return summary


def firing_frequency(spike_count, duration, n_neurons=1):
    """
    Mean firing frequency in Hz of ``n_neurons`` neurons that emitted
    ``spike_count`` spikes in total over ``duration`` ms.

    Examples:
        >>> from py_ei_snn.metrics import firing_frequency
        >>> firing_frequency(5, 100.0)
        50.0
        >>> firing_frequency(1, 100.0, n_neurons=100)
        0.1
    """
    if not duration > 0:
        raise ParameterError(f"duration must be positive, got {duration}")
    if n_neurons < 1:
        raise ParameterError("n_neurons must be at least 1")
    return float(spike_count) / n_neurons / (duration / 1000.0)


def binned_activity(rasters, is_excitatory, bin_steps=1):
    """
    Mean number of hidden spikes per case in consecutive time bins of
    ``bin_steps`` steps, split by population.

    Returns:
        A :obj:`dict` with ``"excitatory"`` and ``"inhibitory"`` arrays of
        length ``ceil(time / bin_steps)``.
    """
    rasters = np.asarray(rasters, dtype=np.float64)
    if rasters.ndim != 3 or rasters.shape[0] == 0:
        raise DataError("need at least one case of hidden spikes")
    if bin_steps < 1:
        raise ParameterError("bin_steps must be at least 1")
    is_excitatory = np.asarray(is_excitatory, dtype=bool)
    per_step = {
        "excitatory": rasters[:, :, is_excitatory].sum(axis=2).mean(axis=0),
        "inhibitory": rasters[:, :, ~is_excitatory].sum(axis=2).mean(axis=0),
    }
    edges = np.arange(0, rasters.shape[1], bin_steps)
    return {name: np.add.reduceat(v, edges) for name, v in per_step.items()}


def _percent(e, i):
    total = e + i
    return 100.0 * e / total if total > 0 else None


def activity_from_counts(e_counts, i_counts, labels, n_classes=None):
    """
    Builds an :obj:`ActivitySummary` from per-case excitatory and inhibitory
    spike counts.
    """
    e_counts = np.asarray(e_counts, dtype=np.float64)
    i_counts = np.asarray(i_counts, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if e_counts.size == 0:
        raise DataError("activity summary of an empty set of cases")
    if not e_counts.shape == i_counts.shape == labels.shape:
        raise DataError("counts and labels are not aligned")
    if n_classes is None:
        n_classes = int(labels.max()) + 1

    per_class = {}
    for c in range(n_classes):
        members = labels == c
        if not members.any():
            continue
        e = float(e_counts[members].mean())
        i = float(i_counts[members].mean())
        per_class[str(c)] = {
            "spikes_per_case_excitatory": e,
            "spikes_per_case_inhibitory": i,
            "percent_excitatory": _percent(e, i),
        }
    e = float(e_counts.mean())
    i = float(i_counts.mean())
    percent = _percent(e, i)
    if percent is None:
        logger.debug("silent network: percent excitatory undefined")
    return ActivitySummary(e, i, percent, per_class)


def activity_summary(rasters, labels, is_excitatory, n_classes=None):
    """
    Mean hidden spikes per case by population and by class, and the
    percentage of spikes that are excitatory.

    Args:
        rasters: ``(cases, time, units)`` hidden spikes, or a list of
            :obj:`py_ei_snn.models.SpikeRaster`.
        labels (:obj:`list`): Class of each case.
        is_excitatory (:obj:`numpy.ndarray`): Boolean partition of the units.
        n_classes (:obj:`int`): Number of classes, inferred if omitted.
    """
    if isinstance(rasters, (list, tuple)):
        if not rasters:
            raise DataError("activity summary of an empty set of cases")
        rasters = np.stack([_spike_matrix(r) for r in rasters])
    rasters = np.asarray(rasters)
    if rasters.ndim != 3 or rasters.shape[0] == 0:
        raise DataError("activity summary of an empty set of cases")
    is_excitatory = np.asarray(is_excitatory, dtype=bool)
    counts = rasters.sum(axis=1)
    return activity_from_counts(
        counts[:, is_excitatory].sum(axis=1),
        counts[:, ~is_excitatory].sum(axis=1),
        labels,
        n_classes,
    )


def kruskal_wallis(groups):
    """
    Kruskal-Wallis H test for a difference between two or more groups.

    Ties receive mid-ranks and the statistic is divided by the standard tie
    correction. The p-value is the chi-square upper tail with ``k - 1``
    degrees of freedom (a regularized incomplete gamma function). When every
    value is identical the statistic is 0 and the p-value 1.

    Examples:
        >>> from py_ei_snn.metrics import kruskal_wallis
        >>> result = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        >>> round(result.statistic, 6), round(result.p_value, 6)
        (7.2, 0.027324)
    """
    groups = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(groups) < 2:
        raise DataError("Kruskal-Wallis needs at least two groups")
    if any(g.size == 0 for g in groups):
        raise DataError("Kruskal-Wallis groups must be non-empty")
    values = np.concatenate(groups)
    n = values.size
    if n < 3:
        raise DataError("Kruskal-Wallis needs at least three values in total")
    if not np.isfinite(values).all():
        raise NumericError("Kruskal-Wallis values must be finite")

    ranks = stats.rankdata(values)
    correction = stats.tiecorrect(ranks)
    df = len(groups) - 1
    if correction == 0:
        return StatTestResult(statistic=0.0, p_value=1.0, n=n, df=float(df))

    bounds = np.cumsum([0] + [g.size for g in groups])
    rank_term = sum(
        ranks[lo:hi].sum() ** 2 / (hi - lo) for lo, hi in zip(bounds[:-1], bounds[1:])
    )
    h = (12.0 / (n * (n + 1)) * rank_term - 3.0 * (n + 1)) / correction
    h = max(h, 0.0)
    p = float(special.gammaincc(df / 2.0, h / 2.0))
    return StatTestResult(statistic=float(h), p_value=min(max(p, 0.0), 1.0), n=n, df=float(df))


def welch_t_test(a, b):
    """
    Two-sided Welch t-test for a difference in means without assuming equal
    variances. Degrees of freedom follow Welch-Satterthwaite; the p-value is a
    regularized incomplete beta function.

    Examples:
        >>> from py_ei_snn.metrics import welch_t_test
        >>> result = welch_t_test([0.0, 2.0], [1.0, 3.0])
        >>> round(result.statistic, 6), result.df, round(result.p_value, 6)
        (-0.707107, 2.0, 0.552786)
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size < 2 or b.size < 2:
        raise DataError("Welch t-test needs at least two values per group")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise NumericError("Welch t-test values must be finite")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    if va + vb == 0:
        raise NumericError("Welch t-test is undefined when both groups have zero variance")

    t = (a.mean() - b.mean()) / np.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t ** 2)))
    return StatTestResult(
        statistic=float(t), p_value=min(max(p, 0.0), 1.0), n=a.size + b.size, df=float(df)
    )


def significance_stars(p_value):
    """
    Returns ``"***"``, ``"**"``, ``"*"`` or ``""`` for p below 0.001, 0.01,
    0.05 or otherwise.
    """
    if p_value is None:
        return ""
    for cutoff, stars in ((0.001, "***"), (0.01, "**"), (0.05, "*")):
        if p_value < cutoff:
            return stars
    return ""


def weight_stats(weights, bins=40, value_range=None):
    """
    Summary of a weight distribution: fixed-bin histogram, mean, standard
    deviation and the fraction of weights that are exactly zero (weights
    clamped by the sign constraint end up there).

    Args:
        weights: :obj:`py_ei_snn.training.WeightMatrix` or array.
        bins (:obj:`int`): Number of histogram bins.
        value_range (:obj:`tuple`): ``(low, high)`` of the histogram; the data
            range when omitted.

    Returns:
        A :obj:`dict` with ``n``, ``mean``, ``std``, ``fraction_zero``,
        ``bin_edges`` and ``counts``.

    Examples:
        >>> import numpy as np
        >>> from py_ei_snn.metrics import weight_stats
        >>> weight_stats(np.zeros((2, 3)), bins=2)["fraction_zero"]
        1.0
    """
    values = np.asarray(getattr(weights, "values", weights), dtype=np.float64).ravel()
    if values.size == 0:
        raise DataError("weight statistics of an empty matrix")
    if value_range is None:
        low, high = float(values.min()), float(values.max())
        if low == high:
            low, high = low - 0.5, high + 0.5
        value_range = (low, high)
    counts, edges = np.histogram(values, bins=bins, range=tuple(value_range))
    return {
        "n": int(values.size),
        "mean": float(values.mean()),
        "std": float(values.std()),
        "fraction_zero": float(np.mean(values == 0)),
        "bin_edges": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
    }
