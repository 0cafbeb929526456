"""
This module loads datasets and turns them into spike rasters. Images (such as
Fashion-MNIST in IDX format) are latency encoded, one spike per bright pixel;
spike-event recordings (such as the Spiking Heidelberg Digits) are binned onto
the simulation clock.

Datasets are exposed as :obj:`SpikeDataset` objects that build
``(batch, time, units)`` rasters on demand, so a full dataset never has to be
held as dense rasters.
"""

import logging
import os
import struct
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass

import numpy as np

from py_ei_snn.models import SpikeRaster
from py_ei_snn.utils import (
    DataError,
    FormatError,
    ParameterError,
    ShapeError,
    atomic_write,
    read_binary,
)

logger = logging.getLogger(__name__)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

EVENT_MAGIC = b"SPKEVT01"
_EVENT_FILE_HEADER = struct.Struct("<8sI")
_EVENT_SAMPLE_HEADER = struct.Struct("<IIdQ")
EVENT_DTYPE = np.dtype([("unit", "<u4"), ("time", "<f8")])

EI_RATIOS = {
    "50:50": (50, 50),
    "80:20": (80, 20),
    "95:5": (95, 5),
    "100:0": (100, 0),
}

FASHION_MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

SHD_FILES = {"train": "shd_train.spkevt", "test": "shd_test.spkevt"}


def parse_ei_ratio(value):
    """
    Parses an E:I ratio given as ``"80:20"`` or a pair.

    Examples:
        >>> from py_ei_snn.datasets import parse_ei_ratio
        >>> parse_ei_ratio("80:20")
        (80, 20)
        >>> parse_ei_ratio([95, 5])
        (95, 5)
    """
    if isinstance(value, str):
        parts = value.split(":")
    else:
        parts = list(value)
    if len(parts) != 2:
        raise ParameterError(f"E:I ratio must have two parts, got {value!r}")
    try:
        e, i = (int(p) for p in parts)
    except (TypeError, ValueError):
        raise ParameterError(f"E:I ratio parts must be integers, got {value!r}")
    if e < 0 or i < 0 or e + i == 0:
        raise ParameterError(f"invalid E:I ratio {value!r}")
    return e, i


@dataclass
class ImageSample:
    """
    One image with intensities normalised to [0, 1] and its class label.
    """

    pixels: np.ndarray
    label: int


@dataclass
class SpikeEventSet:
    """
    The spike events of one recording. ``units`` and ``times`` (seconds) are
    parallel arrays sorted by time, then unit.
    """

    units: np.ndarray
    times: np.ndarray
    label: int
    n_units: int
    duration: float

    def __post_init__(self):
        self.units = np.asarray(self.units, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.units.shape != self.times.shape or self.units.ndim != 1:
            raise DataError("event units and times must be 1-D arrays of equal length")
        if not self.duration > 0:
            raise DataError(f"duration must be positive, got {self.duration}")
        if self.units.size:
            if self.units.min() < 0 or self.units.max() >= self.n_units:
                bad = int(np.argmax((self.units < 0) | (self.units >= self.n_units)))
                raise DataError(
                    f"event {bad} has unit {self.units[bad]}, expected 0 <= unit < "
                    f"{self.n_units}"
                )
            finite = np.isfinite(self.times)
            if not finite.all():
                bad = int(np.argmin(finite))
                raise DataError(f"event {bad} has non-finite time {self.times[bad]}")
            if self.times.min() < 0 or self.times.max() >= self.duration:
                bad = int(np.argmax((self.times < 0) | (self.times >= self.duration)))
                raise DataError(
                    f"event {bad} has time {self.times[bad]}, expected 0 <= time < "
                    f"{self.duration}"
                )
            dt = np.diff(self.times)
            du = np.diff(self.units)
            unsorted = (dt < 0) | ((dt == 0) & (du < 0))
            if unsorted.any():
                bad = int(np.argmax(unsorted)) + 1
                raise DataError(f"event {bad} is out of time/unit order")

    @property
    def events(self):
        return list(zip(self.units.tolist(), self.times.tolist()))

    def __len__(self):
        return self.units.size


@dataclass(frozen=True)
class EncodingConfig:
    """
    Latency encoding settings. Pixels with intensity at or below
    ``intensity_threshold`` stay silent.
    """

    horizon_steps: int = 100
    dt: float = 1.0
    intensity_threshold: float = 0.0
    mode: str = "latency-linear"

    def __post_init__(self):
        if self.horizon_steps < 1:
            raise ParameterError("horizon_steps must be at least 1")
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not 0 <= self.intensity_threshold < 1:
            raise ParameterError("intensity_threshold must lie in [0, 1)")
        if self.mode != "latency-linear":
            raise ParameterError(f"unsupported encoding mode {self.mode!r}")


def latency_steps(pixels, cfg):
    """
    Vectorised latency code: the spike step of every pixel, ``-1`` for silent
    pixels. Brighter pixels fire earlier: ``floor((T - 1) * (1 - x))``.

    Args:
        pixels (:obj:`numpy.ndarray`): Intensities in [0, 1], any shape.
        cfg (:obj:`EncodingConfig`): Encoding settings.

    Examples:
        >>> from py_ei_snn.datasets import EncodingConfig, latency_steps
        >>> latency_steps([0.0, 0.5, 1.0], EncodingConfig(horizon_steps=100)).tolist()
        [-1, 49, 0]
    """
    x = np.asarray(pixels, dtype=np.float64)
    if x.size and (not np.isfinite(x).all() or x.min() < 0 or x.max() > 1):
        raise ParameterError("pixel intensities must lie in [0, 1]")
    steps = np.floor((cfg.horizon_steps - 1) * (1.0 - x)).astype(np.int64)
    return np.where(x > cfg.intensity_threshold, steps, -1)


def latency_encode(sample, cfg=None):
    """
    Converts one image to a raster in which every pixel brighter than the
    threshold emits exactly one spike.

    Args:
        sample (:obj:`ImageSample`): Normalised image.
        cfg (:obj:`EncodingConfig`): Encoding settings, defaults if omitted.

    Returns:
        A :obj:`py_ei_snn.models.SpikeRaster` of shape ``horizon_steps x pixels``.
    """
    cfg = cfg or EncodingConfig()
    steps = latency_steps(np.ravel(sample.pixels), cfg)
    spikes = np.zeros((cfg.horizon_steps, steps.size), dtype=bool)
    units = np.flatnonzero(steps >= 0)
    spikes[steps[units], units] = True
    return SpikeRaster(spikes, dt=cfg.dt)


def _event_bins(ev, horizon_steps, dt):
    # Bin index of each event; times are seconds, dt is ms
    bins = np.floor(ev.times * 1000.0 / dt).astype(np.int64)
    keep = bins < horizon_steps
    return bins[keep], ev.units[keep]


def bin_events(ev, horizon_steps, dt=1.0):
    """
    Bins spike events onto the simulation clock. A raster entry is 1 when at
    least one event of that unit falls in ``[t * dt, (t + 1) * dt)``; events
    past the horizon are dropped.

    Args:
        ev (:obj:`SpikeEventSet`): Events with times in seconds.
        horizon_steps (:obj:`int`): Number of simulation steps.
        dt (:obj:`float`): Step size in ms.

    Examples:
        >>> from py_ei_snn.datasets import SpikeEventSet, bin_events
        >>> ev = SpikeEventSet([3, 3], [0.0005, 0.0007], label=0, n_units=5, duration=1.0)
        >>> raster = bin_events(ev, horizon_steps=200, dt=1.0)
        >>> raster.count(), bool(raster.spikes[0, 3])
        (1, True)
    """
    if horizon_steps < 1:
        raise ParameterError("horizon_steps must be at least 1")
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if ev.units.size and (ev.units.min() < 0 or ev.units.max() >= ev.n_units):
        raise DataError(f"event unit out of range for {ev.n_units} units")
    spikes = np.zeros((horizon_steps, ev.n_units), dtype=bool)
    bins, units = _event_bins(ev, horizon_steps, dt)
    spikes[bins, units] = True
    return SpikeRaster(spikes, dt=dt)


def raster_to_events(raster, label=0):
    """
    Returns the events of a raster, each placed at the centre of its time bin,
    so that :func:`bin_events` reproduces the raster exactly.
    """
    steps, units = np.nonzero(raster.spikes)
    # np.nonzero is row-major, so events come out sorted by time then unit
    times = (steps + 0.5) * raster.dt / 1000.0
    return SpikeEventSet(
        units=units,
        times=times,
        label=label,
        n_units=raster.n_units,
        duration=raster.horizon_steps * raster.dt / 1000.0,
    )


def _idx_header(data, magic, n_dims, path):
    header_size = 4 * (1 + n_dims)
    if len(data) < header_size:
        raise FormatError(f"{path}: file too short for an IDX header")
    header = np.frombuffer(data[:header_size], dtype=">u4")
    if int(header[0]) != magic:
        raise FormatError(
            f"{path}: bad magic number 0x{int(header[0]):08x}, expected 0x{magic:08x}"
        )
    dims = [int(d) for d in header[1:]]
    expected = int(np.prod(dims))
    payload = data[header_size:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload has {len(payload)} bytes, header declares {expected}"
        )
    return dims, np.frombuffer(payload, dtype=np.uint8)


def load_idx(images_path, labels_path):
    """
    Loads images and labels stored in the IDX format used by MNIST and
    Fashion-MNIST. Files ending in ``.gz`` are decompressed on the fly.

    Args:
        images_path (:obj:`str`): IDX3 image file (magic ``0x00000803``).
        labels_path (:obj:`str`): IDX1 label file (magic ``0x00000801``).

    Returns:
        A :obj:`list` of :obj:`ImageSample`, pixels scaled by 1/255.
    """
    (count, rows, cols), pixels = _idx_header(
        read_binary(images_path), IDX_IMAGE_MAGIC, 3, images_path
    )
    (n_labels,), labels = _idx_header(
        read_binary(labels_path), IDX_LABEL_MAGIC, 1, labels_path
    )
    if count != n_labels:
        raise DataError(f"{count} images but {n_labels} labels")

    images = pixels.reshape(count, rows * cols) / 255.0
    logger.debug("loaded %d images of %dx%d from %s", count, rows, cols, images_path)
    return [ImageSample(pixels=images[k], label=int(labels[k])) for k in range(count)]


def write_events(path, event_sets):
    """
    Writes spike event sets to the canonical little-endian event file.
    """
    chunks = [_EVENT_FILE_HEADER.pack(EVENT_MAGIC, len(event_sets))]
    for ev in event_sets:
        chunks.append(
            _EVENT_SAMPLE_HEADER.pack(
                int(ev.label), int(ev.n_units), float(ev.duration), len(ev)
            )
        )
        records = np.empty(len(ev), dtype=EVENT_DTYPE)
        records["unit"] = ev.units
        records["time"] = ev.times
        chunks.append(records.tobytes())
    atomic_write(path, b"".join(chunks))
    logger.info("wrote %d event sets to %s", len(event_sets), path)


def load_events(path):
    """
    Loads the canonical event file: magic ``SPKEVT01``, a ``u32`` sample
    count, then for each sample ``u32`` label, ``u32`` unit count, ``f64``
    duration in seconds, ``u64`` event count and packed ``(u32 unit, f64
    time)`` records.

    Returns:
        A :obj:`list` of :obj:`SpikeEventSet`.
    """
    data = read_binary(path)
    if len(data) < _EVENT_FILE_HEADER.size:
        raise FormatError(f"{path}: file too short for an event header")
    magic, n_samples = _EVENT_FILE_HEADER.unpack_from(data, 0)
    if magic != EVENT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {EVENT_MAGIC!r}")

    offset = _EVENT_FILE_HEADER.size
    event_sets = []
    for k in range(n_samples):
        if offset + _EVENT_SAMPLE_HEADER.size > len(data):
            raise FormatError(f"{path}: truncated header of record {k}")
        label, n_units, duration, n_events = _EVENT_SAMPLE_HEADER.unpack_from(
            data, offset
        )
        offset += _EVENT_SAMPLE_HEADER.size
        size = n_events * EVENT_DTYPE.itemsize
        if offset + size > len(data):
            raise FormatError(f"{path}: truncated events of record {k}")
        records = np.frombuffer(data, dtype=EVENT_DTYPE, count=n_events, offset=offset)
        offset += size
        try:
            event_sets.append(
                SpikeEventSet(
                    units=records["unit"],
                    times=records["time"],
                    label=label,
                    n_units=n_units,
                    duration=duration,
                )
            )
        except DataError as exc:
            raise DataError(f"{path}: record {k}: {exc}") from exc
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    logger.debug("loaded %d event sets from %s", len(event_sets), path)
    return event_sets


def convert_npz_events(
    npz_path, out_path, classes=None, max_per_class=None, n_units=700
):
    """
    Converts a NumPy ``.npz`` export of a spike-event dataset to the canonical
    event file.

    The archive holds flat arrays ``times`` (seconds), ``units``, ``labels``
    and ``offsets`` (``n + 1`` indices delimiting each sample's events), and
    optionally ``durations`` and a scalar ``n_units``. See
    :doc:`converting_shd` for producing it from the SHD HDF5 files.

    Args:
        npz_path (:obj:`str`): Input archive.
        out_path (:obj:`str`): Output event file.
        classes (:obj:`list`): Keep only samples with these labels.
        max_per_class (:obj:`int`): Keep at most this many samples per class,
            in file order.
        n_units (:obj:`int`): Unit count when the archive does not store one.

    Returns:
        The number of samples written.
    """
    if not os.path.exists(npz_path):
        raise DataError(f"file not found: {npz_path}")
    with np.load(npz_path) as archive:
        missing = {"times", "units", "labels", "offsets"} - set(archive.files)
        if missing:
            raise FormatError(f"{npz_path}: missing arrays {sorted(missing)}")
        times = archive["times"].astype(np.float64)
        units = archive["units"].astype(np.int64)
        labels = archive["labels"].astype(np.int64)
        offsets = archive["offsets"].astype(np.int64)
        durations = archive["durations"] if "durations" in archive.files else None
        if "n_units" in archive.files:
            n_units = int(archive["n_units"])

    if offsets.size != labels.size + 1 or offsets[0] != 0 or offsets[-1] != times.size:
        raise FormatError(f"{npz_path}: offsets do not delimit {labels.size} samples")

    kept = {}
    event_sets = []
    for k, label in enumerate(labels.tolist()):
        if classes is not None and label not in classes:
            continue
        if max_per_class is not None and kept.get(label, 0) >= max_per_class:
            continue
        t = times[offsets[k] : offsets[k + 1]]
        u = units[offsets[k] : offsets[k + 1]]
        order = np.lexsort((u, t))
        t, u = t[order], u[order]
        if durations is not None:
            duration = float(durations[k])
        else:
            duration = (float(t.max()) if t.size else 0.0) + 1e-3
        try:
            event_sets.append(SpikeEventSet(u, t, label, n_units, duration))
        except DataError as exc:
            raise DataError(f"{npz_path}: sample {k}: {exc}") from exc
        kept[label] = kept.get(label, 0) + 1

    write_events(out_path, event_sets)
    return len(event_sets)


class SpikeDataset(metaclass=ABCMeta):
    """
    Abstract base class for labelled datasets that produce input rasters on
    demand. Datasets are immutable; :meth:`subset` returns a new dataset.
    """

    horizon_steps = None
    n_units = None
    dt = 1.0

    @property
    @abstractmethod
    def labels(self):
        """
        Integer class label of every case.
        """

    @abstractmethod
    def rasters(self, indices):
        """
        Returns:
            A boolean array of shape ``(len(indices), horizon_steps, n_units)``.
        """

    @abstractmethod
    def subset(self, indices):
        """
        Returns:
            A dataset of the same kind holding only the cases at ``indices``.
        """

    def __len__(self):
        return len(self.labels)

    def raster(self, index):
        return SpikeRaster(self.rasters([index])[0], dt=self.dt)

    def filter_classes(self, classes):
        """
        Returns the subset whose labels are in ``classes``.
        """
        return self.subset(np.flatnonzero(np.isin(self.labels, list(classes))))

    def sample(self, n, rng):
        """
        Returns a seeded random subset of ``n`` cases (all cases when
        ``n`` is ``None`` or not smaller than the dataset).
        """
        if n is None or n >= len(self):
            return self
        return self.subset(np.sort(rng.choice(len(self), size=n, replace=False)))


class LatencyImageDataset(SpikeDataset):
    """
    Images encoded with :func:`latency_steps`. Only the spike step of each pixel
    is stored.
    """

    def __init__(self, samples, cfg=None):
        """
        Args:
            samples (:obj:`list`): :obj:`ImageSample` objects.
            cfg (:obj:`EncodingConfig`): Encoding settings, defaults if omitted.
        """
        self.cfg = cfg or EncodingConfig()
        self.horizon_steps = self.cfg.horizon_steps
        self.dt = self.cfg.dt
        if len(samples):
            pixels = np.stack([np.ravel(s.pixels) for s in samples])
            self.steps = latency_steps(pixels, self.cfg)
        else:
            self.steps = np.zeros((0, 0), dtype=np.int64)
        self.n_units = self.steps.shape[1]
        self._labels = np.array([s.label for s in samples], dtype=np.int64)

    @classmethod
    def _from_steps(cls, steps, labels, cfg):
        dataset = cls([], cfg)
        dataset.steps = steps
        dataset.n_units = steps.shape[1]
        dataset._labels = labels
        return dataset

    @property
    def labels(self):
        return self._labels

    def rasters(self, indices):
        steps = self.steps[np.asarray(indices, dtype=np.int64)]
        out = np.zeros((steps.shape[0], self.horizon_steps, self.n_units), dtype=bool)
        case, unit = np.nonzero(steps >= 0)
        out[case, steps[case, unit], unit] = True
        return out

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return self._from_steps(self.steps[indices], self._labels[indices], self.cfg)


class EventDataset(SpikeDataset):
    """
    Spike-event recordings binned onto the simulation clock with
    :func:`bin_events`.
    """

    def __init__(self, event_sets, horizon_steps, dt=1.0):
        if not event_sets:
            raise DataError("event dataset is empty")
        n_units = {ev.n_units for ev in event_sets}
        if len(n_units) != 1:
            raise ShapeError(f"event sets have differing unit counts {sorted(n_units)}")
        self.event_sets = list(event_sets)
        self.horizon_steps = horizon_steps
        self.dt = dt
        self.n_units = n_units.pop()
        self._labels = np.array([ev.label for ev in event_sets], dtype=np.int64)
        self._bins = [_event_bins(ev, horizon_steps, dt) for ev in self.event_sets]

    @property
    def labels(self):
        return self._labels

    def rasters(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        out = np.zeros((indices.size, self.horizon_steps, self.n_units), dtype=bool)
        for row, k in enumerate(indices):
            bins, units = self._bins[k]
            out[row, bins, units] = True
        return out

    def subset(self, indices):
        return EventDataset(
            [self.event_sets[k] for k in np.asarray(indices, dtype=np.int64)],
            self.horizon_steps,
            self.dt,
        )


class RasterDataset(SpikeDataset):
    """
    Dataset of explicit rasters held in memory, for small fixtures.
    """

    def __init__(self, rasters, labels, dt=1.0):
        rasters = np.asarray(rasters)
        if rasters.ndim != 3:
            raise ShapeError(f"rasters must be (cases, time, units), got {rasters.shape}")
        if not np.isin(rasters, (0, 1)).all():
            raise DataError("raster entries must be 0 or 1")
        self._rasters = rasters.astype(bool)
        self._labels = np.asarray(labels, dtype=np.int64)
        if self._labels.shape != (rasters.shape[0],):
            raise DataError(f"{rasters.shape[0]} rasters but {self._labels.size} labels")
        self.horizon_steps = rasters.shape[1]
        self.n_units = rasters.shape[2]
        self.dt = dt

    @property
    def labels(self):
        return self._labels

    def rasters(self, indices):
        return self._rasters[np.asarray(indices, dtype=np.int64)]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return RasterDataset(self._rasters[indices], self._labels[indices], self.dt)


def make_batches(dataset, batch_size, seed):
    """
    Splits a dataset into shuffled mini-batches for one epoch. Every case
    appears exactly once and the final partial batch is kept.

    Args:
        dataset: Anything with a length, e.g. a :obj:`SpikeDataset`.
        batch_size (:obj:`int`): Cases per batch.
        seed (:obj:`int` or :obj:`numpy.random.Generator`): Shuffle seed.

    Returns:
        A :obj:`list` of integer index arrays.

    Examples:
        >>> from py_ei_snn.datasets import make_batches
        >>> [len(b) for b in make_batches(range(10), batch_size=4, seed=0)]
        [4, 4, 2]
    """
    if batch_size < 1:
        raise ParameterError(f"batch_size must be at least 1, got {batch_size}")
    n = len(dataset)
    if n == 0:
        raise DataError("cannot batch an empty dataset")
    order = np.random.default_rng(seed).permutation(n)
    return [order[k : k + batch_size] for k in range(0, n, batch_size)]


def load_fashion_mnist(data_dir, split="train"):
    """
    Loads a Fashion-MNIST split from ``data_dir``, accepting plain or gzipped
    IDX files under their distribution names.
    """
    if split not in FASHION_MNIST_FILES:
        raise ParameterError(f"split must be 'train' or 'test', got {split!r}")
    paths = [_find_file(data_dir, name) for name in FASHION_MNIST_FILES[split]]
    return load_idx(*paths)


def load_shd(data_dir, split="train"):
    """
    Loads an SHD split previously converted to the canonical event format
    (``shd_train.spkevt`` / ``shd_test.spkevt``).
    """
    if split not in SHD_FILES:
        raise ParameterError(f"split must be 'train' or 'test', got {split!r}")
    return load_events(_find_file(data_dir, SHD_FILES[split]))


def dataset_files(dataset, data_dir):
    """
    Returns the paths a dataset needs, raising :obj:`DataError` for the first
    one that is missing.
    """
    if dataset == "fashion-mnist":
        names = [n for pair in FASHION_MNIST_FILES.values() for n in pair]
    elif dataset == "shd":
        names = list(SHD_FILES.values())
    else:
        raise ParameterError(f"unknown dataset {dataset!r}")
    return [_find_file(data_dir, name) for name in names]


def _find_file(data_dir, name):
    for candidate in (name, name + ".gz"):
        path = os.path.join(data_dir, candidate)
        if os.path.exists(path):
            return path
    raise DataError(f"{name} not found in {data_dir}")


def load_random_images(n_samples=100, n_classes=10, side=28, noise_std=0.1, seed=12345):
    """
    Generates a labelled image dataset with class-dependent structure, for
    demonstrating training without downloading Fashion-MNIST.

    Each class lights a different horizontal band of the image; Gaussian noise
    is added and intensities are clipped to [0, 1].

    Args:
        n_samples (:obj:`int`): Number of images.
        n_classes (:obj:`int`): Number of classes (labels cycle through them).
        side (:obj:`int`): Image side length in pixels.
        noise_std (:obj:`float`): Standard deviation of the pixel noise.
        seed (:obj:`int`): Seed the random number generator.

    Returns:
        A :obj:`list` of :obj:`ImageSample`

    Examples:
        >>> from py_ei_snn.datasets import load_random_images
        >>> samples = load_random_images(n_samples=20, n_classes=4)
        >>> len(samples), samples[0].pixels.size, samples[5].label
        (20, 784, 1)
    """
    rng = np.random.default_rng(seed)
    band = max(side // n_classes, 1)
    samples = []
    for k in range(n_samples):
        label = k % n_classes
        image = np.zeros((side, side))
        start = (label * band) % side
        image[start : start + band, :] = rng.uniform(0.6, 1.0, size=(min(band, side - start), side))
        image += rng.normal(0.0, noise_std, size=image.shape)
        samples.append(ImageSample(pixels=np.clip(image, 0.0, 1.0).ravel(), label=label))
    return samples
