"""
Shared helpers: the package error hierarchy, seeded random streams, atomic file
writes and logging setup for the command line interface.
"""

import gzip
import logging
import os
import tempfile

import numpy as np

logger = logging.getLogger(__name__)


class SNNError(Exception):
    """
    Base class for every error raised by this package.
    """


class ParameterError(SNNError, ValueError):
    """
    A scalar parameter is outside its valid range, e.g. a non-positive time
    constant.
    """


class ShapeError(SNNError, ValueError):
    """
    Array dimensions do not agree, e.g. a raster with the wrong number of units.
    """


class NumericError(SNNError, ArithmeticError):
    """
    A computation produced, or was given, non-finite values.
    """


class StateError(SNNError, RuntimeError):
    """
    An object is not in a state where the operation makes sense, e.g. an empty
    trace.
    """


class DataError(SNNError, ValueError):
    """
    Dataset contents are invalid: counts disagree, records are out of range or
    unsorted, or a dataset is empty.
    """


class FormatError(DataError):
    """
    A file does not follow its binary layout (bad magic, truncated payload).
    """


class ConfigError(SNNError, ValueError):
    """
    An experiment configuration is malformed or contains unknown keys.
    """


# Named streams so each consumer of randomness in a trial gets an independent
# generator. New streams must be appended, never renumbered.
SEED_STREAMS = {
    "init": 0,
    "shuffle": 1,
    "noise": 2,
    "probe": 3,
    "subset": 4,
    "distance": 5,
}


def make_rng(seed, stream):
    """
    Returns a generator for one named stream of a seeded trial.

    The stream seed is derived with :obj:`numpy.random.SeedSequence` from the
    trial seed and the stream number, so adding streams or trials never
    changes the numbers drawn by existing ones.

    Args:
        seed (:obj:`int`): Trial seed.
        stream (:obj:`str`): One of :data:`SEED_STREAMS`.

    Returns:
        A :obj:`numpy.random.Generator`

    Examples:
        >>> from py_ei_snn.utils import make_rng
        >>> a = make_rng(7, "noise").standard_normal(3)
        >>> b = make_rng(7, "noise").standard_normal(3)
        >>> bool((a == b).all())
        True
    """
    if stream not in SEED_STREAMS:
        raise ParameterError(f"unknown random stream {stream!r}")
    if int(seed) < 0:
        raise ParameterError(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(SEED_STREAMS[stream],))
    return np.random.default_rng(sequence)


def atomic_write(path, data):
    """
    Writes ``data`` (:obj:`bytes` or :obj:`str`) to ``path`` by writing a
    temporary file in the same directory and renaming it over the target.
    Readers never observe a partially written file.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf8")

    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.debug("wrote %d bytes to %s", len(data), path)


def read_binary(path):
    """
    Returns the full contents of ``path``; files ending in ``.gz`` are
    decompressed transparently.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DataError(f"file not found: {path}")
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def configure_logging(verbosity=0):
    """
    Configures the root logger for command line use. ``verbosity`` of 1 or more
    selects DEBUG, 0 selects INFO and negative values select WARNING.
    """
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    else:
        level = logging.INFO
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    logging.getLogger().setLevel(level)
