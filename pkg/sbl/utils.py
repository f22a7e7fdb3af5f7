import dataclasses
import json
import math
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np
from ska_helpers import logging

logger = logging.basic_logger("sbl")

# environment variable holding the default seed of the command line tools
SEED_ENV_VAR = "SBL_SEED"


class SblException(RuntimeError):
    pass


class ParameterError(SblException):
    """
    Invalid input: a parameter out of range or a violated precondition.
    """


class InfeasibleParameters(ParameterError):
    def __init__(self, message, nearest_n=None):
        super().__init__(message)
        self.nearest_n = nearest_n


class GenerationFailed(SblException):
    def __init__(self, message, retries):
        super().__init__(message)
        self.retries = retries


class EmbeddingFailed(SblException):
    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = {} if stats is None else stats


class HostDegreeError(SblException):
    pass


class LemmaViolation(SblException):
    """
    A proven invariant does not hold.

    These are never caused by bad input. They indicate a bug in a construction or a check.
    """


def default_seed():
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def get_rng(seed, *stream):
    """
    Random generator for the substream ``stream`` of ``seed``.

    Substreams of the same seed are statistically independent, which lets trials and
    retries run in any order (or in parallel) with reproducible results.

    Parameters
    ----------
    seed : int
        The 64-bit master seed.
    *stream : int
        Non-negative integers identifying the substream (stage, trial index, attempt...).

    Returns
    -------
    numpy.random.Generator
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(s) for s in stream]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed, *stream):
    """
    A 63-bit seed for the substream ``stream`` of ``seed``.
    """
    return int(get_rng(seed, *stream).integers(2**63))


def to_jsonable(obj):  # noqa: PLR0911
    """
    Convert reports (dataclasses, numpy values, fractions...) into plain JSON types.

    Objects with a ``to_dict`` method are converted through it. Infinite and NaN floats
    become None, since JSON has no representation for them.
    """
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            field.name: to_jsonable(getattr(obj, field.name))
            for field in dataclasses.fields(obj)
            if field.metadata.get("json", True)
        }
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return [to_jsonable(value) for value in sorted(obj)]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj):
    """
    Deterministic JSON text (sorted keys, compact separators, trailing newline).
    """
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":")) + "\n"


def atomic_write_text(filename, text):
    """
    Write ``text`` to ``filename`` so that readers never see a partial file.
    """
    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", dir=filename.parent, delete=False, suffix=".tmp"
    ) as fh:
        fh.write(text)
        tmp_name = fh.name
    os.replace(tmp_name, filename)


def write_json(filename, obj):
    atomic_write_text(filename, dumps(obj))


def read_json(filename):
    with open(filename, encoding="utf-8") as fh:
        return json.load(fh)
