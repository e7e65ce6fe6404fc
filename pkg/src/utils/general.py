"""General utilities."""

import os
import tempfile
from fractions import Fraction

import numpy as np

DEFAULT_SEED = 42


class DimensionMismatchError(ValueError):
    """Shapes of a sketch, an instance or a vector do not agree."""


class NumericInputError(ValueError):
    """Input contains non-finite entries."""


class InfeasibleInstanceError(ValueError):
    """Parameter combination admits no hard instance (e.g. d * r > n)."""


class NotApplicableError(ValueError):
    """Operation called outside the regime it is defined for."""


def get_dir(path: str) -> str:
    """Create a directory given a path."""
    if not os.path.exists(path):
        os.makedirs(path)
        return path
    elif os.path.isfile(path):
        raise ValueError(f"Cannot create directory {path}. File with same name exists.")
    return path


def parse_real(text: str) -> float:
    """Parse a decimal or a fraction such as `1/32`."""
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as err:
        raise ValueError(f"Cannot parse {text!r} as a real number.") from err
    return float(value)


def is_power_of_two(value: int) -> bool:
    """Check whether a positive integer is a power of two."""
    return value >= 1 and (value & (value - 1)) == 0


def power_of_two_reciprocal(x: float) -> int:
    """Return `1 / x` as an integer power of two, or raise if it is not one."""
    if not 0 < x <= 1:
        raise ValueError(f"Expected a value in (0, 1], got {x}.")
    b = round(1 / x)
    if abs(b * x - 1) > 1e-9 or not is_power_of_two(b):
        raise ValueError(f"1 / {x} is not a power of two.")
    return b


def check_seed(seed: int) -> int:
    """Validate a master seed."""
    if int(seed) != seed or seed < 0:
        raise ValueError(f"Seed must be a non-negative integer, got {seed}.")
    return int(seed)


def get_seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    """Return the seed sequence of the stream identified by `keys` under a master seed."""
    return np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))


def derive_seed(seed: int, *keys: int) -> int:
    """Derive a 128-bit child seed from a master seed and integer keys."""
    words = get_seed_sequence(seed, *keys).generate_state(4, dtype=np.uint32)
    return sum(int(w) << (32 * i) for i, w in enumerate(words))


def get_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by `keys` under a master seed."""
    return np.random.Generator(np.random.Philox(get_seed_sequence(seed, *keys)))


def atomic_write(path: str, text: str) -> None:
    """Write text to a temporary file in the target directory, then rename it over `path`."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise OSError(f"Directory {directory} does not exist.")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
