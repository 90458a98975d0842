"""Именованные потоки случайных чисел от одного корневого seed."""
import numpy as np

from .exceptions import ConfigError

STREAMS = {
    "trainer": 1,
    "init": 2,
    "dice": 3,
    "splits": 4,
    "sbm": 5,
    "features": 6,
    "diagnostics": 7,
}


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Генератор для потока name; keys уточняют подпоток (например, номер итерации)."""
    if name not in STREAMS:
        raise ConfigError(f"unknown random stream: {name}", stream=name)
    if seed < 0 or any(k < 0 for k in keys):
        raise ConfigError("seeds must be non-negative", seed=seed, keys=list(keys))
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAMS[name], *map(int, keys)]))
