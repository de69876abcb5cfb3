"""
Root-seed splitting.

All randomness in a run flows from one root seed. Components obtain their own
seed from stable names so adding a component never shifts another one's stream.
"""

import zlib
from typing import Union

import numpy as np
import torch

Key = Union[str, int]


def derive_seed(root: int, *keys: Key) -> int:
    """
    Derive a 63-bit seed for a named component.

    :param root: The run's root seed.
    :param keys: Component path, e.g. ``("patch", epoch, index)``.
    :return: A deterministic non-negative integer seed.
    """
    spawn_key = tuple(
        key if isinstance(key, int) else zlib.crc32(str(key).encode("utf-8"))
        for key in keys
    )
    sequence = np.random.SeedSequence(entropy=int(root), spawn_key=spawn_key)
    return int(sequence.generate_state(2, dtype=np.uint32).view(np.uint64)[0]) >> 1


def numpy_rng(root: int, *keys: Key) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *keys))


def torch_generator(root: int, *keys: Key) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(derive_seed(root, *keys))
    return generator


def configure_determinism() -> None:
    """Ask torch for deterministic kernels; CPU paths warn instead of failing."""
    torch.use_deterministic_algorithms(True, warn_only=True)
