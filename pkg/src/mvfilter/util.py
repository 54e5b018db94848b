"""Shared small utilities: labeled RNG streams, stats helpers, hashing."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def derive_key(master_seed: int, *labels) -> np.ndarray:
    """Two uint64 words derived from a master seed and a label path.

    Hash-based derivation keeps streams independent across labels and stable
    across platforms and process layouts, which is what makes runs
    reproducible regardless of thread count or execution order.
    """
    tag = json.dumps([int(master_seed), *[str(l) for l in labels]])
    digest = hashlib.sha256(tag.encode()).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def stream(master_seed: int, *labels) -> np.random.Generator:
    """Deterministic Generator for the given (seed, label...) path."""
    return np.random.Generator(np.random.Philox(key=derive_key(master_seed, *labels)))


def derive_seed(master_seed: int, *labels) -> int:
    """Derived integer sub-seed (for configs that carry a scalar seed)."""
    return int(derive_key(master_seed, *labels)[0] % np.uint64(2**63 - 1))


def config_hash(payload) -> str:
    """sha256 of the canonical JSON encoding; stable under key reordering."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def format_float(x: float) -> str:
    """Round-trip exact decimal text for floats (stable CSV bytes).

    repr of a Python float is the shortest digit string that parses back
    to the same binary value, so the bytes are both exact and stable.
    """
    return repr(float(x))


def log_mean_exp(log_values: np.ndarray, axis=None) -> np.ndarray:
    """log(mean(exp(v))) with max shift, safe for large spreads."""
    log_values = np.asarray(log_values, dtype=float)
    shift = np.max(log_values, axis=axis, keepdims=True)
    out = np.log(np.mean(np.exp(log_values - shift), axis=axis)) + np.squeeze(shift, axis=axis)
    return out


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def median_abs(values) -> float:
    return float(np.median(np.abs(np.asarray(values, float))))


def rms(values) -> float:
    v = np.asarray(values, float)
    return float(np.sqrt(np.mean(v * v)))


def standard_error(values) -> float:
    v = np.asarray(values, float)
    if v.size < 2:
        return float("inf")
    return float(np.std(v, ddof=1) / np.sqrt(v.size))


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map preserving input order; results are independent of thread count.

    Tasks must not share mutable state; every task derives its randomness
    from its own index so scheduling order cannot leak into results.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))
