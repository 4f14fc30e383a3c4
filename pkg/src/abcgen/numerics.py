"""Dense float64 math primitives and seeded randomness.

Everything here is a thin, shape-checked layer over numpy/scipy so the
rest of the package (model, optimizer, sampler) can stay readable.  All
public operations are pure and return fresh arrays.
"""

import hashlib

import numpy as np
from scipy.special import expit


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting anything else."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape error instead of numpy's."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def sigmoid(m) -> np.ndarray:
    """Elementwise logistic function, saturating without overflow."""
    return expit(np.asarray(m, dtype=np.float64))


def tanh(m) -> np.ndarray:
    """Elementwise tanh."""
    return np.tanh(np.asarray(m, dtype=np.float64))


def softmax_rows(logits) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability.

    Every output row sums to 1 (within fp rounding) and all entries are
    strictly positive.
    """
    logits = as_matrix(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


#: Probabilities are clamped here before the log in cross_entropy.
PROB_FLOOR = 1e-12


def cross_entropy(probs, target_ids) -> float:
    """Mean negative log-likelihood of the targets under `probs`.

    `probs` is (N, V) with rows summing to 1; `target_ids` is a length-N
    integer sequence.  Probabilities are clamped at PROB_FLOOR so a zero
    never reaches the log.
    """
    probs = as_matrix(probs)
    targets = np.asarray(target_ids)
    if targets.ndim != 1 or targets.shape[0] != probs.shape[0]:
        raise ValueError(
            f"targets shape {targets.shape} does not match probs rows {probs.shape[0]}"
        )
    if targets.size and (targets.min() < 0 or targets.max() >= probs.shape[1]):
        raise ValueError("target id out of range")
    picked = probs[np.arange(probs.shape[0]), targets]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def sample_categorical(probs, rng: "Rng") -> int:
    """Draw one index from a probability row by inverse CDF."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {total}, not 1")
    cdf = np.cumsum(p)
    r = rng.random()
    idx = int(np.searchsorted(cdf, r, side="right"))
    return min(idx, p.size - 1)


class Rng:
    """Seeded counter-based random stream (Philox), splittable by name.

    Substreams are derived by hashing (seed, path), so two differently
    named streams are independent and a stream's output depends only on
    the seed and the names used to reach it -- never on draw order
    elsewhere in the program.
    """

    def __init__(self, seed: int, _path: tuple = ()):
        self.seed = int(seed)
        self._path = tuple(_path)
        digest = hashlib.sha256(repr((self.seed, self._path)).encode()).digest()
        key = int.from_bytes(digest[:16], "little")
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def substream(self, name) -> "Rng":
        """Independent stream addressed by (seed, ...path, name)."""
        return Rng(self.seed, self._path + (str(name),))

    def random(self, size=None):
        """Uniform draws in [0, 1)."""
        return self._gen.random(size)

    def uniform(self, low: float, high: float, size=None):
        return self._gen.uniform(low, high, size)

    def __repr__(self):
        path = "/".join(self._path)
        return f"Rng(seed={self.seed}, path={path!r})"
