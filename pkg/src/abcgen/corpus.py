"""ABC corpus loading, character vocabulary, and stateful batch layout.

A corpus is a set of plain-text ABC files.  Tunes are blank-line
separated blocks; a block without an "X:" header is not a tune and is
dropped.  The training stream is simply every tune joined with a blank
line, encoded one character at a time.
"""

import logging
import re
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class CorpusError(Exception):
    """Raised for unreadable corpus files or a corpus with no tunes."""


@dataclass(frozen=True)
class CorpusText:
    """Normalized tunes plus where they came from."""

    tunes: list
    source_paths: list

    @property
    def text(self) -> str:
        """The training stream: tunes joined by one blank line."""
        return "\n\n".join(self.tunes)


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between corpus characters and contiguous integer ids.

    Characters are kept in ascending code-point order so two builds of
    the same corpus are identical.
    """

    chars: tuple
    index: dict = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.chars)


@dataclass(frozen=True)
class BatchConfig:
    batch_size: int = 16
    seq_len: int = 64

    def __post_init__(self):
        if self.batch_size < 1 or self.seq_len < 1:
            raise ValueError("batch_size and seq_len must be >= 1")


@dataclass(frozen=True)
class Segment:
    """One training step's worth of data: targets are inputs shifted by one."""

    inputs: np.ndarray   # (B, L) int ids
    targets: np.ndarray  # (B, L) int ids


@dataclass(frozen=True)
class BatchSet:
    """The corpus laid out as B parallel streams cut into L-step segments.

    Row b of every segment continues the same contiguous character
    stream, which is what lets hidden state carry across segments.
    """

    segments: list

    @property
    def num_segments(self) -> int:
        return len(self.segments)


def _split_tunes(text: str) -> list:
    """Blank-line separated blocks of a normalized (\\n only) text."""
    blocks = re.split(r"\n\s*\n", text)
    return [b.strip("\n") for b in blocks if b.strip()]


def load_corpus(paths) -> CorpusText:
    """Read ABC files and keep every blank-line separated block with an X: header.

    Line endings are normalized to "\\n".  Blocks lacking an "X:" line
    are dropped (counted in a warning).  Raises CorpusError when a path
    cannot be read or no tunes survive the filter.
    """
    paths = [str(p) for p in paths]
    tunes = []
    dropped = 0
    for path in paths:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = fh.read()
        except OSError as exc:
            raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc
        text = raw.replace("\r\n", "\n").replace("\r", "\n")
        for block in _split_tunes(text):
            if any(line.startswith("X:") for line in block.split("\n")):
                tunes.append(block)
            else:
                dropped += 1
    if dropped:
        log.warning("dropped %d fragment(s) without an X: header", dropped)
    if not tunes:
        raise CorpusError(f"no tunes with an X: header found in {paths}")
    return CorpusText(tunes=tunes, source_paths=paths)


def build_vocabulary(corpus) -> Vocabulary:
    """Vocabulary over every character of the corpus text (or a raw string)."""
    text = corpus.text if isinstance(corpus, CorpusText) else str(corpus)
    if not text:
        raise ValueError("cannot build a vocabulary from empty text")
    chars = tuple(sorted(set(text)))
    return Vocabulary(chars=chars, index={c: i for i, c in enumerate(chars)})


def encode(text: str, vocab: Vocabulary) -> np.ndarray:
    """Map text to int ids; unknown characters are an error, not a skip."""
    ids = np.empty(len(text), dtype=np.int64)
    index = vocab.index
    for i, ch in enumerate(text):
        try:
            ids[i] = index[ch]
        except KeyError:
            raise ValueError(
                f"character {ch!r} at offset {i} is not in the vocabulary"
            ) from None
    return ids


def decode(ids, vocab: Vocabulary) -> str:
    chars = vocab.chars
    out = []
    for i, v in enumerate(ids):
        v = int(v)
        if not 0 <= v < len(chars):
            raise ValueError(f"id {v} at offset {i} is out of range [0, {len(chars)})")
        out.append(chars[v])
    return "".join(out)


def one_hot(ids, vocab_size: int) -> np.ndarray:
    """Ids (any shape) to {0,1} float64 vectors along a trailing axis of size V."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise ValueError(f"id out of range [0, {vocab_size})")
    out = np.zeros(ids.shape + (vocab_size,), dtype=np.float64)
    np.put_along_axis(out, ids[..., None], 1.0, axis=-1)
    return out


def make_batches(ids, cfg: BatchConfig) -> BatchSet:
    """Cut the id stream into B parallel streams of L-step segments.

    The first B*floor(len/B) ids form B contiguous equal streams; each
    stream yields floor((stream_len - 1) / L) segments whose targets are
    the inputs shifted by one.  Leftover ids are discarded.
    """
    ids = np.asarray(ids, dtype=np.int64)
    b, l = cfg.batch_size, cfg.seq_len
    minimum = b * (l + 1)
    if ids.size < minimum:
        raise ValueError(
            f"corpus too small for batching: {ids.size} ids, need at least "
            f"B*(L+1) = {minimum}"
        )
    stream_len = ids.size // b
    streams = ids[: b * stream_len].reshape(b, stream_len)
    num_segments = (stream_len - 1) // l
    segments = []
    for k in range(num_segments):
        inputs = streams[:, k * l : (k + 1) * l].copy()
        targets = streams[:, k * l + 1 : (k + 1) * l + 1].copy()
        segments.append(Segment(inputs=inputs, targets=targets))
    return BatchSet(segments=segments)
