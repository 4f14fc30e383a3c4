"""Text generation from a trained model, and grammar scoring of the output.

Generation warms the LSTM state on the seed text (eval mode, batch of
one), then samples autoregressively under a temperature-scaled
distribution, or takes the argmax in greedy mode.  Grammar scoring is
line-based: header lines must look like "<letter>:...", body lines must
tokenize fully under the ABC subset the renderer accepts.
"""

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .corpus import Vocabulary, encode, one_hot
from .midi import tokenize_body_line
from .model import ModelParams, forward, zero_state
from .numerics import PROB_FLOOR, Rng, sample_categorical, softmax_rows


@dataclass(frozen=True)
class SampleConfig:
    seed_text: str = "X:1\n"
    length: int = 400
    temperature: float = 1.0
    rng_seed: int = 0
    mode: str = "stochastic"  # or "greedy"

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be > 0")
        if self.mode not in ("stochastic", "greedy"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.seed_text:
            raise ValueError("seed_text must be non-empty")


def temperature_scale(logits, temperature: float) -> np.ndarray:
    """softmax(logits / T) for a single row of logits (or log-probs)."""
    if temperature <= 0.0:
        raise ValueError("temperature must be > 0")
    row = np.asarray(logits, dtype=np.float64).reshape(1, -1)
    return softmax_rows(row / temperature)[0]


def generate(params: ModelParams, vocab: Vocabulary, cfg: SampleConfig) -> str:
    """Return cfg.seed_text plus cfg.length sampled characters."""
    if params.config.vocab_size != vocab.size:
        raise ValueError(
            f"model vocab size {params.config.vocab_size} != vocabulary size {vocab.size}"
        )
    seed_ids = encode(cfg.seed_text, vocab)
    state = zero_state(params.config, 1)
    probs, state, _ = forward(params, seed_ids.reshape(1, -1), state, mode="eval")
    last = probs[0, -1]
    rng = Rng(cfg.rng_seed).substream("sample")
    out = []
    for _ in range(cfg.length):
        scaled = temperature_scale(np.log(np.maximum(last, PROB_FLOOR)), cfg.temperature)
        if cfg.mode == "greedy":
            next_id = int(np.argmax(scaled))
        else:
            next_id = sample_categorical(scaled, rng)
        out.append(vocab.chars[next_id])
        probs, state, _ = forward(params, np.array([[next_id]]), state, mode="eval")
        last = probs[0, -1]
    return cfg.seed_text + "".join(out)


@dataclass
class ScoreReport:
    score: float
    total_lines: int
    valid_lines: int
    diagnostics: list = field(default_factory=list)  # dicts {line_no, reason}

    def to_json(self) -> str:
        return json.dumps(
            {
                "score": self.score,
                "total_lines": self.total_lines,
                "valid_lines": self.valid_lines,
                "diagnostics": self.diagnostics,
            }
        )


_HEADER_LINE_RE = re.compile(r"^[A-Za-z]:")


def grammar_score(text: str) -> ScoreReport:
    """Fraction of non-empty lines that are well-formed ABC.

    A line starting "<letter>:" counts as a header and is always valid;
    any other line is a tune-body candidate and must tokenize with no
    unknown characters.  Empty input scores 0 with a note.
    """
    total = 0
    valid = 0
    diagnostics = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        total += 1
        if _HEADER_LINE_RE.match(line):
            valid += 1
            continue
        _, unknown = tokenize_body_line(line)
        if not unknown:
            valid += 1
        else:
            offset, ch = unknown[0]
            diagnostics.append(
                {"line_no": line_no,
                 "reason": f"unknown character {ch!r} at column {offset + 1}"}
            )
    if total == 0:
        return ScoreReport(score=0.0, total_lines=0, valid_lines=0,
                           diagnostics=[{"line_no": 0, "reason": "no non-empty lines"}])
    return ScoreReport(score=valid / total, total_lines=total, valid_lines=valid,
                       diagnostics=diagnostics)
