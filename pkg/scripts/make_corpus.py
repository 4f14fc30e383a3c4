"""Generate the bundled folk corpus (data/folk_corpus.abc).

Emits a deterministic collection of short monophonic tunes in the ABC
subset the toolkit parses: X/T/M/L/K headers, diatonic melodies in 4/4
over L:1/8, duration suffixes, occasional accidentals and rests, and
repeat bar lines.  The generator is seeded, so the committed corpus is
reproducible byte for byte, and it checks its own output: every line
must pass the grammar scorer, every tune must parse cleanly, and the
character vocabulary must land in the 80..100 range.

Usage: python scripts/make_corpus.py [--out data/folk_corpus.abc]
"""

import argparse
import random
import sys

from abcgen.corpus import build_vocabulary, load_corpus
from abcgen.midi import parse_tune
from abcgen.sampler import grammar_score

SEED = 20260818
NUM_TUNES = 400

# Two-octave diatonic ladder the melodies walk over.
LADDER = ["G,", "A,", "B,", "C", "D", "E", "F", "G", "A", "B",
          "c", "d", "e", "f", "g", "a", "b", "c'", "d'"]

KEYS = ["G", "D", "C", "A", "G", "D", "Em", "Am", "C", "G",
        "Dm", "D", "F", "G", "Bb", "C", "Dmix", "F#m", "Ador", "G"]

# Titles chosen so every letter appears somewhere in the corpus, in
# both cases, plus a little punctuation; folk collections read this way.
TITLES = [
    "The Quiet Queen's Quadrille", "Zig-Zag Hornpipe", "Jolly Weaver's Jig",
    "The Exile's Waltz", "Knave of Hearts", "Vixen on the Green",
    "Upton Fair", "The Yellow Haymaker", "Banks of the Silver Stream",
    "Glenside Polka (Old Style)", "The Drunken Piper", "Fox Among the Rushes",
    "Maid of the Mill", "Nine Pint Coggie", "Over the Water to Kelso",
    "The Rambling Sailor", "Trip to Durham", "Wind that Shakes the Barley",
    "Cuckoo's Nest", "The Blacksmith's Reel", "Apples in Winter",
    "Hunt the Squirrel", "The Irish Washerwoman", "Lads of Alnwick",
    "Miss Thompson's Hornpipe", "New Rigged Ship", "Off She Goes!",
    "Planxty Davis", "Queen's Shilling", "Rakes of Kildare",
    "Saddle the Pony", "Tenpenny Bit", "Under the Greenwood Tree",
    "Walls of Liscarroll", "Young Jockey", "Bonny Kate",
    "Captain Pugwash", "Dingle Regatta", "Enrico", "Flowers of Edinburgh",
    "Mrs. McLeod's Reel", "Will You Come Home?", "Salt & Pepper",
    "Hob or Nob; a jig", "Jenny's welcome to jolly Jack",
]

# Per-bar rhythm patterns in eighth-note slots ("h" = two sixteenths).
BAR_PATTERNS = [
    [1, 1, 1, 1, 1, 1, 1, 1],
    [2, 1, 1, 2, 2],
    [2, 2, 2, 2],
    [3, 1, 2, 2],
    [1, 1, 2, 1, 1, 2],
    [4, 2, 2],
    [2, 1, 1, 1, 1, 2],
    ["h", 1, 2, 2, 2],
    [1, 1, 2, 4],
]

DUR_SUFFIX = {1: "", 2: "2", 3: "3", 4: "4"}


def walk_step(rng: random.Random, pos: int) -> int:
    step = rng.choice([-3, -2, -1, -1, 0, 1, 1, 2, 3])
    return max(0, min(len(LADDER) - 1, pos + step))


def note_token(rng: random.Random, pos: int, eighths) -> str:
    if eighths != "h" and rng.random() < 0.05:
        return "z" + DUR_SUFFIX[eighths]
    acc = ""
    if rng.random() < 0.04:
        acc = rng.choice(["^", "_", "="])
    return acc + LADDER[pos] + DUR_SUFFIX.get(eighths, "")


def make_bar(rng: random.Random, pos: int):
    tokens = []
    for eighths in rng.choice(BAR_PATTERNS):
        if eighths == "h":
            tokens.append(LADDER[pos] + "/")
            pos = walk_step(rng, pos)
            tokens.append(LADDER[pos] + "/")
        else:
            tokens.append(note_token(rng, pos, eighths))
        pos = walk_step(rng, pos)
    grouped = [" ".join("".join(tokens[i : i + 2]) for i in range(0, len(tokens), 2))]
    return grouped[0], pos


def make_line(rng: random.Random, pos: int):
    bars = []
    for _ in range(4):
        bar, pos = make_bar(rng, pos)
        bars.append(bar)
    body = " | ".join(bars)
    if rng.random() < 0.3:
        return f"|: {body} :|", pos
    return f"{body} |", pos


def make_tune(rng: random.Random, index: int) -> str:
    title = TITLES[(index - 1) % len(TITLES)]
    key = KEYS[(index - 1) % len(KEYS)]
    lines = [f"X:{index}", f"T:{title}", "M:4/4", "L:1/8", f"K:{key}"]
    pos = rng.randrange(4, 12)
    for _ in range(rng.choice([2, 3, 3])):
        line, pos = make_line(rng, pos)
        lines.append(line)
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/folk_corpus.abc")
    args = parser.parse_args(argv)

    rng = random.Random(SEED)
    tunes = [make_tune(rng, i) for i in range(1, NUM_TUNES + 1)]
    text = "\n\n".join(tunes) + "\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)

    corpus = load_corpus([args.out])
    vocab = build_vocabulary(corpus)
    report = grammar_score(corpus.text)
    diagnostics = []
    for tune in corpus.tunes:
        diagnostics.extend(parse_tune(tune).diagnostics)
    print(f"tunes={len(corpus.tunes)} chars={len(corpus.text)} vocab={vocab.size} "
          f"grammar={report.score:.3f} parse_diagnostics={len(diagnostics)}")
    if len(corpus.tunes) < 50:
        sys.exit("need at least 50 tunes")
    if not 80 <= vocab.size <= 100:
        sys.exit(f"vocabulary size {vocab.size} outside [80, 100]; adjust TITLES")
    if report.score != 1.0:
        sys.exit(f"corpus is not grammar-clean: {report.diagnostics[:5]}")
    if diagnostics:
        sys.exit(f"parser diagnostics on corpus: {diagnostics[:5]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
