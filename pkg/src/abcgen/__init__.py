"""Character-level LSTM toolkit for ABC folk tunes.

Loads an ABC corpus, trains a stacked LSTM character model with Adam
and truncated BPTT, samples new tunes with temperature control, scores
their grammar, and renders them to standard MIDI files.
"""

__version__ = "0.1.0"
