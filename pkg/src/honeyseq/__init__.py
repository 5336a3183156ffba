"""Honeypot session modeling.

Cowrie logs are parsed (``ingest``), normalized into hash-addressed
documents (``tahoe``), grouped into typed sessions (``sequence``), encoded
as 17-feature columns with next-event targets (``features``) and fed to
TCN/LSTM/GRU classifiers (``neural``).  ``synth`` generates Markov corpora
with a known Bayes accuracy; ``harness`` runs experiments and the CLI.
"""

__version__ = "0.1.0"
