"""Session sequences, command typing and the command-type transition matrix."""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tahoe import DocumentStore, TahoeEvent, query_session

log = logging.getLogger(__name__)

MIN_EVENTS = 2


class CommandType(enum.Enum):
    SYSTEM_INFO = "SystemInfo"
    COVER_TRACK = "CoverTrack"
    INSTALL = "Install"
    DOWNLOAD = "Download"
    RUN = "Run"
    ESCALATE_PRIVILEGE = "EscalatePrivilege"
    CHANGE_CONFIG = "ChangeConfig"
    UNKNOWN = "Unknown"
    NONE = "None"


STATES: tuple[CommandType, ...] = tuple(CommandType)
STATE_INDEX = {s: i for i, s in enumerate(STATES)}

COMMAND_TABLE: dict[CommandType, tuple[str, ...]] = {
    CommandType.SYSTEM_INFO: (
        "cat", "echo", "free", "help", "history", "last", "ls", "ps", "w", "grep",
        "lscpu", "nproc", "uname", "wl",
    ),
    CommandType.COVER_TRACK: ("export", "reboot", "rm", "touch", "unset"),
    CommandType.INSTALL: ("apt", "apt-get", "install", "yum"),
    CommandType.DOWNLOAD: ("scp", "wget"),
    CommandType.RUN: ("nohup", "perl", "python"),
    CommandType.ESCALATE_PRIVILEGE: ("ln", "mkdir", "mv", "passwd", "su", "sudo"),
    CommandType.CHANGE_CONFIG: ("hostname", "ifconfig", "/ip", "kill", "susefirewall2", "service"),
}
RUN_PREFIXES = ("/tmp/", "/usr/")

_LOOKUP = {cmd: ctype for ctype, cmds in COMMAND_TABLE.items() for cmd in cmds}
_SEPARATORS = re.compile(r"[;&|]")


class EmptyInput(ValueError):
    pass


def split_command(text: str) -> tuple[str, str]:
    """``"wget host/x"`` -> ``("wget", "host/x")``; the parameter may be empty."""
    stripped = text.strip()
    if not stripped:
        raise EmptyInput("command input is empty")
    parts = stripped.split(None, 1)
    return parts[0], (parts[1] if len(parts) > 1 else "")


def command_type(command: str) -> CommandType:
    # compound one-liners are typed by their first command
    head = _SEPARATORS.split(command, 1)[0].strip()
    if head.startswith(RUN_PREFIXES):
        return CommandType.RUN
    return _LOOKUP.get(head, CommandType.UNKNOWN)


def event_state(event: TahoeEvent) -> CommandType:
    """Transition-machine state of an event; non-commands are ``NONE``."""
    if event.sub_type != "shell_command":
        return CommandType.NONE
    text = event.first("shell_command", "")
    if not text.strip():
        return CommandType.UNKNOWN
    return command_type(split_command(text)[0])


@dataclass(frozen=True)
class SessionSequence:
    sessionid: str
    sensor: str
    events: tuple[TahoeEvent, ...]

    @property
    def length(self) -> int:
        return len(self.events)

    def states(self) -> list[CommandType]:
        return [event_state(e) for e in self.events]


def partition_sessions(store: DocumentStore) -> tuple[list[SessionSequence], list[str]]:
    """Sequences with at least two events, plus the ids of dropped sessions.

    Sessions come out ordered by start time, then session id.
    """
    kept, dropped = [], []
    ordered = sorted(store.sessions.values(), key=lambda s: (s.start_time, s.sessionid))
    for sess in ordered:
        events = tuple(query_session(store, sess.sessionid))
        if len(events) < MIN_EVENTS:
            dropped.append(sess.sessionid)
        else:
            kept.append(SessionSequence(sess.sessionid, sess.hostname, events))
    return kept, dropped


def build_sequences(store: DocumentStore) -> list[SessionSequence]:
    kept, dropped = partition_sessions(store)
    if dropped:
        log.info("dropped %d sessions with fewer than %d events", len(dropped), MIN_EVENTS)
    return kept


@dataclass(frozen=True)
class TransitionMatrix:
    states: tuple[CommandType, ...]
    counts: np.ndarray
    probs: np.ndarray

    def prob(self, src: CommandType, dst: CommandType) -> float:
        idx = {s: i for i, s in enumerate(self.states)}
        return float(self.probs[idx[src], idx[dst]])

    def to_text(self) -> str:
        return format_table(self.states, self.probs)


def normalize_counts(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    rows = counts.sum(axis=1, keepdims=True)
    n = counts.shape[1]
    return np.where(rows > 0, counts / np.where(rows > 0, rows, 1.0), 1.0 / n)


def transition_counts(state_sequences: Iterable[Sequence[CommandType]]) -> np.ndarray:
    counts = np.zeros((len(STATES), len(STATES)), dtype=np.int64)
    for states in state_sequences:
        for a, b in zip(states, states[1:]):
            counts[STATE_INDEX[a], STATE_INDEX[b]] += 1
    return counts


def transition_matrix(sequences: Iterable[SessionSequence]) -> TransitionMatrix:
    counts = transition_counts(seq.states() for seq in sequences)
    return TransitionMatrix(STATES, counts, normalize_counts(counts))


# --- plain-text table ----------------------------------------------------

def format_table(states: Sequence[CommandType], probs: np.ndarray) -> str:
    """One header row of state names, then ``<from> p_1 ... p_n`` per state."""
    names = [s.value for s in states]
    lines = ["from\\to " + " ".join(names)]
    for name, row in zip(names, np.asarray(probs)):
        lines.append(name + " " + " ".join(repr(float(p)) for p in row))
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> tuple[tuple[CommandType, ...], np.ndarray]:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError("empty transition table")
    header = rows[0][1:]
    states = tuple(CommandType(name) for name in header)
    if len(rows) - 1 != len(states):
        raise ValueError("transition table must be square")
    probs = np.zeros((len(states), len(states)))
    for i, row in enumerate(rows[1:]):
        if CommandType(row[0]) is not states[i]:
            raise ValueError(f"row {i} is {row[0]!r}, expected {states[i].value!r}")
        if len(row) != len(states) + 1:
            raise ValueError(f"row {row[0]!r} has {len(row) - 1} entries")
        probs[i] = [float(x) for x in row[1:]]
    return states, probs
