"""Synthetic Cowrie corpora from a Markov chain over command types.

A session is a login (state ``None``) followed by a walk on the configured
chain.  Command states emit ``cowrie.command.*`` events whose text is drawn
from the state's vocabulary; later ``None`` states emit a
``cowrie.session.file_download`` (with probability ``download_event_prob``
when the previous state was ``Download``) or a ``cowrie.direct-tcpip``
request otherwise.  Every emitted event therefore carries exactly the state
the chain was in, so the chain is recoverable from the log alone.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .ingest import (
    CommandBody,
    CowrieEvent,
    FileDownloadBody,
    LoginBody,
    OtherBody,
    TcpIpBody,
    parse_timestamp,
)
from .sequence import CommandType, command_type, format_table, parse_table, split_command

DATA_DIR = Path(__file__).parent / "data"
DEFAULT_CONFIG_PATH = DATA_DIR / "default_generator.json"

DEFAULT_SENSORS = ("amsterdam", "bangalore", "london", "singapore", "toronto")
DEFAULT_SESSIONS = 393

NONE = CommandType.NONE
DOWNLOAD = CommandType.DOWNLOAD


class InvalidConfig(ValueError):
    pass


class IoError(OSError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    """Generative model for synthetic sessions.

    ``states`` orders the rows and columns of ``transitions`` and must
    contain ``None``, the login state every session starts in.
    ``vocabularies`` maps each command state to ``(text, weight)`` pairs.
    """

    states: tuple[CommandType, ...]
    transitions: np.ndarray
    vocabularies: dict[CommandType, tuple[tuple[str, float], ...]]
    min_length: int = 2
    max_length: int = 47
    length_p: float = 0.125
    download_event_prob: float = 0.8
    sensors: tuple[str, ...] = DEFAULT_SENSORS
    attacker_ips: tuple[str, ...] = ()
    credentials: tuple[tuple[str, str], ...] = (("root", "admin"),)
    tcp_targets: tuple[tuple[str, int], ...] = (("8.8.8.8", 53),)
    mean_gap: float = 2.0
    start: str = "2020-04-04T00:00:00Z"
    end: str = "2020-05-08T00:00:00Z"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "transitions", np.asarray(self.transitions, dtype=np.float64))
        validate(self)

    def index(self, state: CommandType) -> int:
        return self.states.index(state)

    def length_pmf(self) -> np.ndarray:
        """P(L = min_length + i) for the truncated geometric length law."""
        k = np.arange(self.max_length - self.min_length + 1)
        w = (1.0 - self.length_p) ** k * self.length_p
        return w / w.sum()

    def mean_length(self) -> float:
        pmf = self.length_pmf()
        return float(np.dot(pmf, np.arange(self.min_length, self.max_length + 1)))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(config_to_dict(self), sort_keys=True).encode()).hexdigest()


def validate(cfg: GeneratorConfig) -> None:
    n = len(cfg.states)
    if len(set(cfg.states)) != n:
        raise InvalidConfig("duplicate states")
    if NONE not in cfg.states:
        raise InvalidConfig("states must include None (the login state)")
    P = cfg.transitions
    if P.shape != (n, n):
        raise InvalidConfig(f"transition matrix is {P.shape}, expected {(n, n)}")
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        raise InvalidConfig("transition probabilities must be finite and non-negative")
    bad = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > 1e-9)
    if bad.size:
        raise InvalidConfig(f"row {cfg.states[bad[0]].value} does not sum to 1")
    if not 2 <= cfg.min_length <= cfg.max_length:
        raise InvalidConfig("need 2 <= min_length <= max_length")
    if not 0.0 < cfg.length_p <= 1.0:
        raise InvalidConfig("length_p must be in (0, 1]")
    if not 0.0 <= cfg.download_event_prob <= 1.0:
        raise InvalidConfig("download_event_prob must be in [0, 1]")
    if not cfg.mean_gap > 0:
        raise InvalidConfig("mean_gap must be positive")
    if not cfg.sensors or not cfg.attacker_ips or not cfg.credentials or not cfg.tcp_targets:
        raise InvalidConfig("sensors, attacker_ips, credentials and tcp_targets must be non-empty")
    try:
        if parse_timestamp(cfg.end) <= parse_timestamp(cfg.start):
            raise InvalidConfig("end must be after start")
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    for state in cfg.states:
        if state is NONE:
            continue
        vocab = cfg.vocabularies.get(state)
        if not vocab:
            raise InvalidConfig(f"no vocabulary for {state.value}")
        for text, weight in vocab:
            if not weight > 0:
                raise InvalidConfig(f"weight of {text!r} must be positive")
            try:
                head = split_command(text)[0]
            except ValueError:
                raise InvalidConfig(f"empty command in {state.value} vocabulary") from None
            if command_type(head) is not state:
                raise InvalidConfig(f"{text!r} is typed {command_type(head).value}, not {state.value}")


# --- config files --------------------------------------------------------

def config_to_dict(cfg: GeneratorConfig) -> dict[str, Any]:
    return {
        "transition_table": format_table(cfg.states, cfg.transitions),
        "vocabularies": {s.value: [[t, w] for t, w in v] for s, v in cfg.vocabularies.items()},
        "min_length": cfg.min_length,
        "max_length": cfg.max_length,
        "length_p": cfg.length_p,
        "download_event_prob": cfg.download_event_prob,
        "sensors": list(cfg.sensors),
        "attacker_ips": list(cfg.attacker_ips),
        "credentials": [list(c) for c in cfg.credentials],
        "tcp_targets": [list(t) for t in cfg.tcp_targets],
        "mean_gap": cfg.mean_gap,
        "start": cfg.start,
        "end": cfg.end,
        "seed": cfg.seed,
    }


def _ip_pool(size: int, seed: int) -> tuple[str, ...]:
    rng = np.random.default_rng([seed, 0x1b])
    pool: dict[str, None] = {}
    while len(pool) < size:
        a = int(rng.integers(1, 224))
        if a in (10, 127):
            continue
        pool.setdefault(".".join(str(x) for x in (a, *rng.integers(0, 256, 2), rng.integers(1, 255))), None)
    return tuple(pool)


def config_from_dict(data: dict[str, Any], base_dir: Path | None = None) -> GeneratorConfig:
    """Build a config from its JSON form.

    The chain is given as ``transition_table`` (plain-text table) or
    ``transition_file`` (path to one, relative to ``base_dir``).  Without an
    explicit ``attacker_ips`` list, ``attacker_pool_size`` addresses are drawn
    deterministically from the seed.
    """
    try:
        if "transition_file" in data:
            path = Path(data["transition_file"])
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            table = path.read_text(encoding="utf-8")
        else:
            table = data["transition_table"]
        states, probs = parse_table(table)
        vocabularies = {
            CommandType(name): tuple((str(t), float(w)) for t, w in entries)
            for name, entries in data.get("vocabularies", {}).items()
        }
        seed = int(data.get("seed", 0))
        ips = data.get("attacker_ips") or _ip_pool(int(data.get("attacker_pool_size", 50)), seed)
        known = {"transition_file", "transition_table", "vocabularies", "attacker_ips", "attacker_pool_size",
                 "min_length", "max_length", "length_p", "download_event_prob", "sensors", "credentials",
                 "tcp_targets", "mean_gap", "start", "end", "seed", "description"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidConfig(f"unknown config keys: {', '.join(unknown)}")
        return GeneratorConfig(
            states=states,
            transitions=probs,
            vocabularies=vocabularies,
            min_length=int(data.get("min_length", 2)),
            max_length=int(data.get("max_length", 47)),
            length_p=float(data.get("length_p", 0.125)),
            download_event_prob=float(data.get("download_event_prob", 0.8)),
            sensors=tuple(data.get("sensors", DEFAULT_SENSORS)),
            attacker_ips=tuple(ips),
            credentials=tuple((str(u), str(p)) for u, p in data.get("credentials", [("root", "admin")])),
            tcp_targets=tuple((str(h), int(p)) for h, p in data.get("tcp_targets", [("8.8.8.8", 53)])),
            mean_gap=float(data.get("mean_gap", 2.0)),
            start=str(data.get("start", "2020-04-04T00:00:00Z")),
            end=str(data.get("end", "2020-05-08T00:00:00Z")),
            seed=seed,
        )
    except InvalidConfig:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise InvalidConfig(f"bad generator config: {exc}") from None


def load_config(path=None) -> GeneratorConfig:
    path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read {path}: {exc}") from None
    return config_from_dict(data, path.parent)


def default_config() -> GeneratorConfig:
    return load_config(DEFAULT_CONFIG_PATH)


def with_seed(cfg: GeneratorConfig, seed: int) -> GeneratorConfig:
    data = config_to_dict(cfg)
    data["seed"] = seed
    return config_from_dict(data)


# --- generation ----------------------------------------------------------

def sample_states(cfg: GeneratorConfig, rng: np.random.Generator) -> list[CommandType]:
    pmf = cfg.length_pmf()
    length = cfg.min_length + int(rng.choice(len(pmf), p=pmf))
    states = [NONE]
    cur = cfg.index(NONE)
    for _ in range(length - 1):
        cur = int(rng.choice(len(cfg.states), p=cfg.transitions[cur]))
        states.append(cfg.states[cur])
    return states


def _pick(rng: np.random.Generator, options: Sequence[Any], weights=None):
    if weights is None:
        return options[int(rng.integers(len(options)))]
    w = np.asarray(weights, dtype=np.float64)
    return options[int(rng.choice(len(options), p=w / w.sum()))]


def _url_in(text: str) -> str | None:
    for tok in text.split():
        if tok.startswith(("http://", "https://")):
            return tok
    return None


def generate_session(cfg: GeneratorConfig, rng: np.random.Generator,
                     session_id: str | None = None) -> list[CowrieEvent]:
    """One session as Cowrie events, login first, timestamps strictly increasing."""
    validate(cfg)
    sid = session_id or f"{int(rng.integers(0, 2**32)):08x}"
    sensor = _pick(rng, cfg.sensors)
    ip = _pick(rng, cfg.attacker_ips)
    t0 = parse_timestamp(cfg.start)
    span = (parse_timestamp(cfg.end) - t0).total_seconds()
    clock = t0 + timedelta(microseconds=int(rng.integers(0, int(span * 1e6))))

    events: list[CowrieEvent] = []
    prev_state: CommandType | None = None
    last_url: str | None = None
    for i, state in enumerate(sample_states(cfg, rng)):
        if i:
            gap = max(rng.exponential(cfg.mean_gap), 1e-3)
            clock = clock + timedelta(microseconds=max(1, int(round(gap * 1e6))))
        if i == 0:
            user, password = _pick(rng, cfg.credentials)
            eventid, body = "cowrie.login.success", LoginBody(user, password, True)
        elif state is NONE:
            if prev_state is DOWNLOAD and rng.random() < cfg.download_event_prob:
                url = last_url or f"http://{ip}/bins.sh"
                shasum = hashlib.sha256(url.encode()).hexdigest()
                eventid = "cowrie.session.file_download"
                body = FileDownloadBody(url, shasum, f"var/lib/cowrie/downloads/{shasum}")
            else:
                host, port = _pick(rng, cfg.tcp_targets)
                eventid, body = "cowrie.direct-tcpip.request", TcpIpBody(host, port)
        else:
            vocab = cfg.vocabularies[state]
            text = _pick(rng, [t for t, _ in vocab], [w for _, w in vocab])
            ok = state is not CommandType.UNKNOWN
            eventid = "cowrie.command.success" if ok else "cowrie.command.failed"
            body = CommandBody(text, ok)
            if state is DOWNLOAD:
                last_url = _url_in(text)
        events.append(CowrieEvent(eventid, clock, ip, sid, sensor, body))
        prev_state = state
    return events


def _session_events(cfg: GeneratorConfig, seed: int, index: int, taken: set[str]) -> list[CowrieEvent]:
    rng = np.random.default_rng([seed, index])
    while True:
        sid = f"{int(rng.integers(0, 2**32)):08x}"
        if sid not in taken:
            taken.add(sid)
            return generate_session(cfg, rng, sid)


def _wrap(events: list[CowrieEvent]) -> list[CowrieEvent]:
    """Add connect/closed bookkeeping lines around a session (ignored downstream)."""
    first, last = events[0], events[-1]
    connect = CowrieEvent("cowrie.session.connect", first.timestamp - timedelta(milliseconds=250),
                          first.src_ip, first.session, first.sensor,
                          OtherBody({"protocol": "ssh", "dst_port": 22}))
    duration = (last.timestamp - connect.timestamp).total_seconds() + 0.5
    closed = CowrieEvent("cowrie.session.closed", last.timestamp + timedelta(milliseconds=500),
                         last.src_ip, last.session, last.sensor,
                         OtherBody({"duration": round(duration, 3)}))
    return [connect, *events, closed]


def generate_corpus(cfg: GeneratorConfig, n_sessions: int = DEFAULT_SESSIONS, out=None,
                    seed: int | None = None, bookkeeping: bool = True) -> list[CowrieEvent]:
    """``n_sessions`` sessions merged in timestamp order; written as JSON lines to ``out``.

    Session ``i`` uses its own stream ``default_rng([seed, i])``.
    """
    if n_sessions < 1:
        raise InvalidConfig("n_sessions must be >= 1")
    seed = cfg.seed if seed is None else seed
    taken: set[str] = set()
    merged: list[CowrieEvent] = []
    for i in range(n_sessions):
        events = _session_events(cfg, seed, i, taken)
        merged.extend(_wrap(events) if bookkeeping else events)
    merged.sort(key=lambda e: (e.timestamp, e.session))
    if out is not None:
        write_log(out, merged)
    return merged


def generate_transitions(cfg: GeneratorConfig, min_transitions: int,
                         seed: int | None = None) -> list[list[CommandType]]:
    """State sequences of whole sessions until at least ``min_transitions`` transitions."""
    seed = cfg.seed if seed is None else seed
    out, total, i = [], 0, 0
    while total < min_transitions:
        states = sample_states(cfg, np.random.default_rng([seed, i]))
        out.append(states)
        total += len(states) - 1
        i += 1
    return out


def generate_sessions_until(cfg: GeneratorConfig, min_transitions: int,
                            seed: int | None = None) -> list[CowrieEvent]:
    """Full events (no bookkeeping lines) for sessions covering ``min_transitions``."""
    seed = cfg.seed if seed is None else seed
    taken: set[str] = set()
    merged, total, i = [], 0, 0
    while total < min_transitions:
        events = _session_events(cfg, seed, i, taken)
        merged.extend(events)
        total += len(events) - 1
        i += 1
    return merged


def write_log(path, events: Sequence[CowrieEvent]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for ev in events:
                fh.write(ev.to_json() + "\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


# --- oracle --------------------------------------------------------------

def bayes_accuracy(cfg: GeneratorConfig) -> float:
    """Expected accuracy of predicting each next state by ``argmax_j P[s][j]``.

    Pooled over all predicted positions of all sessions: position ``t``
    (1-based) is a prediction source iff ``L >= t + 1``, and its state law
    is ``e_None P^(t-1)``.  The visit weights are therefore
    ``pi ∝ sum_t P(L >= t+1) e_None P^(t-1)``, computed exactly.
    """
    validate(cfg)
    P = cfg.transitions
    lengths = np.arange(cfg.min_length, cfg.max_length + 1)
    pmf = cfg.length_pmf()
    dist = np.zeros(len(cfg.states))
    dist[cfg.index(NONE)] = 1.0
    visits = np.zeros_like(dist)
    for t in range(1, cfg.max_length):
        survive = pmf[lengths >= t + 1].sum()
        visits += survive * dist
        dist = dist @ P
    pi = visits / visits.sum()
    return float(np.clip(pi @ P.max(axis=1), 0.0, 1.0))
