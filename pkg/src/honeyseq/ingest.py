"""Cowrie JSON-lines parsing.

Every log line becomes a :class:`CowrieEvent` carrying the five common
attributes plus a kind-specific body.  Lines that cannot be parsed are
reported, never fatal, when going through :func:`parse_log`.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any, Iterable, Union

COMMON_FIELDS = ("eventid", "timestamp", "src_ip", "session", "sensor")

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"

_TS_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})(?:\.(\d+))?(Z|[+-]\d{2}:?\d{2})$"
)


class ParseError(ValueError):
    """Base class for per-line parse failures."""


class MalformedJson(ParseError):
    pass


class MissingField(ParseError):
    def __init__(self, name: str):
        super().__init__(f"missing field {name!r}")
        self.field = name


class BadTimestamp(ParseError):
    pass


class InvalidField(ParseError):
    pass


class EventKind(enum.Enum):
    LOGIN = "Login"
    NETWORK_TRAFFIC = "NetworkTraffic"
    FILE_DOWNLOAD = "FileDownload"
    SHELL_COMMAND = "ShellCommand"
    OTHER = "Other"


# Checked in order; a prefix matches the whole eventid or a dotted extension of it.
_KIND_PREFIXES = (
    ("cowrie.login", EventKind.LOGIN),
    ("cowrie.direct-tcpip", EventKind.NETWORK_TRAFFIC),
    ("cowrie.session.file_download", EventKind.FILE_DOWNLOAD),
    ("cowrie.command", EventKind.SHELL_COMMAND),
)


def _has_prefix(eventid: str, prefix: str) -> bool:
    return eventid == prefix or eventid.startswith(prefix + ".")


def classify_eventid(eventid: str) -> EventKind:
    for prefix, kind in _KIND_PREFIXES:
        if _has_prefix(eventid, prefix):
            return kind
    return EventKind.OTHER


def eventid_success(eventid: str) -> bool:
    """Outcome flag encoded in the eventid suffix (``.failed`` means False)."""
    return not eventid.endswith(".failed")


@dataclass(frozen=True)
class LoginBody:
    username: str | None
    password: str | None
    success: bool


@dataclass(frozen=True)
class TcpIpBody:
    dst_ip: str | None
    dst_port: int | None
    data: str | None = None


@dataclass(frozen=True)
class FileDownloadBody:
    url: str | None
    shasum: str | None
    outfile: str | None


@dataclass(frozen=True)
class CommandBody:
    input: str | None
    success: bool


@dataclass(frozen=True)
class OtherBody:
    raw: dict[str, Any] = field(default_factory=dict)


Body = Union[LoginBody, TcpIpBody, FileDownloadBody, CommandBody, OtherBody]

# body attribute -> json key, per kind
_BODY_KEYS: dict[EventKind, tuple[str, ...]] = {
    EventKind.LOGIN: ("username", "password"),
    EventKind.NETWORK_TRAFFIC: ("dst_ip", "dst_port", "data"),
    EventKind.FILE_DOWNLOAD: ("url", "shasum", "outfile"),
    EventKind.SHELL_COMMAND: ("input",),
    EventKind.OTHER: (),
}


@dataclass(frozen=True)
class CowrieEvent:
    eventid: str
    timestamp: datetime
    src_ip: str
    session: str
    sensor: str
    payload: Body
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def kind(self) -> EventKind:
        return classify_eventid(self.eventid)

    @property
    def success(self) -> bool | None:
        return getattr(self.payload, "success", None)

    def to_dict(self) -> dict[str, Any]:
        """Re-serialize to the Cowrie JSON object shape."""
        out: dict[str, Any] = {
            "eventid": self.eventid,
            "timestamp": format_timestamp(self.timestamp),
            "src_ip": self.src_ip,
            "session": self.session,
            "sensor": self.sensor,
        }
        if isinstance(self.payload, OtherBody):
            out.update(self.payload.raw)
        else:
            for key in _BODY_KEYS[self.kind]:
                value = getattr(self.payload, key)
                if value is not None:
                    out[key] = value
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def parse_timestamp(text: Any) -> datetime:
    """ISO-8601 to an aware UTC datetime; digits past microseconds are dropped."""
    if not isinstance(text, str):
        raise BadTimestamp(f"timestamp must be a string, got {type(text).__name__}")
    m = _TS_RE.match(text.strip())
    if m is None:
        raise BadTimestamp(f"unrecognised timestamp {text!r}")
    year, month, day, hour, minute, second, frac, zone = m.groups()
    micros = int((frac or "0")[:6].ljust(6, "0"))
    if zone == "Z":
        tz = timezone.utc
    else:
        sign = 1 if zone[0] == "+" else -1
        digits = zone[1:].replace(":", "")
        tz = timezone(sign * timedelta(hours=int(digits[:2]), minutes=int(digits[2:])))
    try:
        ts = datetime(int(year), int(month), int(day), int(hour), int(minute), int(second), micros, tzinfo=tz)
    except ValueError as exc:
        raise BadTimestamp(f"invalid timestamp {text!r}: {exc}") from None
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)


def _opt_str(obj: dict[str, Any], key: str) -> str | None:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise InvalidField(f"{key} must be a string")
    return value


def _build_body(kind: EventKind, eventid: str, obj: dict[str, Any]) -> Body:
    if kind is EventKind.LOGIN:
        return LoginBody(_opt_str(obj, "username"), _opt_str(obj, "password"), eventid_success(eventid))
    if kind is EventKind.NETWORK_TRAFFIC:
        port = obj.get("dst_port")
        if port is not None:
            if isinstance(port, bool) or not isinstance(port, int) or not 0 <= port <= 65535:
                raise InvalidField(f"dst_port out of range: {port!r}")
        return TcpIpBody(_opt_str(obj, "dst_ip"), port, _opt_str(obj, "data"))
    if kind is EventKind.FILE_DOWNLOAD:
        return FileDownloadBody(_opt_str(obj, "url"), _opt_str(obj, "shasum"), _opt_str(obj, "outfile"))
    if kind is EventKind.SHELL_COMMAND:
        return CommandBody(_opt_str(obj, "input"), eventid_success(eventid))
    return OtherBody({k: v for k, v in obj.items() if k not in COMMON_FIELDS})


def event_from_dict(obj: Any) -> CowrieEvent:
    if not isinstance(obj, dict):
        raise MalformedJson(f"expected a JSON object, got {type(obj).__name__}")
    for name in COMMON_FIELDS:
        if name not in obj:
            raise MissingField(name)
    for name in ("eventid", "src_ip", "session", "sensor"):
        if not isinstance(obj[name], str):
            raise InvalidField(f"{name} must be a string")
    eventid = obj["eventid"]
    ts = parse_timestamp(obj["timestamp"])
    kind = classify_eventid(eventid)
    body = _build_body(kind, eventid, obj)
    if kind is EventKind.OTHER:
        extra = {}
    else:
        used = set(COMMON_FIELDS) | set(_BODY_KEYS[kind])
        extra = {k: v for k, v in obj.items() if k not in used}
    return CowrieEvent(eventid, ts, obj["src_ip"], obj["session"], obj["sensor"], body, extra)


def parse_line(line: str) -> CowrieEvent:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from None
    return event_from_dict(obj)


def parse_log(lines: Iterable[str]) -> tuple[list[CowrieEvent], list[tuple[int, ParseError]]]:
    """Parse a stream of lines, collecting failures as ``(line_number, error)``.

    Line numbers are 1-based.  Blank lines count as lines and are reported as
    malformed so that ``len(events) + len(errors)`` equals the line count.
    """
    events: list[CowrieEvent] = []
    errors: list[tuple[int, ParseError]] = []
    for lineno, line in enumerate(lines, start=1):
        try:
            events.append(parse_line(line))
        except ParseError as exc:
            errors.append((lineno, exc))
    return events, errors


def read_log(path) -> tuple[list[CowrieEvent], list[tuple[int, ParseError]]]:
    with open(path, encoding="utf-8") as fh:
        return parse_log(line.rstrip("\n") for line in fh)
