"""TAHOE raw/event/session documents and a content-addressed store.

Canonical serialization (the byte string every ``_hash`` is computed over):

* JSON, UTF-8, no insignificant whitespace (``,`` and ``:`` separators);
* object keys sorted by code point; keys must be strings;
* integers in plain decimal, floats in Python's shortest round-trip ``repr``
  (so ``1.0`` and ``1`` are distinct), ``true``/``false``/``null``;
* NaN and infinities are rejected.

The on-disk store file is documented in ``docs/store_format.md``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from typing import Any, Iterable

from .ingest import CowrieEvent, EventKind, classify_eventid, eventid_success, parse_timestamp

STORE_MAGIC = "HONEYSEQ-TAHOE-STORE"
STORE_VERSION = 1

EVENT_SUB_TYPES = ("ssh", "network_traffic", "shell_command", "file_download")

_KIND_TO_SUB_TYPE = {
    EventKind.LOGIN: "ssh",
    EventKind.NETWORK_TRAFFIC: "network_traffic",
    EventKind.SHELL_COMMAND: "shell_command",
    EventKind.FILE_DOWNLOAD: "file_download",
}


class TahoeError(Exception):
    pass


class NonCanonicalizable(TahoeError, ValueError):
    pass


class WrongSubType(TahoeError, ValueError):
    pass


class UnknownEvent(TahoeError, KeyError):
    pass


class NotFound(TahoeError, KeyError):
    pass


class CorruptFile(TahoeError):
    pass


def _check(value: Any, path: str = "$") -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise NonCanonicalizable(f"non-string key {key!r} at {path}")
            _check(item, f"{path}.{key}")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check(item, f"{path}[{i}]")
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise NonCanonicalizable(f"non-finite number at {path}")
    elif value is None or isinstance(value, (str, int, bool)):
        pass
    else:
        raise NonCanonicalizable(f"unsupported type {type(value).__name__} at {path}")


def canonical_bytes(value: Any) -> bytes:
    _check(value)
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def canonical_hash(value: Any) -> str:
    return hashlib.sha256(canonical_bytes(value)).hexdigest()


@dataclass(frozen=True)
class RawDocument:
    data: dict[str, Any]
    sub_type: str
    timezone: str
    _hash: str
    itype: str = "raw"

    def hashed_portion(self) -> Any:
        return self.data

    def to_dict(self) -> dict[str, Any]:
        return {
            "itype": self.itype,
            "data": self.data,
            "sub_type": self.sub_type,
            "timezone": self.timezone,
            "_hash": self._hash,
        }


@dataclass(frozen=True)
class TahoeEvent:
    timestamp: float
    sub_type: str
    data: dict[str, Any]
    _cref: tuple[str, ...]
    _hash: str
    itype: str = "event"

    def hashed_portion(self) -> Any:
        return {"sub_type": self.sub_type, "timestamp": self.timestamp, "data": self.data}

    def to_dict(self) -> dict[str, Any]:
        return {
            "itype": self.itype,
            "timestamp": self.timestamp,
            "sub_type": self.sub_type,
            "data": self.data,
            "_cref": list(self._cref),
            "_hash": self._hash,
        }

    def first(self, key: str, default: Any = None) -> Any:
        """First value of a list-valued data attribute."""
        values = self.data.get(key)
        return values[0] if values else default

    @property
    def attacker_ip(self) -> str | None:
        attacker = self.first("attacker")
        if not attacker:
            return None
        for key in ("ipv4", "ipv6"):
            if attacker.get(key):
                return attacker[key][0]
        return None


@dataclass(frozen=True)
class AttributeDocument:
    """Opaque child blob referenced from an event's ``_cref``."""

    sub_type: str
    data: Any
    _hash: str
    itype: str = "attribute"

    def hashed_portion(self) -> Any:
        return {"sub_type": self.sub_type, "data": self.data}

    def to_dict(self) -> dict[str, Any]:
        return {"itype": self.itype, "sub_type": self.sub_type, "data": self.data, "_hash": self._hash}


@dataclass(frozen=True)
class SessionDocument:
    hostname: str
    sessionid: str
    _ref: tuple[str, ...]
    start_time: float
    end_time: float
    _cref: tuple[str, ...] = ()
    sub_type: str = "cowrie_session"
    itype: str = "session"
    _hash: str = ""

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    def hashed_portion(self) -> Any:
        body = self.to_dict()
        del body["_hash"]
        return body

    def to_dict(self) -> dict[str, Any]:
        return {
            "itype": self.itype,
            "sub_type": self.sub_type,
            "data": {"hostname": [self.hostname], "sessionid": [self.sessionid]},
            "_ref": list(self._ref),
            "_cref": list(self._cref),
            "start_time": self.start_time,
            "end_time": self.end_time,
            "duration": self.duration,
            "_hash": self._hash,
        }


def _sealed_session(hostname, sessionid, ref, start, end, cref=()) -> SessionDocument:
    doc = SessionDocument(hostname, sessionid, tuple(ref), start, end, tuple(cref))
    return SessionDocument(hostname, sessionid, doc._ref, start, end, doc._cref,
                           _hash=canonical_hash(doc.hashed_portion()))


def wrap_raw(event: CowrieEvent, sub_type: str = "cowrie_honeypot", timezone: str = "UTC") -> RawDocument:
    data = event.to_dict()
    return RawDocument(data=data, sub_type=sub_type, timezone=timezone, _hash=canonical_hash(data))


def _attacker(ip: str) -> dict[str, list[str]]:
    return {"ipv6" if ":" in ip else "ipv4": [ip]}


def _event_data(data: dict[str, Any], sub_type: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    success = eventid_success(data["eventid"])
    if sub_type == "ssh":
        out["success"] = [success]
        for key in ("username", "password"):
            if data.get(key) is not None:
                out[key] = [data[key]]
    elif sub_type == "network_traffic":
        for key in ("dst_ip", "dst_port", "data"):
            if data.get(key) is not None:
                out[key] = [data[key]]
    elif sub_type == "file_download":
        for key in ("url", "shasum", "outfile"):
            if data.get(key) is not None:
                out[key] = [data[key]]
    elif sub_type == "shell_command":
        out["success"] = [success]
        if data.get("input") is not None:
            out["shell_command"] = [data["input"]]
    out["attacker"] = [_attacker(data["src_ip"])]
    return out


def attribute_documents(sub_type: str, data: dict[str, Any]) -> list[AttributeDocument]:
    docs = []
    for key in sorted(data):
        blob = {"sub_type": key, "data": data[key]}
        docs.append(AttributeDocument(key, data[key], canonical_hash(blob)))
    return docs


def make_event(sub_type: str, timestamp: float, data: dict[str, Any]) -> TahoeEvent:
    if sub_type not in EVENT_SUB_TYPES:
        raise WrongSubType(sub_type)
    cref = tuple(sorted(doc._hash for doc in attribute_documents(sub_type, data)))
    probe = TahoeEvent(timestamp, sub_type, data, cref, "")
    return TahoeEvent(timestamp, sub_type, data, cref, canonical_hash(probe.hashed_portion()))


def filter_raw(raw: RawDocument) -> list[TahoeEvent]:
    """Map one raw Cowrie document onto zero or one TAHOE events."""
    if raw.sub_type != "cowrie_honeypot":
        raise WrongSubType(f"cannot filter raw sub_type {raw.sub_type!r}")
    sub_type = _KIND_TO_SUB_TYPE.get(classify_eventid(raw.data.get("eventid", "")))
    if sub_type is None:
        return []
    ts = parse_timestamp(raw.data["timestamp"]).timestamp()
    return [make_event(sub_type, ts, _event_data(raw.data, sub_type))]


class DocumentStore:
    """In-memory keyed collections of TAHOE documents.

    Single-writer: callers serialize mutations.  Documents are immutable;
    sessions are replaced wholesale on every upsert.
    """

    def __init__(self):
        self.raw: dict[str, RawDocument] = {}
        self.events: dict[str, TahoeEvent] = {}
        self.attributes: dict[str, AttributeDocument] = {}
        self.sessions: dict[str, SessionDocument] = {}

    def __len__(self) -> int:
        return len(self.raw) + len(self.events) + len(self.attributes) + len(self.sessions)

    def add_raw(self, doc: RawDocument) -> str:
        self.raw.setdefault(doc._hash, doc)
        return doc._hash

    def add_event(self, event: TahoeEvent) -> str:
        for child in attribute_documents(event.sub_type, event.data):
            self.attributes.setdefault(child._hash, child)
        self.events.setdefault(event._hash, event)
        return event._hash

    def session(self, sessionid: str) -> SessionDocument:
        try:
            return self.sessions[sessionid]
        except KeyError:
            raise NotFound(sessionid) from None

    def snapshot(self) -> dict[str, dict[str, Any]]:
        """Every document keyed by hash, for equality checks."""
        docs = {}
        for coll in (self.raw, self.events, self.attributes):
            docs.update({h: d.to_dict() for h, d in coll.items()})
        docs.update({s._hash: s.to_dict() for s in self.sessions.values()})
        return docs

    def dangling_refs(self) -> list[str]:
        missing = []
        for event in self.events.values():
            missing.extend(h for h in event._cref if h not in self.attributes)
        for sess in self.sessions.values():
            missing.extend(h for h in sess._ref if h not in self.events)
        return missing


def upsert_session(store: DocumentStore, event: TahoeEvent, sessionid: str, sensor: str) -> SessionDocument:
    if event._hash not in store.events:
        raise UnknownEvent(event._hash)
    current = store.sessions.get(sessionid)
    if current is None:
        doc = _sealed_session(sensor, sessionid, [event._hash], event.timestamp, event.timestamp)
    elif event._hash in current._ref:
        return current
    else:
        doc = _sealed_session(
            current.hostname,
            sessionid,
            list(current._ref) + [event._hash],
            min(current.start_time, event.timestamp),
            max(current.end_time, event.timestamp),
            current._cref,
        )
    store.sessions[sessionid] = doc
    return doc


def query_session(store: DocumentStore, sessionid: str) -> list[TahoeEvent]:
    sess = store.session(sessionid)
    events = [store.events[h] for h in sess._ref]
    return sorted(events, key=lambda e: (e.timestamp, e._hash))


def ingest_events(
    events: Iterable[CowrieEvent], store: DocumentStore | None = None, timezone: str = "UTC"
) -> DocumentStore:
    """Archive and filter parsed Cowrie events into a store."""
    store = store if store is not None else DocumentStore()
    for ev in events:
        raw = wrap_raw(ev, "cowrie_honeypot", timezone)
        store.add_raw(raw)
        for tev in filter_raw(raw):
            store.add_event(tev)
            upsert_session(store, tev, ev.session, ev.sensor)
    return store


# --- persistence ---------------------------------------------------------

def _doc_from_dict(obj: dict[str, Any]):
    itype = obj.get("itype")
    if itype == "raw":
        return RawDocument(obj["data"], obj["sub_type"], obj["timezone"], obj["_hash"])
    if itype == "event":
        return TahoeEvent(obj["timestamp"], obj["sub_type"], obj["data"], tuple(obj["_cref"]), obj["_hash"])
    if itype == "attribute":
        return AttributeDocument(obj["sub_type"], obj["data"], obj["_hash"])
    if itype == "session":
        data = obj["data"]
        doc = SessionDocument(
            data["hostname"][0], data["sessionid"][0], tuple(obj["_ref"]),
            obj["start_time"], obj["end_time"], tuple(obj["_cref"]), obj["sub_type"], "session", obj["_hash"],
        )
        if obj["duration"] != doc.duration:
            raise CorruptFile("session duration does not match start/end")
        return doc
    raise CorruptFile(f"unknown itype {itype!r}")


def persist(store: DocumentStore, path) -> None:
    docs = []
    for coll in (store.raw, store.attributes, store.events):
        docs.extend(coll[h] for h in sorted(coll))
    docs.extend(store.sessions[s] for s in sorted(store.sessions))
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(f"{STORE_MAGIC} {STORE_VERSION}\n".encode())
        for doc in docs:
            body = canonical_bytes(doc.to_dict())
            fh.write(hashlib.sha256(body).hexdigest().encode() + b"\t" + body + b"\n")
    os.replace(tmp, path)


def load(path) -> DocumentStore:
    with open(path, "rb") as fh:
        blob = fh.read()
    lines = blob.split(b"\n")
    if lines[0] != f"{STORE_MAGIC} {STORE_VERSION}".encode():
        raise CorruptFile("bad store header")
    if lines[-1] != b"":
        raise CorruptFile("truncated store file")
    store = DocumentStore()
    for lineno, line in enumerate(lines[1:-1], start=2):
        digest, sep, body = line.partition(b"\t")
        if not sep or hashlib.sha256(body).hexdigest().encode() != digest:
            raise CorruptFile(f"record checksum mismatch on line {lineno}")
        try:
            doc = _doc_from_dict(json.loads(body.decode("utf-8")))
            ok = canonical_hash(doc.hashed_portion()) == doc._hash
        except CorruptFile:
            raise
        except (ValueError, KeyError, IndexError, TypeError, AttributeError) as exc:
            raise CorruptFile(f"unreadable record on line {lineno}: {exc}") from None
        if not ok:
            raise CorruptFile(f"content hash mismatch on line {lineno}")
        if isinstance(doc, RawDocument):
            store.raw[doc._hash] = doc
        elif isinstance(doc, AttributeDocument):
            store.attributes[doc._hash] = doc
        elif isinstance(doc, TahoeEvent):
            store.events[doc._hash] = doc
        else:
            store.sessions[doc.sessionid] = doc
    if store.dangling_refs():
        raise CorruptFile("store references documents it does not contain")
    return store
