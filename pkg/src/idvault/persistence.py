"""Document persistence: a pluggable store contract with two backends.

The default backend keeps one append-only journal file per collection under
``<data-dir>/collections/<name>.journal``. Each journal record is::

    [4-byte big-endian payload length][payload JSON, one UTF-8 line][4-byte big-endian CRC32 of payload]

Replaying the journal at startup rebuilds the in-memory state and the unique
indexes; a torn trailing record (bad length or CRC) is truncated away, so an
acknowledged write is either fully present after a crash or the journal ends
before it — never a half-record. Writes are fsynced before they are
acknowledged.

``MemoryStore`` implements the same contract without any I/O and doubles as
the reference model for the model-based property tests.
"""

from __future__ import annotations

import copy
import json
import os
import re
import struct
import threading
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterator, Optional

from .errors import IdVaultError
from .ids import new_id

_COLLECTION_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

_LEN = struct.Struct(">I")

# journals are compacted on open once they carry more dead ops than live docs
_COMPACT_MIN_OPS = 1024


class StoreError(IdVaultError):
    pass


class NotFound(StoreError):
    def __init__(self, collection: str, doc_id: str):
        super().__init__(f"no document {doc_id!r} in collection {collection!r}")
        self.collection = collection
        self.doc_id = doc_id


class UniqueViolation(StoreError):
    def __init__(self, collection: str, field_name: str, value: Any):
        super().__init__(
            f"unique field {field_name!r} in collection {collection!r} already has value {value!r}"
        )
        self.collection = collection
        self.field = field_name
        self.value = value


class IoFailure(StoreError):
    pass


def utc_now_text(now: Optional[datetime] = None) -> str:
    """Current UTC instant as ``YYYY-MM-DDTHH:MM:SS.mmmZ``."""
    dt = now or datetime.now(timezone.utc)
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


@dataclass
class Document:
    collection: str
    id: str
    values: dict[str, Any]
    created_at: str
    updated_at: str

    def copy(self) -> "Document":
        return Document(
            collection=self.collection,
            id=self.id,
            values=copy.deepcopy(self.values),
            created_at=self.created_at,
            updated_at=self.updated_at,
        )


@dataclass
class _UniqueIndex:
    field: str
    normalize: Optional[Callable[[Any], Any]]
    entries: dict[Any, str] = field(default_factory=dict)  # key -> doc id

    def key_for(self, values: dict[str, Any]) -> Any:
        value = values.get(self.field)
        if value is None:
            return None
        if self.normalize is not None:
            value = self.normalize(value)
        return value


class StoreBackend:
    """Contract every document store implements.

    Methods raise NotFound / UniqueViolation / IoFailure; scan returns
    documents in stable id order.
    """

    def insert(self, collection: str, values: dict[str, Any]) -> Document:
        raise NotImplementedError

    def get(self, collection: str, doc_id: str) -> Optional[Document]:
        raise NotImplementedError

    def update(self, collection: str, doc_id: str, values: dict[str, Any]) -> Document:
        raise NotImplementedError

    def delete(self, collection: str, doc_id: str) -> Document:
        raise NotImplementedError

    def scan(
        self,
        collection: str,
        limit: Optional[int] = None,
        start: int = 0,
        filter: Optional[dict[str, Any]] = None,
    ) -> list[Document]:
        raise NotImplementedError

    def ensure_unique_index(
        self,
        collection: str,
        field_name: str,
        normalize: Optional[Callable[[Any], Any]] = None,
    ) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


def _check_collection(name: str) -> None:
    if not _COLLECTION_NAME.match(name):
        raise IoFailure(f"illegal collection name {name!r}")


def _match(doc: Document, filter: Optional[dict[str, Any]]) -> bool:
    if not filter:
        return True
    return all(doc.values.get(k) == v for k, v in filter.items())


class _CollectionState:
    """Shared in-memory shape of one collection: docs + unique indexes."""

    def __init__(self) -> None:
        self.docs: dict[str, Document] = {}
        self.indexes: list[_UniqueIndex] = []
        self.lock = threading.RLock()

    def check_unique(self, values: dict[str, Any], exclude_id: Optional[str], collection: str) -> None:
        for index in self.indexes:
            key = index.key_for(values)
            if key is None:
                continue
            holder = index.entries.get(key)
            if holder is not None and holder != exclude_id:
                raise UniqueViolation(collection, index.field, values.get(index.field))

    def index_add(self, doc: Document) -> None:
        for index in self.indexes:
            key = index.key_for(doc.values)
            if key is not None:
                index.entries[key] = doc.id

    def index_remove(self, doc: Document) -> None:
        for index in self.indexes:
            key = index.key_for(doc.values)
            if key is not None and index.entries.get(key) == doc.id:
                del index.entries[key]

    def ordered(self) -> list[Document]:
        return [self.docs[i] for i in sorted(self.docs)]


class MemoryStore(StoreBackend):
    """In-memory store; the reference model for the journal backend."""

    def __init__(self) -> None:
        self._collections: dict[str, _CollectionState] = {}
        self._lock = threading.Lock()

    def _state(self, collection: str) -> _CollectionState:
        _check_collection(collection)
        with self._lock:
            state = self._collections.get(collection)
            if state is None:
                state = self._collections[collection] = _CollectionState()
            return state

    def insert(self, collection: str, values: dict[str, Any]) -> Document:
        state = self._state(collection)
        with state.lock:
            state.check_unique(values, None, collection)
            now = utc_now_text()
            doc = Document(collection, new_id(), copy.deepcopy(values), now, now)
            state.docs[doc.id] = doc
            state.index_add(doc)
            return doc.copy()

    def get(self, collection: str, doc_id: str) -> Optional[Document]:
        state = self._state(collection)
        with state.lock:
            doc = state.docs.get(doc_id)
            return doc.copy() if doc else None

    def update(self, collection: str, doc_id: str, values: dict[str, Any]) -> Document:
        state = self._state(collection)
        with state.lock:
            doc = state.docs.get(doc_id)
            if doc is None:
                raise NotFound(collection, doc_id)
            state.check_unique(values, doc_id, collection)
            state.index_remove(doc)
            doc.values = copy.deepcopy(values)
            doc.updated_at = max(utc_now_text(), doc.created_at)
            state.index_add(doc)
            return doc.copy()

    def delete(self, collection: str, doc_id: str) -> Document:
        state = self._state(collection)
        with state.lock:
            doc = state.docs.pop(doc_id, None)
            if doc is None:
                raise NotFound(collection, doc_id)
            state.index_remove(doc)
            return doc.copy()

    def scan(
        self,
        collection: str,
        limit: Optional[int] = None,
        start: int = 0,
        filter: Optional[dict[str, Any]] = None,
    ) -> list[Document]:
        state = self._state(collection)
        with state.lock:
            rows = [d.copy() for d in state.ordered() if _match(d, filter)]
        if start:
            rows = rows[start:]
        if limit is not None:
            rows = rows[: max(limit, 0)]
        return rows

    def ensure_unique_index(
        self,
        collection: str,
        field_name: str,
        normalize: Optional[Callable[[Any], Any]] = None,
    ) -> None:
        state = self._state(collection)
        with state.lock:
            if any(ix.field == field_name for ix in state.indexes):
                return
            index = _UniqueIndex(field_name, normalize)
            for doc in state.ordered():
                key = index.key_for(doc.values)
                if key is None:
                    continue
                if key in index.entries:
                    raise UniqueViolation(collection, field_name, doc.values.get(field_name))
                index.entries[key] = doc.id
            state.indexes.append(index)


class JournalStore(StoreBackend):
    """File-backed store: one append-only journal per collection."""

    def __init__(self, data_dir: str | Path, fsync: bool = True):
        self.data_dir = Path(data_dir)
        self.collections_dir = self.data_dir / "collections"
        self.collections_dir.mkdir(parents=True, exist_ok=True)
        self._fsync = fsync
        self._collections: dict[str, _CollectionState] = {}
        self._files: dict[str, Any] = {}
        self._op_counts: dict[str, int] = {}
        self._lock = threading.Lock()

    # -- journal encoding ---------------------------------------------------

    @staticmethod
    def _encode_record(payload: dict[str, Any]) -> bytes:
        body = (json.dumps(payload, separators=(",", ":"), sort_keys=True) + "\n").encode("utf-8")
        return _LEN.pack(len(body)) + body + _LEN.pack(zlib.crc32(body) & 0xFFFFFFFF)

    @staticmethod
    def _iter_records(raw: bytes) -> Iterator[tuple[dict[str, Any], int]]:
        """Yield (payload, end_offset) for every intact record; stop at the
        first torn or corrupt one."""
        pos = 0
        total = len(raw)
        while pos + 4 <= total:
            (length,) = _LEN.unpack_from(raw, pos)
            end = pos + 4 + length + 4
            if length == 0 or end > total:
                return
            body = raw[pos + 4 : pos + 4 + length]
            (crc,) = _LEN.unpack_from(raw, pos + 4 + length)
            if zlib.crc32(body) & 0xFFFFFFFF != crc:
                return
            try:
                payload = json.loads(body.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                return
            yield payload, end
            pos = end

    def _journal_path(self, collection: str) -> Path:
        return self.collections_dir / f"{collection}.journal"

    def _replay(self, collection: str, state: _CollectionState) -> None:
        path = self._journal_path(collection)
        if not path.exists():
            self._op_counts[collection] = 0
            return
        raw = path.read_bytes()
        good_end = 0
        ops = 0
        for payload, end in self._iter_records(raw):
            good_end = end
            ops += 1
            op = payload.get("op")
            if op in ("insert", "update"):
                d = payload["doc"]
                doc = Document(collection, d["id"], d["values"], d["createdAt"], d["updatedAt"])
                if op == "update" and doc.id in state.docs:
                    state.index_remove(state.docs[doc.id])
                state.docs[doc.id] = doc
                state.index_add(doc)
            elif op == "delete":
                doc = state.docs.pop(payload["id"], None)
                if doc is not None:
                    state.index_remove(doc)
        if good_end < len(raw):
            # torn tail from a crash mid-append: drop it
            with open(path, "r+b") as fh:
                fh.truncate(good_end)
                fh.flush()
                os.fsync(fh.fileno())
        self._op_counts[collection] = ops
        if ops >= _COMPACT_MIN_OPS and ops > 2 * len(state.docs):
            self._compact_locked(collection, state)

    def _state(self, collection: str) -> _CollectionState:
        _check_collection(collection)
        with self._lock:
            state = self._collections.get(collection)
            if state is None:
                state = _CollectionState()
                self._replay(collection, state)
                self._collections[collection] = state
            return state

    def _file(self, collection: str):
        fh = self._files.get(collection)
        if fh is None or fh.closed:
            fh = open(self._journal_path(collection), "ab")
            self._files[collection] = fh
        return fh

    def _append(self, collection: str, payload: dict[str, Any]) -> None:
        try:
            fh = self._file(collection)
            fh.write(self._encode_record(payload))
            fh.flush()
            if self._fsync:
                os.fsync(fh.fileno())
        except OSError as exc:
            raise IoFailure(f"journal write failed for {collection!r}: {exc}") from exc
        self._op_counts[collection] = self._op_counts.get(collection, 0) + 1

    @staticmethod
    def _doc_payload(doc: Document) -> dict[str, Any]:
        return {
            "id": doc.id,
            "values": doc.values,
            "createdAt": doc.created_at,
            "updatedAt": doc.updated_at,
        }

    # -- contract operations ------------------------------------------------

    def insert(self, collection: str, values: dict[str, Any]) -> Document:
        state = self._state(collection)
        with state.lock:
            state.check_unique(values, None, collection)
            now = utc_now_text()
            doc = Document(collection, new_id(), copy.deepcopy(values), now, now)
            self._append(collection, {"op": "insert", "doc": self._doc_payload(doc)})
            state.docs[doc.id] = doc
            state.index_add(doc)
            return doc.copy()

    def get(self, collection: str, doc_id: str) -> Optional[Document]:
        state = self._state(collection)
        with state.lock:
            doc = state.docs.get(doc_id)
            return doc.copy() if doc else None

    def update(self, collection: str, doc_id: str, values: dict[str, Any]) -> Document:
        state = self._state(collection)
        with state.lock:
            doc = state.docs.get(doc_id)
            if doc is None:
                raise NotFound(collection, doc_id)
            state.check_unique(values, doc_id, collection)
            updated = Document(
                collection,
                doc.id,
                copy.deepcopy(values),
                doc.created_at,
                max(utc_now_text(), doc.created_at),
            )
            self._append(collection, {"op": "update", "doc": self._doc_payload(updated)})
            state.index_remove(doc)
            state.docs[doc_id] = updated
            state.index_add(updated)
            return updated.copy()

    def delete(self, collection: str, doc_id: str) -> Document:
        state = self._state(collection)
        with state.lock:
            doc = state.docs.get(doc_id)
            if doc is None:
                raise NotFound(collection, doc_id)
            self._append(collection, {"op": "delete", "id": doc_id})
            del state.docs[doc_id]
            state.index_remove(doc)
            return doc.copy()

    def scan(
        self,
        collection: str,
        limit: Optional[int] = None,
        start: int = 0,
        filter: Optional[dict[str, Any]] = None,
    ) -> list[Document]:
        state = self._state(collection)
        with state.lock:
            rows = [d.copy() for d in state.ordered() if _match(d, filter)]
        if start:
            rows = rows[start:]
        if limit is not None:
            rows = rows[: max(limit, 0)]
        return rows

    def ensure_unique_index(
        self,
        collection: str,
        field_name: str,
        normalize: Optional[Callable[[Any], Any]] = None,
    ) -> None:
        state = self._state(collection)
        with state.lock:
            if any(ix.field == field_name for ix in state.indexes):
                return
            index = _UniqueIndex(field_name, normalize)
            for doc in state.ordered():
                key = index.key_for(doc.values)
                if key is None:
                    continue
                if key in index.entries:
                    raise UniqueViolation(collection, field_name, doc.values.get(field_name))
                index.entries[key] = doc.id
            state.indexes.append(index)

    # -- maintenance ----------------------------------------------------------

    def compact(self, collection: str) -> None:
        """Rewrite a journal to hold only the live documents.

        The replacement is built in a temp file and swapped in with rename,
        so readers either see the old journal or the complete new one.
        """
        state = self._state(collection)
        with state.lock:
            self._compact_locked(collection, state)

    def _compact_locked(self, collection: str, state: _CollectionState) -> None:
        path = self._journal_path(collection)
        tmp = path.with_suffix(".journal.tmp")
        try:
            with open(tmp, "wb") as fh:
                for doc in state.ordered():
                    fh.write(self._encode_record({"op": "insert", "doc": self._doc_payload(doc)}))
                fh.flush()
                os.fsync(fh.fileno())
            old = self._files.pop(collection, None)
            if old is not None and not old.closed:
                old.close()
            os.replace(tmp, path)
            dir_fd = os.open(self.collections_dir, os.O_RDONLY)
            try:
                os.fsync(dir_fd)
            finally:
                os.close(dir_fd)
        except OSError as exc:
            raise IoFailure(f"compaction failed for {collection!r}: {exc}") from exc
        self._op_counts[collection] = len(state.docs)

    def close(self) -> None:
        with self._lock:
            for fh in self._files.values():
                if not fh.closed:
                    fh.close()
            self._files.clear()
            self._collections.clear()
