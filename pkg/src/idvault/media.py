"""Content-addressed storage for uploaded card images.

Blobs land under ``<data-dir>/media/<first-2-hex>/<sha256>``; uploading the
same bytes twice writes one blob. Every upload gets its own metadata document
in the ``media`` collection (filename and mime may legitimately differ per
upload), so asset ids are fresh while the content address is stable.

Pixel dimensions are read straight from the file header (PNG IHDR chunk,
JPEG SOF marker) — no image decoding happens here.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import IdVaultError
from .persistence import StoreBackend

MEDIA_COLLECTION = "media"

ALLOWED_MIME_TYPES = ("image/jpeg", "image/png")

DEFAULT_MAX_BYTES = 10 * 1024 * 1024

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# JPEG start-of-frame markers that carry dimensions (per ITU T.81)
_JPEG_SOF_MARKERS = frozenset(
    [0xC0, 0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF]
)


class MediaError(IdVaultError):
    pass


class UnsupportedMediaType(MediaError):
    def __init__(self, mime_type: str):
        super().__init__(f"mime type {mime_type!r} not allowed (expected one of {ALLOWED_MIME_TYPES})")
        self.mime_type = mime_type


class TooLarge(MediaError):
    def __init__(self, size: int, limit: int):
        super().__init__(f"upload of {size} bytes exceeds limit of {limit} bytes")
        self.size = size
        self.limit = limit


class CorruptImage(MediaError):
    pass


class MediaNotFound(MediaError):
    def __init__(self, media_id: str):
        super().__init__(f"no media asset {media_id!r}")
        self.media_id = media_id


@dataclass
class MediaAsset:
    id: str
    original_filename: str
    mime_type: str
    size_bytes: int
    sha256_hex: str
    width: int
    height: int
    url: str

    def as_json(self) -> dict:
        return {
            "id": self.id,
            "originalFilename": self.original_filename,
            "mimeType": self.mime_type,
            "sizeBytes": self.size_bytes,
            "sha256Hex": self.sha256_hex,
            "width": self.width,
            "height": self.height,
            "url": self.url,
        }


def png_dimensions(data: bytes) -> tuple[int, int]:
    if len(data) < 24 or not data.startswith(_PNG_SIGNATURE) or data[12:16] != b"IHDR":
        raise CorruptImage("not a decodable PNG header")
    width, height = struct.unpack(">II", data[16:24])
    if width == 0 or height == 0:
        raise CorruptImage("PNG header declares zero dimension")
    return width, height


def jpeg_dimensions(data: bytes) -> tuple[int, int]:
    if len(data) < 4 or data[0:2] != b"\xff\xd8":
        raise CorruptImage("not a decodable JPEG header")
    pos = 2
    total = len(data)
    while pos + 4 <= total:
        if data[pos] != 0xFF:
            raise CorruptImage("JPEG marker expected")
        marker = data[pos + 1]
        if marker == 0xD8 or 0xD0 <= marker <= 0xD7:  # standalone markers
            pos += 2
            continue
        (seg_len,) = struct.unpack(">H", data[pos + 2 : pos + 4])
        if seg_len < 2:
            raise CorruptImage("JPEG segment length invalid")
        if marker in _JPEG_SOF_MARKERS:
            if pos + 9 > total:
                break
            height, width = struct.unpack(">HH", data[pos + 5 : pos + 9])
            if width == 0 or height == 0:
                raise CorruptImage("JPEG frame declares zero dimension")
            return width, height
        pos += 2 + seg_len
    raise CorruptImage("no JPEG frame header found")


def image_dimensions(data: bytes, mime_type: str) -> tuple[int, int]:
    if mime_type == "image/png":
        return png_dimensions(data)
    if mime_type == "image/jpeg":
        return jpeg_dimensions(data)
    raise UnsupportedMediaType(mime_type)


class MediaStore:
    def __init__(self, data_dir: str | Path, store: StoreBackend, max_bytes: int = DEFAULT_MAX_BYTES):
        self.media_dir = Path(data_dir) / "media"
        self.media_dir.mkdir(parents=True, exist_ok=True)
        self.store = store
        self.max_bytes = max_bytes

    def _blob_path(self, sha256_hex: str) -> Path:
        return self.media_dir / sha256_hex[:2] / sha256_hex

    def store_media(self, data: bytes, original_filename: str, mime_type: str) -> MediaAsset:
        if mime_type not in ALLOWED_MIME_TYPES:
            raise UnsupportedMediaType(mime_type)
        if len(data) == 0:
            raise CorruptImage("empty upload")
        if len(data) > self.max_bytes:
            raise TooLarge(len(data), self.max_bytes)
        width, height = image_dimensions(data, mime_type)
        sha = hashlib.sha256(data).hexdigest()
        blob = self._blob_path(sha)
        if not blob.exists():
            blob.parent.mkdir(parents=True, exist_ok=True)
            tmp = blob.with_name(blob.name + ".tmp")
            with open(tmp, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, blob)
        doc = self.store.insert(
            MEDIA_COLLECTION,
            {
                "originalFilename": original_filename,
                "mimeType": mime_type,
                "sizeBytes": len(data),
                "sha256Hex": sha,
                "width": width,
                "height": height,
            },
        )
        return self._asset(doc.id, doc.values)

    def _asset(self, asset_id: str, values: dict) -> MediaAsset:
        return MediaAsset(
            id=asset_id,
            original_filename=values["originalFilename"],
            mime_type=values["mimeType"],
            size_bytes=values["sizeBytes"],
            sha256_hex=values["sha256Hex"],
            width=values["width"],
            height=values["height"],
            url=f"/media/{asset_id}",
        )

    def get_asset(self, asset_id: str) -> Optional[MediaAsset]:
        doc = self.store.get(MEDIA_COLLECTION, asset_id)
        if doc is None:
            return None
        return self._asset(doc.id, doc.values)

    def load_media(self, asset_id: str) -> bytes:
        asset = self.get_asset(asset_id)
        if asset is None:
            raise MediaNotFound(asset_id)
        blob = self._blob_path(asset.sha256_hex)
        try:
            return blob.read_bytes()
        except OSError as exc:
            raise MediaNotFound(asset_id) from exc
