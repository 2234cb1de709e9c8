"""Chunked binary on-disk container for generated datasets.

Layout (fully specified in docs/FORMAT.md):

    container/
      manifest.json        UTF-8, sorted keys; written last (commit marker)
      meta.jsonl           one JSON object per stored record, in index order
      chunks/chunk-%05d.bin

Each chunk holds a fixed number of records back to back as little-endian
float64 payloads followed by a 4-byte little-endian CRC32 of the payload.
Per record:

    e           2*N_r doubles, re/im interleaved per receiver
    e_incident  2*N_r doubles, re/im interleaved per receiver
    target      ceil(H*W/8) bytes, row-major bits, MSB first

All writes are deterministic functions of the record stream: no timestamps,
stable JSON key order, fixed float repr.
"""

import hashlib
import json
import logging
import struct
import zlib
from pathlib import Path
from typing import Iterator, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_RECORDS_PER_CHUNK = 128


class ContainerFormatError(ValueError):
    """Raised for missing/corrupt manifests, chunks, or checksums."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def record_byte_size(n_receivers: int, height: int, width: int) -> int:
    return 32 * n_receivers + (height * width + 7) // 8


def encode_record(
    e: np.ndarray, e_incident: np.ndarray, target: np.ndarray
) -> bytes:
    """Serialize one record; target is a (H, W) array of {0, 1}."""
    parts = []
    for vec in (e, e_incident):
        inter = np.empty(2 * len(vec), dtype="<f8")
        inter[0::2] = vec.real
        inter[1::2] = vec.imag
        parts.append(inter.tobytes())
    parts.append(np.packbits(target.astype(np.uint8), axis=None).tobytes())
    return b"".join(parts)


def decode_record(
    buf: bytes, n_receivers: int, height: int, width: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of encode_record; returns (e, e_incident, target)."""
    vec_bytes = 16 * n_receivers
    vecs = []
    for k in range(2):
        inter = np.frombuffer(buf[k * vec_bytes : (k + 1) * vec_bytes], dtype="<f8")
        vecs.append((inter[0::2] + 1j * inter[1::2]).astype(np.complex128))
    bits = np.frombuffer(buf[2 * vec_bytes :], dtype=np.uint8)
    target = np.unpackbits(bits, count=height * width).reshape(height, width)
    return vecs[0], vecs[1], target


class ContainerWriter:
    """Streams records (in index order) into chunk files, manifest last."""

    def __init__(
        self,
        out_dir,
        header: dict,
        records_per_chunk: int = DEFAULT_RECORDS_PER_CHUNK,
    ):
        self.path = Path(out_dir)
        self.path.mkdir(parents=True, exist_ok=True)
        (self.path / "chunks").mkdir(exist_ok=True)
        self.header = dict(header)
        self.records_per_chunk = records_per_chunk
        self._chunk_buf: list = []
        self._chunk_first_index: Optional[int] = None
        self._chunks: list = []
        self._meta_lines: list = []
        self._skipped: list = []
        self._count = 0
        self._closed = False

    def append(self, index: int, payload: bytes, meta: dict) -> None:
        if self._chunk_first_index is None:
            self._chunk_first_index = index
        self._chunk_buf.append(payload)
        self._meta_lines.append(_dumps(meta))
        self._count += 1
        if len(self._chunk_buf) >= self.records_per_chunk:
            self._flush_chunk()

    def skip(self, index: int, reason: str) -> None:
        self._skipped.append({"index": index, "reason": reason})

    def _flush_chunk(self) -> None:
        if not self._chunk_buf:
            return
        payload = b"".join(self._chunk_buf)
        name = f"chunk-{len(self._chunks):05d}.bin"
        with open(self.path / "chunks" / name, "wb") as f:
            f.write(payload)
            f.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))
        self._chunks.append(
            {
                "file": f"chunks/{name}",
                "first_index": self._chunk_first_index,
                "records": len(self._chunk_buf),
            }
        )
        self._chunk_buf = []
        self._chunk_first_index = None

    def close(self) -> dict:
        """Flush remaining records, write meta.jsonl, then the manifest."""
        if self._closed:
            raise RuntimeError("writer already closed")
        self._flush_chunk()
        meta_text = "".join(line + "\n" for line in self._meta_lines)
        (self.path / "meta.jsonl").write_text(meta_text, encoding="utf-8")
        manifest = dict(self.header)
        manifest.update(
            {
                "format_version": FORMAT_VERSION,
                "record_count": self._count,
                "records_per_chunk": self.records_per_chunk,
                "chunks": self._chunks,
                "skipped": self._skipped,
                "meta_sha256": hashlib.sha256(meta_text.encode()).hexdigest(),
            }
        )
        (self.path / "manifest.json").write_text(
            _dumps(manifest) + "\n", encoding="utf-8"
        )
        self._closed = True
        return manifest


def read_manifest(container_dir) -> dict:
    path = Path(container_dir) / "manifest.json"
    if not path.exists():
        raise ContainerFormatError(f"{container_dir}: manifest.json missing")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ContainerFormatError(f"{path}: corrupt manifest: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerFormatError(
            f"{path}: unsupported format_version {manifest.get('format_version')!r}"
        )
    return manifest


def read_meta(container_dir, manifest: dict) -> list:
    path = Path(container_dir) / "meta.jsonl"
    if not path.exists():
        raise ContainerFormatError(f"{container_dir}: meta.jsonl missing")
    text = path.read_text(encoding="utf-8")
    digest = hashlib.sha256(text.encode()).hexdigest()
    if digest != manifest["meta_sha256"]:
        raise ContainerFormatError(f"{path}: metadata checksum mismatch")
    return [json.loads(line) for line in text.splitlines() if line]


def iter_chunk_records(container_dir, manifest: dict) -> Iterator[bytes]:
    """Yield raw record payloads in index order, verifying chunk CRCs."""
    rec_size = record_byte_size(
        manifest["n_receivers"], manifest["image_height"], manifest["image_width"]
    )
    for chunk in manifest["chunks"]:
        cpath = Path(container_dir) / chunk["file"]
        if not cpath.exists():
            raise ContainerFormatError(f"{cpath}: chunk file missing")
        blob = cpath.read_bytes()
        expected = chunk["records"] * rec_size + 4
        if len(blob) != expected:
            raise ContainerFormatError(
                f"{cpath}: expected {expected} bytes, found {len(blob)} (truncated?)"
            )
        payload, crc_raw = blob[:-4], blob[-4:]
        if zlib.crc32(payload) & 0xFFFFFFFF != struct.unpack("<I", crc_raw)[0]:
            raise ContainerFormatError(f"{cpath}: CRC32 mismatch")
        for k in range(chunk["records"]):
            yield payload[k * rec_size : (k + 1) * rec_size]
