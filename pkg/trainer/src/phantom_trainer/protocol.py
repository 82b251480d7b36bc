"""Reader for the HYBA batch-stream wire format.

Implemented from the wire format alone (little-endian fixed-width
fields), independently of the producer's codebase, so the protocol gets
cross-validated at this boundary:

    header:  "HYBA" | version u16 | metadata_len u32 | metadata JSON
    frame:   epoch u32 | batch u32 | count u16 | h u16 | w u16 | payload
    payload: count * (label byte + h*w intensity bytes)
    end:     epoch == 0xFFFFFFFF and count == 0
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator

import numpy as np

MAGIC = b"HYBA"
SUPPORTED_VERSION = 1
END_EPOCH = 0xFFFFFFFF

_HEADER = struct.Struct("<4sHI")
_FRAME = struct.Struct("<IIHHH")


class ProtocolError(Exception):
    """Malformed stream; carries the byte offset where parsing stopped."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


@dataclass(frozen=True)
class Header:
    classes: tuple[str, ...]
    image_height: int
    image_width: int
    strategy: str
    seed: int
    epochs: int
    batch_size: int


@dataclass
class Frame:
    epoch: int
    batch_index: int
    labels: np.ndarray  # (count,) uint8
    images: np.ndarray  # (count, h, w) uint8


class StreamReader:
    """Sequential frame reader over a binary file object (file, pipe, socket)."""

    def __init__(self, fp: BinaryIO):
        self._fp = fp
        self._offset = 0
        self.header = self._read_header()

    def _read_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining > 0:
            chunk = self._fp.read(remaining)
            if not chunk:
                raise ProtocolError("unexpected end of stream", self._offset)
            chunks.append(chunk)
            remaining -= len(chunk)
            self._offset += len(chunk)
        return b"".join(chunks)

    def _read_header(self) -> Header:
        magic, version, meta_len = _HEADER.unpack(self._read_exact(_HEADER.size))
        if magic != MAGIC:
            raise ProtocolError(f"bad magic {magic!r}", 0)
        if version != SUPPORTED_VERSION:
            raise ProtocolError(f"unsupported version {version}", 4)
        meta = json.loads(self._read_exact(meta_len).decode("utf-8"))
        return Header(
            classes=tuple(meta["classes"]),
            image_height=int(meta["image_height"]),
            image_width=int(meta["image_width"]),
            strategy=str(meta["strategy"]),
            seed=int(meta["seed"]),
            epochs=int(meta["epochs"]),
            batch_size=int(meta["batch_size"]),
        )

    def frames(self) -> Iterator[Frame]:
        """Yield frames in order until (and excluding) the end sentinel."""
        while True:
            epoch, batch_index, count, h, w = _FRAME.unpack(
                self._read_exact(_FRAME.size)
            )
            if epoch == END_EPOCH and count == 0:
                return
            payload = self._read_exact(count * (1 + h * w))
            labels = np.empty(count, dtype=np.uint8)
            images = np.empty((count, h, w), dtype=np.uint8)
            pos = 0
            stride = h * w
            for i in range(count):
                labels[i] = payload[pos]
                pos += 1
                images[i] = np.frombuffer(
                    payload, dtype=np.uint8, count=stride, offset=pos
                ).reshape(h, w)
                pos += stride
            yield Frame(epoch, batch_index, labels, images)

    def drain(self) -> None:
        """Consume remaining frames without decoding payloads."""
        while True:
            epoch, _, count, h, w = _FRAME.unpack(self._read_exact(_FRAME.size))
            if epoch == END_EPOCH and count == 0:
                return
            self._read_exact(count * (1 + h * w))
