"""Bit-exact batch streaming over a byte channel.

Wire format (all integers little-endian, fixed width):

    header:  magic "HYBA" | version u16 | metadata_len u32 | metadata JSON
    frame:   epoch u32 | batch_index u32 | count u16 | height u16 | width u16
             | count * (label byte + height*width intensity bytes)
    end:     a frame with epoch = 0xFFFFFFFF and count = 0

Metadata carries {classes, image_height, image_width, strategy, seed,
epochs, batch_size}; label bytes index the metadata class list. The
stream for a given (manifest, strategy, seed, epochs) is byte-identical
regardless of producer parallelism.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import BinaryIO, Callable, Iterator, Mapping

import numpy as np

from .corpus import CLASS_LABELS, ImageRecord, Manifest
from .errors import (
    BadMagicError,
    DataError,
    DimensionMismatchError,
    TruncatedError,
    VersionUnsupportedError,
)
from .sampler import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_IMAGE_SIZE,
    Strategy,
    build_epoch_schedule,
    realize_batch,
)
from .synthesis import TemplatePool
from .tradaug import TradAugConfig

MAGIC = b"HYBA"
VERSION = 1
END_EPOCH = 0xFFFFFFFF

_HEADER_FIXED = struct.Struct("<4sHI")
_FRAME_FIXED = struct.Struct("<IIHHH")
FRAME_FIXED_SIZE = _FRAME_FIXED.size  # 14 bytes


@dataclass(frozen=True)
class StreamHeader:
    classes: tuple[str, ...]
    image_height: int
    image_width: int
    strategy: str
    seed: int
    epochs: int
    batch_size: int

    def __post_init__(self):
        if len(self.classes) != 6:
            raise DataError(f"header needs 6 classes, got {len(self.classes)}")

    def metadata(self) -> dict:
        return {
            "classes": list(self.classes),
            "image_height": self.image_height,
            "image_width": self.image_width,
            "strategy": self.strategy,
            "seed": self.seed,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
        }


@dataclass
class BatchFrame:
    epoch: int
    batch_index: int
    labels: np.ndarray  # (count,) uint8 indices into the header class list
    images: np.ndarray  # (count, height, width) uint8

    @property
    def count(self) -> int:
        return int(self.labels.shape[0])

    @property
    def is_end(self) -> bool:
        return self.epoch == END_EPOCH and self.count == 0


def encode_header(header: StreamHeader) -> bytes:
    meta = json.dumps(header.metadata(), sort_keys=True).encode("utf-8")
    return _HEADER_FIXED.pack(MAGIC, VERSION, len(meta)) + meta


def decode_header(buf: bytes, offset: int = 0) -> tuple[StreamHeader, int]:
    if len(buf) - offset < _HEADER_FIXED.size:
        raise TruncatedError(len(buf), "incomplete stream header")
    magic, version, meta_len = _HEADER_FIXED.unpack_from(buf, offset)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionUnsupportedError(f"unsupported stream version {version}")
    start = offset + _HEADER_FIXED.size
    if len(buf) < start + meta_len:
        raise TruncatedError(len(buf), "incomplete header metadata")
    meta = json.loads(buf[start : start + meta_len].decode("utf-8"))
    header = StreamHeader(
        classes=tuple(meta["classes"]),
        image_height=int(meta["image_height"]),
        image_width=int(meta["image_width"]),
        strategy=str(meta["strategy"]),
        seed=int(meta["seed"]),
        epochs=int(meta["epochs"]),
        batch_size=int(meta["batch_size"]),
    )
    return header, start + meta_len


def frame_length(count: int, height: int, width: int) -> int:
    return FRAME_FIXED_SIZE + count * (1 + height * width)


def encode_frame(frame: BatchFrame) -> bytes:
    """Encode one batch frame; images must share one height and width."""
    images = np.asarray(frame.images, dtype=np.uint8)
    labels = np.asarray(frame.labels, dtype=np.uint8)
    if images.ndim != 3:
        raise DimensionMismatchError("images must be (count, height, width)")
    count, height, width = images.shape
    if labels.shape != (count,):
        raise DimensionMismatchError("one label byte per image required")
    if count < 1:
        raise DataError("frame must contain at least one image")
    if count > 0xFFFF or height > 0xFFFF or width > 0xFFFF:
        raise DataError("frame field exceeds u16 range")
    payload = bytearray()
    for i in range(count):
        payload.append(int(labels[i]))
        payload.extend(images[i].tobytes())
    return (
        _FRAME_FIXED.pack(frame.epoch, frame.batch_index, count, height, width)
        + bytes(payload)
    )


def encode_end_frame(height: int = 0, width: int = 0) -> bytes:
    return _FRAME_FIXED.pack(END_EPOCH, 0, 0, height, width)


def decode_frame(buf: bytes, offset: int = 0) -> tuple[BatchFrame, int]:
    """Decode one frame starting at `offset`; trailing bytes are untouched.

    Returns (frame, next_offset). Raises TruncatedError (with the stream
    byte offset) when the buffer ends mid-frame.
    """
    if len(buf) - offset < FRAME_FIXED_SIZE:
        raise TruncatedError(len(buf), "incomplete frame header")
    epoch, batch_index, count, height, width = _FRAME_FIXED.unpack_from(buf, offset)
    start = offset + FRAME_FIXED_SIZE
    need = count * (1 + height * width)
    if len(buf) < start + need:
        raise TruncatedError(len(buf), "incomplete frame payload")
    labels = np.empty(count, dtype=np.uint8)
    images = np.empty((count, height, width), dtype=np.uint8)
    pos = start
    stride = height * width
    for i in range(count):
        labels[i] = buf[pos]
        pos += 1
        images[i] = np.frombuffer(buf, dtype=np.uint8, count=stride, offset=pos).reshape(
            height, width
        )
        pos += stride
    return BatchFrame(epoch, batch_index, labels, images), pos


def read_header(fp: BinaryIO) -> StreamHeader:
    fixed = fp.read(_HEADER_FIXED.size)
    if len(fixed) < _HEADER_FIXED.size:
        raise TruncatedError(len(fixed), "incomplete stream header")
    magic, version, meta_len = _HEADER_FIXED.unpack(fixed)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionUnsupportedError(f"unsupported stream version {version}")
    meta = fp.read(meta_len)
    if len(meta) < meta_len:
        raise TruncatedError(_HEADER_FIXED.size + len(meta), "incomplete metadata")
    header, _ = decode_header(fixed + meta)
    return header


def read_frames(fp: BinaryIO) -> Iterator[BatchFrame]:
    """Yield frames until (and excluding) the end sentinel."""
    while True:
        fixed = fp.read(FRAME_FIXED_SIZE)
        if len(fixed) < FRAME_FIXED_SIZE:
            raise TruncatedError(len(fixed), "incomplete frame header")
        epoch, batch_index, count, height, width = _FRAME_FIXED.unpack(fixed)
        need = count * (1 + height * width)
        payload = fp.read(need)
        if len(payload) < need:
            raise TruncatedError(FRAME_FIXED_SIZE + len(payload), "incomplete payload")
        frame, _ = decode_frame(fixed + payload)
        if frame.is_end:
            return
        yield frame


def serve(
    manifest: Manifest,
    pools: TemplatePool,
    image_loader: Callable[[ImageRecord], np.ndarray],
    eligibility: Mapping[str, bool],
    strategy: Strategy,
    seed: int,
    epochs: int,
    sink: BinaryIO,
    batch_size: int = DEFAULT_BATCH_SIZE,
    image_size: int = DEFAULT_IMAGE_SIZE,
    tradaug_cfg: TradAugConfig | None = None,
    threads: int = 1,
) -> int:
    """Write header, all epoch frames in order, then the end sentinel.

    Returns the number of batch frames written. Batch realization may be
    parallel, but frames are emitted strictly in (epoch, batch_index)
    order and the byte stream is independent of `threads`.
    """
    if epochs < 0:
        raise DataError(f"epochs must be >= 0, got {epochs}")
    if threads < 1:
        raise DataError(f"threads must be >= 1, got {threads}")
    cfg = tradaug_cfg or TradAugConfig()
    header = StreamHeader(
        classes=CLASS_LABELS,
        image_height=image_size,
        image_width=image_size,
        strategy=strategy.value,
        seed=seed,
        epochs=epochs,
        batch_size=batch_size,
    )
    sink.write(encode_header(header))
    label_byte = {lbl: i for i, lbl in enumerate(CLASS_LABELS)}
    records_by_id = manifest.by_id()

    def realize_one(args: tuple[int, int, list]) -> bytes:
        epoch, batch_index, batch = args
        items = realize_batch(
            batch,
            records_by_id,
            image_loader,
            pools,
            cfg,
            seed,
            epoch,
            batch_index,
            image_size,
        )
        images = np.stack([img for img, _ in items])
        labels = np.array([label_byte[lbl] for _, lbl in items], dtype=np.uint8)
        return encode_frame(BatchFrame(epoch, batch_index, labels, images))

    frames_written = 0
    for epoch in range(epochs):
        schedule = build_epoch_schedule(
            manifest, eligibility, strategy, seed, epoch, batch_size
        )
        jobs = [(epoch, i, batch) for i, batch in enumerate(schedule.batches)]
        if threads == 1:
            encoded = map(realize_one, jobs)
            for blob in encoded:
                sink.write(blob)
                frames_written += 1
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for blob in pool.map(realize_one, jobs):
                    sink.write(blob)
                    frames_written += 1
    sink.write(encode_end_frame(image_size, image_size))
    sink.flush()
    return frames_written
