"""Low-level disk measurements: raw read/write speed and block-size
copy sweeps, optionally with direct (cache-bypassing) I/O.

The benchmark exists to measure the whole-dataset copy time that feeds
the runtime model's calibration; absolute numbers are machine-dependent
and never asserted. Each block size gets a freshly written source file so
one measurement's page-cache residue doesn't flatter the next.
"""

from __future__ import annotations

import hashlib
import mmap
import os
import shutil
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BadArguments, DiskFull, IoFailure

# Single transfers above 1 GiB are capped and chunked internally; very
# large reads are exactly where plain read() calls start failing.
MAX_TRANSFER_BYTES = 1 << 30

DEFAULT_BLOCK_SIZES = tuple(mb << 20 for mb in (2, 8, 32, 128, 512, 1024))

_MB = 1e6


@dataclass
class CopyMeasurement:
    block_bytes: int
    seconds: float
    mbps: float
    transfers: int
    direct_io: bool
    capped_transfer_bytes: int | None = None
    warnings: list[str] = field(default_factory=list)


@dataclass
class BenchRow:
    block_bytes: int
    copy_seconds: float | None
    copy_mbps: float | None
    read_mbps: float | None
    write_mbps: float | None
    transfers: int | None
    direct_io: bool
    capped_transfer_bytes: int | None = None
    warnings: list[str] = field(default_factory=list)
    error: str | None = None


@dataclass
class IoBenchReport:
    file_bytes: int
    direct_io: bool
    rows: list[BenchRow]
    annotation: str = ""

    def validate(self) -> None:
        """Self-check: throughput times elapsed must reproduce the bytes."""
        for row in self.rows:
            if row.error or row.copy_seconds is None:
                continue
            implied = row.copy_mbps * _MB * row.copy_seconds
            if abs(implied - self.file_bytes) > 0.001 * self.file_bytes:
                raise BadArguments(
                    f"inconsistent row for block {row.block_bytes}: "
                    f"{row.copy_mbps} MB/s x {row.copy_seconds} s != "
                    f"{self.file_bytes} bytes"
                )

    def to_csv(self) -> str:
        lines = ["block_bytes,seconds,mbps"]
        for row in self.rows:
            if row.error:
                lines.append(f"{row.block_bytes},,")
            else:
                lines.append(
                    f"{row.block_bytes},{row.copy_seconds:.6f},{row.copy_mbps:.3f}"
                )
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        header = (
            f"{'block':>12} {'copy s':>10} {'copy MB/s':>10} "
            f"{'read MB/s':>10} {'write MB/s':>10}"
        )
        lines = [
            f"file size: {self.file_bytes} bytes, "
            f"direct I/O {'on' if self.direct_io else 'off'}",
            header,
        ]
        for row in self.rows:
            if row.error:
                lines.append(f"{row.block_bytes:>12} failed: {row.error}")
                continue

            def fmt(v):
                return f"{v:>10.2f}" if v is not None else f"{'-':>10}"

            lines.append(
                f"{row.block_bytes:>12} {row.copy_seconds:>10.3f} "
                f"{fmt(row.copy_mbps)} {fmt(row.read_mbps)} {fmt(row.write_mbps)}"
            )
            for w in row.warnings:
                lines.append(f"{'':>12} note: {w}")
        if self.annotation:
            lines.append(self.annotation)
        return "\n".join(lines) + "\n"


class _Files:
    """Open/read/write helper that hides the direct-I/O fallback."""

    def __init__(self, direct: bool):
        self.direct = direct
        self.warnings: list[str] = []

    def open_read(self, path: str) -> int:
        return self._open(path, os.O_RDONLY)

    def open_write(self, path: str) -> int:
        return self._open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC)

    def _open(self, path: str, flags: int) -> int:
        if self.direct and hasattr(os, "O_DIRECT"):
            try:
                return os.open(path, flags | os.O_DIRECT)
            except OSError as exc:
                self.direct = False
                self.warnings.append(
                    f"direct I/O unavailable ({exc}); fell back to buffered"
                )
        elif self.direct:
            self.direct = False
            self.warnings.append(
                "direct I/O not supported on this platform; fell back to buffered"
            )
        try:
            return os.open(path, flags)
        except OSError as exc:
            raise IoFailure(f"open {path}: {exc}") from exc


def _alloc_buffer(nbytes: int) -> mmap.mmap:
    # mmap gives page-aligned memory, satisfying O_DIRECT's buffer rule.
    return mmap.mmap(-1, nbytes)


def _fill_source(path: str, nbytes: int, seed: int) -> None:
    """Write ``nbytes`` of seeded pseudorandom data and fsync it."""
    rng = np.random.default_rng(seed)
    chunk = min(nbytes, 8 << 20)
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC)
    try:
        remaining = nbytes
        while remaining:
            step = min(chunk, remaining)
            os.write(fd, rng.bytes(step))
            remaining -= step
        os.fsync(fd)
    finally:
        os.close(fd)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while True:
            chunk = f.read(8 << 20)
            if not chunk:
                break
            h.update(chunk)
    return h.hexdigest()


def _check_scratch(directory: str, needed: int) -> None:
    free = shutil.disk_usage(directory).free
    if free < needed:
        raise DiskFull(
            f"{directory}: need {needed} bytes of scratch, only {free} free"
        )


def measure_copy(
    directory: str,
    file_bytes: int,
    block_bytes: int,
    direct_io: bool = False,
    seed: int | None = None,
) -> CopyMeasurement:
    """Copy a freshly written file block-by-block and time it.

    The clock covers the block loop plus the final durability flush. The
    copy is checksum-verified against the source after the clock stops;
    both files are deleted before returning.
    """
    if file_bytes < 1 or block_bytes < 1:
        raise BadArguments("file_bytes and block_bytes must be positive")
    _check_scratch(directory, 2 * file_bytes)
    if seed is None:
        seed = int.from_bytes(os.urandom(4), "little")
    src = os.path.join(directory, f"iobench_src_{block_bytes}_{os.getpid()}.bin")
    dst = os.path.join(directory, f"iobench_dst_{block_bytes}_{os.getpid()}.bin")
    transfer = min(block_bytes, MAX_TRANSFER_BYTES)
    capped = transfer if transfer != block_bytes else None
    files = _Files(direct_io)
    try:
        _fill_source(src, file_bytes, seed)
        buf = _alloc_buffer(transfer)
        view = memoryview(buf)
        started = time.perf_counter()
        rfd = files.open_read(src)
        wfd = files.open_write(dst)
        try:
            remaining = file_bytes
            while remaining:
                step = min(transfer, remaining)
                got = os.readv(rfd, [view[:step]])
                if got <= 0:
                    raise IoFailure(
                        f"read returned {got} at byte {file_bytes - remaining}"
                    )
                written = os.writev(wfd, [view[:got]])
                if written != got:
                    raise IoFailure(
                        f"short write at byte {file_bytes - remaining}"
                    )
                remaining -= got
            os.fsync(wfd)
        finally:
            os.close(rfd)
            os.close(wfd)
        seconds = time.perf_counter() - started
        if _sha256(src) != _sha256(dst):
            raise IoFailure(f"copy of {src} is not byte-identical")
        transfers = -(-file_bytes // block_bytes)  # ceil
        return CopyMeasurement(
            block_bytes=block_bytes,
            seconds=seconds,
            mbps=file_bytes / seconds / _MB,
            transfers=transfers,
            direct_io=files.direct,
            capped_transfer_bytes=capped,
            warnings=files.warnings,
        )
    finally:
        for path in (src, dst):
            try:
                os.unlink(path)
            except OSError:
                pass


def _measure_read(directory: str, file_bytes: int, block_bytes: int,
                  direct_io: bool, seed: int) -> tuple[float, list[str]]:
    """dd-style read speed: stream a fresh file to nowhere."""
    path = os.path.join(directory, f"iobench_rd_{block_bytes}_{os.getpid()}.bin")
    transfer = min(block_bytes, MAX_TRANSFER_BYTES)
    files = _Files(direct_io)
    try:
        _fill_source(path, file_bytes, seed)
        buf = _alloc_buffer(transfer)
        view = memoryview(buf)
        started = time.perf_counter()
        fd = files.open_read(path)
        try:
            remaining = file_bytes
            while remaining:
                got = os.readv(fd, [view[: min(transfer, remaining)]])
                if got <= 0:
                    raise IoFailure(f"read returned {got}")
                remaining -= got
        finally:
            os.close(fd)
        seconds = time.perf_counter() - started
        return file_bytes / seconds / _MB, files.warnings
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass


def _measure_write(directory: str, file_bytes: int, block_bytes: int,
                   direct_io: bool) -> tuple[float, list[str]]:
    """dd-style write speed: pattern blocks plus a final fdatasync."""
    path = os.path.join(directory, f"iobench_wr_{block_bytes}_{os.getpid()}.bin")
    transfer = min(block_bytes, MAX_TRANSFER_BYTES)
    files = _Files(direct_io)
    try:
        buf = _alloc_buffer(transfer)
        buf.write(b"\xa5" * transfer)
        view = memoryview(buf)
        started = time.perf_counter()
        fd = files.open_write(path)
        try:
            remaining = file_bytes
            while remaining:
                step = min(transfer, remaining)
                written = os.writev(fd, [view[:step]])
                if written != step:
                    raise IoFailure("short write")
                remaining -= step
            os.fsync(fd)
        finally:
            os.close(fd)
        seconds = time.perf_counter() - started
        return file_bytes / seconds / _MB, files.warnings
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass


def sweep(
    directory: str,
    file_bytes: int,
    block_sizes: list[int] | tuple[int, ...] = DEFAULT_BLOCK_SIZES,
    direct_io: bool = False,
    seed: int | None = None,
    measure_raw: bool = True,
) -> IoBenchReport:
    """Run the copy measurement per block size; failures don't abort the
    sweep, they land in the row's error field."""
    sizes = list(dict.fromkeys(block_sizes))  # dedupe, keep order
    if not sizes:
        raise BadArguments("block size list is empty")
    if file_bytes < 1:
        raise BadArguments("file_bytes must be positive")
    if seed is None:
        seed = int.from_bytes(os.urandom(4), "little")
    rows = []
    for i, block in enumerate(sizes):
        try:
            copy = measure_copy(directory, file_bytes, block, direct_io,
                                seed=seed + 3 * i)
            read_mbps = write_mbps = None
            warnings = list(copy.warnings)
            if measure_raw:
                read_mbps, rw = _measure_read(
                    directory, file_bytes, block, direct_io, seed + 3 * i + 1
                )
                write_mbps, ww = _measure_write(
                    directory, file_bytes, block, direct_io
                )
                warnings += [w for w in rw + ww if w not in warnings]
            rows.append(
                BenchRow(
                    block_bytes=block,
                    copy_seconds=copy.seconds,
                    copy_mbps=copy.mbps,
                    read_mbps=read_mbps,
                    write_mbps=write_mbps,
                    transfers=copy.transfers,
                    direct_io=copy.direct_io,
                    capped_transfer_bytes=copy.capped_transfer_bytes,
                    warnings=warnings,
                )
            )
        except (OSError, IoFailure, DiskFull) as exc:
            rows.append(
                BenchRow(
                    block_bytes=block,
                    copy_seconds=None,
                    copy_mbps=None,
                    read_mbps=None,
                    write_mbps=None,
                    transfers=None,
                    direct_io=direct_io,
                    error=str(exc),
                )
            )
    report = IoBenchReport(
        file_bytes=file_bytes,
        direct_io=direct_io,
        rows=rows,
        annotation=_trend_note(rows),
    )
    report.validate()
    return report


def _trend_note(rows: list[BenchRow]) -> str:
    ok = [r for r in rows if r.error is None and r.copy_seconds is not None]
    if len(ok) < 2:
        return ""
    first, last = ok[0], ok[-1]
    if last.copy_seconds < first.copy_seconds:
        return (
            f"copy time decreased from {first.copy_seconds:.3f}s "
            f"@ {first.block_bytes}B blocks to {last.copy_seconds:.3f}s "
            f"@ {last.block_bytes}B blocks"
        )
    return (
        f"no copy-time improvement from larger blocks on this host "
        f"({first.copy_seconds:.3f}s -> {last.copy_seconds:.3f}s)"
    )
