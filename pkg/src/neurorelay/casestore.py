"""Append-only case archives and their sidecar annotation logs.

One case+modality pair maps to one record file of whole 4608-byte epoch
records plus a line-oriented annotation log. Layout on disk:

    <root>/<hospital>/<hospital>_<case>.<mod>       record file
    <root>/<hospital>/<hospital>_<case>.<mod>.log   annotations

Activity is judged by the newest record timestamp inside the file, never by
filesystem mtime, so it is deterministic under a simulated clock.
"""

from __future__ import annotations

import logging
import shutil
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .wirerec import (
    EpochRecord, Modality, RECORD_SIZE, decode_record, encode_record,
)

log = logging.getLogger(__name__)

ACTIVITY_WINDOW_MS = 60 * 60 * 1000
MAX_ANNOTATION_TEXT_BYTES = 4096

MODALITY_SUFFIX = {
    Modality.BAEP: "bap",
    Modality.MEDIAN_SEP: "msp",
    Modality.PERONEAL_SEP: "psp",
    Modality.VEP: "vep",
    Modality.EEG: "eeg",
    Modality.EMG: "emg",
}
SUFFIX_MODALITY = {v: k for k, v in MODALITY_SUFFIX.items()}

AUTHOR_ROLES = ("technologist", "neurophysiologist")


class CaseStoreError(Exception):
    pass


class TimestampRegression(CaseStoreError):
    pass


class PartialNotArchivable(CaseStoreError):
    pass


class TextTooLong(CaseStoreError):
    pass


class RootUnreadable(CaseStoreError):
    pass


class StillActive(CaseStoreError):
    pass


class VerifyMismatch(CaseStoreError):
    pass


@dataclass(frozen=True)
class CaseKey:
    hospital: str
    case_id: str
    modality: Modality

    @property
    def filename(self) -> str:
        return f"{self.hospital}_{self.case_id}.{MODALITY_SUFFIX[self.modality]}"

    def path(self, root: Path | str) -> Path:
        return Path(root) / self.hospital / self.filename

    @property
    def label(self) -> str:
        return f"{self.hospital}_{self.case_id}.{MODALITY_SUFFIX[self.modality]}"

    @classmethod
    def from_path(cls, path: Path) -> "CaseKey":
        stem, _, suffix = path.name.rpartition(".")
        hospital, _, case_id = stem.partition("_")
        if suffix not in SUFFIX_MODALITY or not hospital or not case_id:
            raise CaseStoreError(f"not an archive filename: {path.name}")
        return cls(hospital, case_id, SUFFIX_MODALITY[suffix])


@dataclass(frozen=True)
class Annotation:
    timestamp_ms: int
    author: str
    text: str


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out, i = [], 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"t": "\t", "n": "\n", "\\": "\\"}.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


class CaseArchive:
    """Writer/reader handle for one case+modality.

    `expected_sweeps` is the configured average size for this case: records
    carrying a smaller sweep_count are partial averages and are refused, so
    only completed averages ever reach disk. Continuous modalities use 1.
    """

    def __init__(self, root: Path | str, key: CaseKey, expected_sweeps: int = 1):
        self.root = Path(root)
        self.key = key
        self.expected_sweeps = int(expected_sweeps)
        self.record_path = key.path(self.root)
        self.log_path = self.record_path.with_name(self.record_path.name + ".log")
        self._truncate_torn_tail()

    def _truncate_torn_tail(self) -> None:
        if not self.record_path.exists():
            return
        size = self.record_path.stat().st_size
        torn = size % RECORD_SIZE
        if torn:
            log.warning("truncating torn %d-byte tail of %s", torn, self.record_path)
            with open(self.record_path, "r+b") as f:
                f.truncate(size - torn)

    # -- record file ------------------------------------------------------

    def record_count(self) -> int:
        if not self.record_path.exists():
            return 0
        return self.record_path.stat().st_size // RECORD_SIZE

    def last_timestamp_ms(self) -> int | None:
        n = self.record_count()
        if n == 0:
            return None
        return self.read_record(n - 1).timestamp_ms

    def append(self, rec: EpochRecord) -> None:
        if rec.sweep_count < self.expected_sweeps:
            raise PartialNotArchivable(
                f"sweep_count {rec.sweep_count} < expected {self.expected_sweeps}")
        last = self.last_timestamp_ms()
        if last is not None and rec.timestamp_ms < last:
            raise TimestampRegression(f"{rec.timestamp_ms} < last {last}")
        data = encode_record(rec)
        self.record_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.record_path, "ab") as f:
            f.write(data)
            f.flush()

    def read_record(self, index: int) -> EpochRecord:
        with open(self.record_path, "rb") as f:
            f.seek(index * RECORD_SIZE)
            return decode_record(f.read(RECORD_SIZE))

    def read_range(self, a: int, b: int) -> list[EpochRecord]:
        """Records a..b inclusive, clamped to what exists."""
        n = self.record_count()
        a, b = max(a, 0), min(b, n - 1)
        if n == 0 or a > b:
            return []
        with open(self.record_path, "rb") as f:
            f.seek(a * RECORD_SIZE)
            data = f.read((b - a + 1) * RECORD_SIZE)
        return [decode_record(data[i:i + RECORD_SIZE])
                for i in range(0, len(data), RECORD_SIZE)]

    def read_all(self) -> list[EpochRecord]:
        return self.read_range(0, self.record_count() - 1)

    # -- annotation log ---------------------------------------------------

    def annotate(self, author: str, text: str, now_ms: int) -> None:
        if author not in AUTHOR_ROLES:
            raise CaseStoreError(f"unknown author role {author!r}")
        if len(text.encode("utf-8")) > MAX_ANNOTATION_TEXT_BYTES:
            raise TextTooLong(f"annotation text > {MAX_ANNOTATION_TEXT_BYTES} bytes")
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(f"{int(now_ms)}\t{author}\t{_escape(text)}\n")
            f.flush()

    def annotations(self) -> list[Annotation]:
        if not self.log_path.exists():
            return []
        out = []
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            ts, author, text = line.split("\t", 2)
            out.append(Annotation(int(ts), author, _unescape(text)))
        return out

    def narrative(self) -> list[tuple[int, str, object]]:
        """Annotations and records merged into one time-ordered story.

        Ties break with annotations before records so a note made at the
        instant an average completes reads as context for it.
        """
        entries: list[tuple[int, int, str, object]] = []
        for ann in self.annotations():
            entries.append((ann.timestamp_ms, 0, "annotation", ann))
        for i, rec in enumerate(self.read_all()):
            entries.append((rec.timestamp_ms, 1, "record", (i, rec)))
        entries.sort(key=lambda e: (e[0], e[1]))
        return [(t, kind, payload) for t, _, kind, payload in entries]


@dataclass(frozen=True)
class ActiveCase:
    path: Path
    key: CaseKey
    last_write_ms: int
    record_count: int


def scan_active(root: Path | str, now_ms: int,
                window_ms: int = ACTIVITY_WINDOW_MS) -> list[ActiveCase]:
    """Archives whose newest record is within `window_ms` of now, in
    path-lexicographic order."""
    root = Path(root)
    if not root.is_dir():
        raise RootUnreadable(f"archive root {root} is not a readable directory")
    found = []
    for path in sorted(root.glob("*/*")):
        if path.suffix.lstrip(".") not in SUFFIX_MODALITY:
            continue
        try:
            key = CaseKey.from_path(path)
        except CaseStoreError:
            continue
        archive = CaseArchive(root, key)
        last = archive.last_timestamp_ms()
        if last is None:
            continue
        if now_ms - last <= window_ms:
            found.append(ActiveCase(path, key, last, archive.record_count()))
    return found


@dataclass(frozen=True)
class MigrationReport:
    key: CaseKey
    record_count: int
    record_bytes: int
    log_bytes: int
    checksum_match: bool
    retried: bool


def _default_copier(src: Path, dst: Path) -> None:
    shutil.copyfile(src, dst)


def migrate_to_central(archive: CaseArchive, central_root: Path | str, now_ms: int,
                       window_ms: int = ACTIVITY_WINDOW_MS,
                       copier: Callable[[Path, Path], None] = _default_copier) -> MigrationReport:
    """Copy a closed case to the central store and verify byte-for-byte.

    A mismatching copy is retried once; a second mismatch raises
    VerifyMismatch with the partial copy left in place for inspection.
    """
    last = archive.last_timestamp_ms()
    if last is not None and now_ms - last <= window_ms:
        raise StillActive(f"{archive.key.label} wrote {now_ms - last} ms ago")
    central = Path(central_root)
    dst_rec = archive.key.path(central)
    dst_rec.parent.mkdir(parents=True, exist_ok=True)
    dst_log = dst_rec.with_name(dst_rec.name + ".log")

    retried = False
    for attempt in (1, 2):
        copier(archive.record_path, dst_rec)
        if archive.log_path.exists():
            copier(archive.log_path, dst_log)
        ok = _files_match(archive.record_path, dst_rec) and (
            not archive.log_path.exists() or _files_match(archive.log_path, dst_log))
        if ok:
            break
        if attempt == 2:
            raise VerifyMismatch(f"copy of {archive.key.label} differs after retry")
        retried = True

    return MigrationReport(
        key=archive.key,
        record_count=archive.record_count(),
        record_bytes=archive.record_path.stat().st_size,
        log_bytes=archive.log_path.stat().st_size if archive.log_path.exists() else 0,
        checksum_match=True,
        retried=retried,
    )


def _files_match(a: Path, b: Path) -> bool:
    if a.stat().st_size != b.stat().st_size:
        return False
    return _file_crc(a) == _file_crc(b)


def _file_crc(path: Path) -> int:
    crc = 0
    with open(path, "rb") as f:
        while True:
            chunk = f.read(1 << 16)
            if not chunk:
                return crc
            crc = zlib.crc32(chunk, crc)


def record_iter(path: Path) -> Iterable[EpochRecord]:
    """Decode every whole record in a file, ignoring any torn tail."""
    with open(path, "rb") as f:
        while True:
            chunk = f.read(RECORD_SIZE)
            if len(chunk) < RECORD_SIZE:
                return
            yield decode_record(chunk)
