"""Result serialization: JSON records, CSV tables, JSON lines and golden hex dumps."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from google.protobuf import json_format

from fsm_wiretap.data_models import PowerAllocation
from fsm_wiretap.proto import CapacityRecord, Params, RegionPoint, RunReportRecord

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    import google.protobuf.message

    from fsm_wiretap.data_models import CapacityResult, RegionBoundary, RunReport, SweepRecord

logger = logging.getLogger(__name__)

GOLDEN_HEADER = "fsm-wiretap golden vector v1"
CHECKSUM_SIZE = 2
CRC_POLY = 0x1021
CRC_INIT = 0xFFFF


def _crc_table() -> tuple[int, ...]:
    table = []
    for byte in range(256):
        value = byte << 8
        for _ in range(8):
            value = (value << 1) ^ CRC_POLY if value & 0x8000 else value << 1
        table.append(value & 0xFFFF)
    return tuple(table)


_CRC_TABLE = _crc_table()


def crc16_ccitt(data: bytes, crc: int = CRC_INIT) -> int:
    """CRC-16/CCITT-FALSE of ``data``, continuing from ``crc``."""
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ byte]
    return crc


def params_hash(params: dict[str, Any]) -> str:
    """Short stable digest of a parameter dictionary."""
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _params(params: dict[str, Any]) -> Params:
    message = Params()
    for key, value in params.items():
        if isinstance(value, bool | int | float):
            message.values[key] = float(value)
        else:
            message.labels[key] = str(value)
    return message


def capacity_record(result: CapacityResult, params: dict[str, Any]) -> CapacityRecord:
    """Protobuf record for one capacity evaluation."""
    allocation = result.argmax.p if isinstance(result.argmax, PowerAllocation) else result.argmax.laws
    return CapacityRecord(
        params=_params(params),
        d=result.d,
        value_bits=result.value,
        allocation=np.ravel(allocation).tolist(),
        per_state_terms=np.ravel(result.per_state_terms).tolist(),
        kind=result.kind,
        feedback=result.feedback,
        flagged=result.flagged,
        clamped=result.clamped,
    )


def run_report_record(report: RunReport, params: dict[str, Any]) -> RunReportRecord:
    """Protobuf record for one codec experiment."""
    return RunReportRecord(
        params=_params(params),
        error_rate=report.error_rate,
        equivocation=report.equivocation,
        unkeyed_equivocation=report.unkeyed_equivocation,
        analytic_target=report.analytic_target,
        message_rate=report.message_rate,
        key_rate=report.key_rate,
        blocks=report.blocks,
        keyed_blocks=report.keyed_blocks,
        feedback=report.feedback,
    )


def region_points(boundary: RegionBoundary, params: dict[str, Any]) -> list[RegionPoint]:
    """One protobuf point per boundary vertex, tagged with the parameter hash."""
    digest = params_hash(params)
    return [
        RegionPoint(rate=p.r, equivocation=p.re, kind=boundary.kind, params_hash=digest) for p in boundary.points
    ]


def to_json(message: google.protobuf.message.Message) -> str:
    """Deterministic JSON text: sorted keys, field names as declared."""
    return json_format.MessageToJson(
        message,
        preserving_proto_field_name=True,
        always_print_fields_with_no_presence=True,
        sort_keys=True,
        indent=2,
    )


def write_json(path: Path, message: google.protobuf.message.Message) -> None:
    """Write one record as UTF-8 JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(message) + "\n", encoding="utf-8")


def append_jsonl(path: Path, message: google.protobuf.message.Message) -> None:
    """Append one compact JSON line."""
    payload = json_format.MessageToDict(
        message,
        preserving_proto_field_name=True,
        always_print_fields_with_no_presence=True,
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8", newline="\n") as handle:
        handle.write(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Comma-separated table with a header row and LF endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _cell(value: Any) -> Any:  # noqa: ANN401
    if isinstance(value, float):
        return repr(value)
    return value


def region_csv(path: Path, boundaries: Sequence[RegionBoundary], params: dict[str, Any]) -> None:
    """Boundary vertices with columns R, Re, kind, params_hash."""
    rows = [
        (_cell(p.rate), _cell(p.equivocation), p.kind, p.params_hash)
        for boundary in boundaries
        for p in region_points(boundary, params)
    ]
    write_csv(path, ("R", "Re", "kind", "params_hash"), rows)


def capacity_csv(path: Path, result: CapacityResult, params: dict[str, Any]) -> None:
    """Single-row capacity table."""
    columns = ("d", "kind", "value_bits", "flagged", "clamped")
    names = sorted(n for n in params if n not in columns)
    header = (*names, *columns)
    row = (
        *(_cell(params[n]) for n in names),
        result.d,
        result.kind,
        _cell(result.value),
        result.flagged,
        result.clamped,
    )
    write_csv(path, header, [row])


def sweep_csv(path: Path, records: Sequence[SweepRecord]) -> None:
    """One row per grid point; every parameter gets its own column."""
    names: list[str] = []
    for record in records:
        names.extend(n for n in record.params if n not in names)
    header = ("index", *names, "value_bits", "flagged", "error")
    rows = [
        (
            r.index,
            *(_cell(r.params.get(n, "")) for n in names),
            "" if r.value is None else _cell(r.value),
            r.flagged,
            r.error or "",
        )
        for r in records
    ]
    write_csv(path, header, rows)


def golden_dump(symbols: Sequence[int], seed: int) -> str:
    """Hex dump of a symbol block with the seed and a CRC-16/CCITT line."""
    body = bytes(int(s) for s in symbols)
    header = f"{GOLDEN_HEADER}\nseed: {seed}\nlength: {len(body)}\n"
    hex_line = f"symbols: {body.hex()}\n"
    checksum = crc16_ccitt((header + hex_line).encode("utf-8"))
    return f"{header}{hex_line}crc16: {checksum:0{2 * CHECKSUM_SIZE}x}\n"


def golden_load(text: str) -> tuple[int, list[int]] | None:
    """Parse a golden dump; None when the header, length or checksum do not match."""
    lines = text.splitlines()
    if len(lines) != 5 or lines[0] != GOLDEN_HEADER:  # noqa: PLR2004
        return None
    try:
        seed = int(lines[1].removeprefix("seed: "))
        length = int(lines[2].removeprefix("length: "))
        body = bytes.fromhex(lines[3].removeprefix("symbols: "))
        checksum_in = int(lines[4].removeprefix("crc16: "), 16)
    except ValueError:
        return None
    covered = "\n".join(lines[:4]) + "\n"
    if len(body) != length or crc16_ccitt(covered.encode("utf-8")) != checksum_in:
        logger.warning("Golden vector failed its length or checksum test")
        return None
    return seed, list(body)


def write_golden(path: Path, symbols: Sequence[int], seed: int) -> None:
    """Store a golden dump next to the run's other artifacts."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(golden_dump(symbols, seed), encoding="utf-8", newline="\n")
