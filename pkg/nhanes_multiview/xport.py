"""
Reader for SAS XPORT (version 5) transport files.

NHANES publishes every component file in this format: 80-byte records, a library
header, then per member a descriptor, NAMESTR variable descriptors and an observation
payload of fixed-stride rows. Numeric fields hold IBM System/360 base-16 floats.
"""

from __future__ import annotations

from collections.abc import Sequence
import csv
from dataclasses import dataclass, field
from datetime import datetime
import logging
import math
from pathlib import Path
import struct
from typing import BinaryIO, Literal

import numpy as np
import pandas as pd

from nhanes_multiview.exceptions import (
    BadNamestrCount,
    MalformedHeader,
    TruncatedFile,
)
from nhanes_multiview.table import SEQN, CellValue, ColumnTable, Missing

logger = logging.getLogger(__name__)

RECORD_LENGTH = 80

LIBRARY_HEADER = b"HEADER RECORD*******LIBRARY HEADER RECORD!!!!!!!"
MEMBER_HEADER = b"HEADER RECORD*******MEMBER  HEADER RECORD!!!!!!!"
DSCRPTR_HEADER = b"HEADER RECORD*******DSCRPTR HEADER RECORD!!!!!!!"
NAMESTR_HEADER = b"HEADER RECORD*******NAMESTR HEADER RECORD!!!!!!!"
OBS_HEADER = b"HEADER RECORD*******OBS     HEADER RECORD!!!!!!!"

#: First byte of an IBM missing-value pattern mapped to its SAS code.
_MISSING_MARKERS = {0x2E: ".", 0x5F: "._"} | {byte: f".{chr(byte)}" for byte in range(0x41, 0x5B)}

# ntype, nhfun, nlng, nvar0, nname, nlabel, nform, nfl, nfd, nfj, nfill, niform, nifl,
# nifd, npos, rest
_NAMESTR = struct.Struct(">hhhh8s40s8shhh2s8shhl")

_CHUNK_RECORDS = 4096


@dataclass(frozen=True)
class VariableDescriptor:
    """
    One NAMESTR entry.

    Parameters
    ----------
    name : str
        Variable name (at most 8 characters).
    kind : {"numeric", "character"}
        Storage type.
    length : int
        Field width in bytes.
    label : str
        Free-text label.
    position : int
        Byte offset within an observation.
    """

    name: str
    kind: Literal["numeric", "character"]
    length: int
    label: str
    position: int


@dataclass(frozen=True)
class XportMember:
    """
    Dataset member of a transport library.

    Parameters
    ----------
    name : str
        Dataset name.
    variables : tuple[VariableDescriptor, ...]
        Variable descriptors in record order.
    observation_count : int
        Number of observations in the payload.
    data_offset : int
        Byte offset of the payload in the source stream.
    label : str
        Dataset label.
    created : datetime or None
        Creation timestamp.
    """

    name: str
    variables: tuple[VariableDescriptor, ...]
    observation_count: int
    data_offset: int
    label: str = ""
    created: datetime | None = None

    @property
    def stride(self) -> int:
        """
        Bytes per observation.

        Returns
        -------
        int
            Sum of variable lengths.
        """
        return sum(var.length for var in self.variables)


@dataclass(frozen=True)
class XportLibrary:
    """
    Parsed transport library header and member descriptors.

    Parameters
    ----------
    created : datetime or None
        Library creation timestamp.
    members : tuple[XportMember, ...]
        Members in file order.
    modified : datetime or None
        Library modification timestamp.
    sas_version : str
        SAS release that wrote the file.
    os_name : str
        Operating system that wrote the file.
    """

    created: datetime | None
    members: tuple[XportMember, ...] = field(default_factory=tuple)
    modified: datetime | None = None
    sas_version: str = ""
    os_name: str = ""


def decode_ibm_double(data: bytes) -> CellValue:
    """
    Decode an IBM System/360 double into a float or missing code.

    Parameters
    ----------
    data : bytes
        Big-endian field, 2 to 8 bytes; shorter fields are zero-extended on the right.

    Returns
    -------
    CellValue
        Decoded float, or :class:`~nhanes_multiview.table.Missing`.

    Raises
    ------
    ValueError
        Field longer than 8 bytes or empty.

    Notes
    -----
    Nonzero IBM magnitudes lie between ``16**-78`` and ``16**63``, inside the normal IEEE
    double range, so decoding never overflows or underflows.

    Examples
    --------
    >>> decode_ibm_double(bytes.fromhex("4110000000000000"))
    1.0
    >>> decode_ibm_double(bytes.fromhex("4219000000000000"))
    25.0
    >>> decode_ibm_double(bytes.fromhex("2e00000000000000"))
    Missing(code='.')
    """
    if not 0 < len(data) <= 8:  # noqa: PLR2004
        raise ValueError(f"IBM double field must be 1-8 bytes, got {len(data)}")

    data = data.ljust(8, b"\x00")
    if data[0] in _MISSING_MARKERS and not any(data[1:]):
        return Missing(_MISSING_MARKERS[data[0]])

    sign = -1.0 if data[0] & 0x80 else 1.0
    exponent = data[0] & 0x7F
    mantissa = int.from_bytes(data[1:], "big")
    return sign * math.ldexp(float(mantissa), 4 * (exponent - 64) - 56)


def decode_ibm_column(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorized :func:`decode_ibm_double` over a column of fields.

    Parameters
    ----------
    raw : numpy.ndarray
        ``uint8`` array of shape ``(n, width)`` with ``width <= 8``.

    Returns
    -------
    values : numpy.ndarray
        ``float64`` values, ``NaN`` where missing.
    codes : numpy.ndarray
        ``object`` array of missing codes, ``None`` where present.
    """
    raw = np.asarray(raw, dtype=np.uint8)
    padded = np.zeros((raw.shape[0], 8), dtype=np.uint8)
    padded[:, : raw.shape[1]] = raw

    first = padded[:, 0]
    rest_zero = ~padded[:, 1:].any(axis=1)
    missing = rest_zero & np.isin(first, list(_MISSING_MARKERS))

    words = np.ascontiguousarray(padded).view(">u8")[:, 0]
    mantissa = (words & np.uint64(0x00FFFFFFFFFFFFFF)).astype(np.int64)
    exponent = (first & 0x7F).astype(np.int32)
    values = np.ldexp(mantissa.astype(np.float64), 4 * (exponent - 64) - 56)
    values = np.where(first & 0x80, -values, values)

    values[missing] = np.nan
    codes = np.full(raw.shape[0], None, dtype=object)
    codes[missing] = [_MISSING_MARKERS[int(byte)] for byte in first[missing]]
    return values, codes


def _read_record(stream: BinaryIO, what: str) -> bytes:
    record = stream.read(RECORD_LENGTH)
    if len(record) != RECORD_LENGTH:
        raise TruncatedFile(f"Stream ended inside {what} ({len(record)} of 80 bytes)")
    return record


def _expect(record: bytes, prefix: bytes, what: str) -> None:
    if not record.startswith(prefix):
        raise MalformedHeader(f"Expected {what} header, found {record[:48]!r}")


def _text(raw: bytes) -> str:
    return raw.decode("latin-1").rstrip(" \x00")


def _timestamp(raw: bytes) -> datetime | None:
    try:
        return datetime.strptime(_text(raw), "%d%b%y:%H:%M:%S")
    except ValueError:
        return None


def _parse_namestrs(region: bytes, count: int, size: int) -> tuple[VariableDescriptor, ...]:
    variables = []
    for i in range(count):
        entry = region[i * size : (i + 1) * size]
        (ntype, _, nlng, _, nname, nlabel, *_, npos) = _NAMESTR.unpack_from(entry)
        if ntype not in {1, 2}:
            raise BadNamestrCount(
                f"NAMESTR {i} of {count} has invalid type {ntype}; declared count "
                "disagrees with the NAMESTR region",
            )
        kind = "numeric" if ntype == 1 else "character"
        if kind == "numeric" and not 2 <= nlng <= 8:  # noqa: PLR2004
            raise MalformedHeader(f"Numeric variable {_text(nname)!r} has length {nlng}")
        variables.append(VariableDescriptor(_text(nname), kind, nlng, _text(nlabel), npos))

    position = 0
    for var in variables:
        if var.position != position:
            raise MalformedHeader(
                f"Variable {var.name!r} at byte {var.position}, expected {position}",
            )
        position += var.length

    return tuple(variables)


def _scan_payload(stream: BinaryIO) -> tuple[int, bytes, bytes | None]:
    """Consume records up to the next member header; return length, tail and header."""
    length = 0
    tail = b""
    while True:
        block = stream.read(RECORD_LENGTH * _CHUNK_RECORDS)
        if not block:
            return length, tail, None
        if len(block) % RECORD_LENGTH:
            raise TruncatedFile("Stream ends mid-record in observation payload")

        start = 0
        while (hit := block.find(MEMBER_HEADER, start)) >= 0:
            if hit % RECORD_LENGTH == 0:
                tail = (tail + block[:hit])[-RECORD_LENGTH:]
                # Rewind so the caller re-reads the member header sequence.
                stream.seek(hit + RECORD_LENGTH - len(block), 1)
                return length + hit, tail, block[hit : hit + RECORD_LENGTH]
            start = hit + 1

        length += len(block)
        tail = (tail + block)[-RECORD_LENGTH:]


def _count_observations(length: int, stride: int, tail: bytes) -> int:
    """Drop blank rows that fit inside the final sub-record padding."""
    if stride == 0:
        return 0
    count = length // stride
    while count > 0 and length - (count - 1) * stride < RECORD_LENGTH:
        row_start = (count - 1) * stride - (length - len(tail))
        if tail[row_start:].strip(b" "):
            break
        count -= 1
    return count


def _parse_member(stream: BinaryIO, header: bytes, offset: int) -> tuple[XportMember, bytes | None]:
    _expect(header, MEMBER_HEADER, "MEMBER")
    namestr_size = int(header[74:78] or b"140")

    _expect(_read_record(stream, "DSCRPTR header"), DSCRPTR_HEADER, "DSCRPTR")
    first = _read_record(stream, "member descriptor")
    second = _read_record(stream, "member descriptor")
    name = _text(first[8:16])

    record = _read_record(stream, "NAMESTR header")
    _expect(record, NAMESTR_HEADER, "NAMESTR")
    try:
        count = int(record[54:58])
    except ValueError as err:
        raise MalformedHeader(f"Unreadable variable count {record[54:58]!r}") from err

    region_records = math.ceil(count * namestr_size / RECORD_LENGTH)
    region = stream.read(region_records * RECORD_LENGTH)
    if len(region) != region_records * RECORD_LENGTH:
        raise TruncatedFile(f"Stream ended inside NAMESTR region of member {name!r}")
    variables = _parse_namestrs(region, count, namestr_size)

    obs = _read_record(stream, "OBS header")
    if not obs.startswith(OBS_HEADER):
        raise BadNamestrCount(
            f"Member {name!r} declares {count} variables but no OBS header follows "
            "the NAMESTR region",
        )

    data_offset = offset + RECORD_LENGTH * (6 + region_records)
    length, tail, next_header = _scan_payload(stream)
    stride = sum(var.length for var in variables)

    member = XportMember(
        name=name,
        variables=variables,
        observation_count=_count_observations(length, stride, tail),
        data_offset=data_offset,
        label=_text(second[32:72]),
        created=_timestamp(first[64:80]),
    )
    logger.debug("Parsed member %s: %d variables, %d obs", name, count, member.observation_count)
    return member, next_header


def parse_library(stream: BinaryIO) -> XportLibrary:
    """
    Parse the library header and every member's variable descriptors.

    Observation payloads are located but not decoded; see :func:`read_observations`.

    Parameters
    ----------
    stream : BinaryIO
        Seekable binary stream positioned at the start of the file.

    Returns
    -------
    XportLibrary
        Library with all members.

    Raises
    ------
    MalformedHeader
        Library sentinel or a later header does not match.
    TruncatedFile
        Stream ends mid-record.
    BadNamestrCount
        Declared variable count disagrees with the NAMESTR region.
    """
    base = stream.tell()
    head = stream.read(RECORD_LENGTH)
    if not head.startswith(LIBRARY_HEADER):
        raise MalformedHeader(f"Not an XPORT file: library sentinel missing, found {head[:48]!r}")
    if len(head) != RECORD_LENGTH:
        raise TruncatedFile("Stream ended inside library header")

    real = _read_record(stream, "library header")
    modified = _read_record(stream, "library header")

    members = []
    header = stream.read(RECORD_LENGTH)
    while header:
        if len(header) != RECORD_LENGTH:
            raise TruncatedFile("Stream ends mid-record before member header")
        offset = stream.tell() - RECORD_LENGTH - base
        member, header = _parse_member(stream, header, offset)
        members.append(member)
        header = header or b""

    return XportLibrary(
        created=_timestamp(real[64:80]),
        members=tuple(members),
        modified=_timestamp(modified[:16]),
        sas_version=_text(real[24:32]),
        os_name=_text(real[32:40]),
    )


def read_observations(member: XportMember, stream: BinaryIO) -> ColumnTable:
    """
    Decode a member's observations into a table.

    Parameters
    ----------
    member : XportMember
        Member parsed from `stream`.
    stream : BinaryIO
        The stream the library was parsed from (repositioned as needed).

    Returns
    -------
    ColumnTable
        One column per variable, keyed by ``SEQN`` when present.

    Raises
    ------
    TruncatedFile
        Payload shorter than the observation count implies.
    """
    stream.seek(member.data_offset)
    size = member.observation_count * member.stride
    raw = stream.read(size)
    if len(raw) != size:
        raise TruncatedFile(
            f"Member {member.name!r} payload has {len(raw)} bytes, expected {size}",
        )

    rows = np.frombuffer(raw, dtype=np.uint8).reshape(member.observation_count, member.stride)
    data = {}
    codes = {}
    for var in member.variables:
        cell = rows[:, var.position : var.position + var.length]
        if var.kind == "numeric":
            values, missing = decode_ibm_column(cell)
            data[var.name] = values
            if any(code is not None for code in missing):
                codes[var.name] = missing
        else:
            data[var.name] = np.array(
                [bytes(row).decode("latin-1").rstrip(" ") for row in cell], dtype=object
            )

    frame = pd.DataFrame(data, columns=[var.name for var in member.variables])
    return ColumnTable(
        frame,
        key=SEQN if SEQN in frame.columns else None,
        codes=pd.DataFrame(codes, index=frame.index, dtype=object),
    )


def read_xport(path: Path | str, member: int | str = 0) -> ColumnTable:
    """
    Read one member of an XPORT file.

    Parameters
    ----------
    path : Path | str
        ``.XPT`` file.
    member : int or str
        Member index or name (NHANES files hold a single member).

    Returns
    -------
    ColumnTable
        Decoded observations.

    Raises
    ------
    KeyError
        Named member absent.
    """
    with Path(path).open("rb") as stream:
        library = parse_library(stream)
        if isinstance(member, str):
            found = [mem for mem in library.members if mem.name == member]
            if not found:
                raise KeyError(f"No member {member!r} in {path}")
            return read_observations(found[0], stream)
        return read_observations(library.members[member], stream)


def dump_csv(
    table: ColumnTable,
    path: Path | str,
    *,
    keep_missing_codes: bool = False,
    columns: Sequence[str] | None = None,
) -> Path:
    """
    Write a table as RFC-4180 CSV.

    Missing cells become empty fields. With `keep_missing_codes`, every numeric column
    holding SAS missing codes gains a ``<name>_MISSING`` sidecar column with the code.

    Parameters
    ----------
    table : ColumnTable
        Table to write.
    path : Path | str
        Destination file.
    keep_missing_codes : bool
        Whether to add missing-code sidecar columns.
    columns : Sequence[str], optional
        Column subset (default: all).

    Returns
    -------
    Path
        Written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns) if columns is not None else table.columns

    out = {}
    for name in names:
        out[name] = table.column(name)
        if keep_missing_codes and name in table.codes.columns:
            out[f"{name}_MISSING"] = table.codes[name]

    pd.DataFrame(out).to_csv(
        path, index=False, na_rep="", quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n"
    )
    return path
