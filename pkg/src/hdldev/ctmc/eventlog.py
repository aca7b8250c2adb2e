"""Binary event-log stream.

Layout: a 16-byte header (magic ``HDLDEVT1``, u32 N, u32 reserved) followed
by packed little-endian records (f64 time, u8 kind, u32 site), 13 bytes each.
"""
import struct

import numpy as np

from ..errors import ValidationError
from .simulator import EventLog

MAGIC = b"HDLDEVT1"
HEADER = struct.Struct("<8sII")
RECORD = np.dtype([("t", "<f8"), ("kind", "u1"), ("site", "<u4")])  # packed, 13 bytes


def write_event_log(path, log: EventLog):
    rec = np.empty(len(log), dtype=RECORD)
    rec["t"] = log.times
    rec["kind"] = log.kinds
    rec["site"] = log.sites
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, log.n_sites, 0))
        fh.write(rec.tobytes())


def read_event_log(path) -> EventLog:
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise ValidationError("truncated event-log header")
        magic, n, _ = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValidationError(f"bad event-log magic {magic!r}")
        body = fh.read()
    if len(body) % RECORD.itemsize:
        raise ValidationError("event-log body is not a whole number of records")
    rec = np.frombuffer(body, dtype=RECORD)
    return EventLog(int(n), rec["t"].astype(np.float64), rec["kind"].astype(np.uint8),
                    rec["site"].astype(np.uint32))
