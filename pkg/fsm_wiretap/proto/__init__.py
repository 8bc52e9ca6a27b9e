"""Record schema for capacity, region and codec results."""

from fsm_wiretap.proto.compiler import ensure_proto_compiled

ensure_proto_compiled()

from fsm_wiretap.proto.records_pb2 import (  # noqa: E402
    CapacityRecord,
    Params,
    RegionPoint,
    RunReportRecord,
)

__all__ = [
    "CapacityRecord",
    "Params",
    "RegionPoint",
    "RunReportRecord",
]
