"""Compile the record schema with grpc_tools on demand."""

from __future__ import annotations

import logging
from pathlib import Path

from grpc_tools import protoc

logger = logging.getLogger(__name__)

PROTO_NAME = "records.proto"


def ensure_proto_compiled() -> None:
    """Generate records_pb2.py next to the schema.

    Raises:
        RuntimeError: protoc failed or could not be run.
    """

    def _handle_error(msg: str) -> None:
        logger.error(msg)
        logger.error("Make sure grpcio-tools is installed:\npoetry add grpcio-tools")
        raise RuntimeError(msg)

    proto_dir = Path(__file__).parent
    proto_file = proto_dir / PROTO_NAME

    try:
        result = protoc.main(
            [
                "grpc_tools.protoc",
                f"--python_out={proto_dir}",
                f"--proto_path={proto_dir}",
                str(proto_file),
            ],
        )
        if result != 0:
            _handle_error(f"protoc returned non-zero status: {result}")
        logger.debug("Compiled record schema %s", proto_file)
    except (OSError, ImportError, TypeError) as e:
        _handle_error(f"Failed to compile record schema: {e!s}")
