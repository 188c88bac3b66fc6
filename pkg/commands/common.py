"""
Helpers shared by the command modules.
"""
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from config import get_settings
from schemas import RunManifest
from storage import artifact_records, write_run_manifest

logger = logging.getLogger(__name__)


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def finish_run(
    command: str,
    argv: List[str],
    output_dir: Path,
    written: Iterable[Path],
    started_at: datetime,
    config: Optional[Dict[str, object]] = None,
    seeds: Optional[Dict[str, int]] = None,
    inputs: Optional[List[str]] = None,
) -> Path:
    """Hash every written artifact and record the invocation next to them."""
    output_dir = Path(output_dir)
    manifest = RunManifest(
        command=command,
        argv=list(argv),
        config=config or {},
        seeds=seeds or {},
        inputs=inputs or [],
        output_dir=str(output_dir),
        artifacts=artifact_records(output_dir, written),
        started_at=started_at,
        finished_at=utcnow(),
    )
    return write_run_manifest(output_dir, manifest)


def threads_or_default(threads: Optional[int]) -> int:
    """CLI flag, else QCM_SYSID_THREADS."""
    return threads if threads is not None else get_settings().threads
