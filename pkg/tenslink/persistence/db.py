"""Optional PostgreSQL run ledger.

Every entry point degrades to a logged no-op when ``DATABASE_URL`` is unset,
so the CLI and the tests never need a server.
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Tuple

import psycopg
from psycopg.types.json import Json

from ..config import settings
from ..core.schemas import MetricsReport
from .schema import ALL_DDL, LEDGER_COLUMNS


logger = logging.getLogger(__name__)


def _has_db() -> bool:
    return bool(settings.database_url)


@contextmanager
def _ledger() -> Iterator[psycopg.Connection]:  # type: ignore[name-defined]
    dsn: Optional[str] = settings.database_url
    if not dsn:
        raise RuntimeError("run ledger requested but DATABASE_URL is empty")
    conn = psycopg.connect(dsn)
    try:
        yield conn
        conn.commit()
    except Exception:
        conn.rollback()
        raise
    finally:
        conn.close()


def init_db() -> None:
    if not _has_db():
        logger.debug("run ledger disabled; schema setup skipped")
        return
    with _ledger() as conn:
        for statement in ALL_DDL:
            conn.execute(statement)
    logger.info("run ledger schema ensured (%d statements)", len(ALL_DDL))


def _ledger_row(report: MetricsReport) -> Tuple[Any, ...]:
    return (
        report.command,
        report.method,
        report.seed,
        Json(report.params),
        Json(report.metrics),
        Json(report.rows) if report.rows else None,
        report.wall_seconds,
    )


def insert_run_report(report: MetricsReport) -> bool:
    """Append a report to the ledger; False when no database is configured."""
    if not _has_db():
        logger.debug("run ledger disabled; %s report not stored", report.command)
        return False
    columns = LEDGER_COLUMNS[:-1]
    placeholders = ", ".join(["%s"] * len(columns))
    sql = f"INSERT INTO run_reports ({', '.join(columns)}) VALUES ({placeholders})"
    with _ledger() as conn:
        conn.execute(sql, _ledger_row(report))
    logger.info("stored %s/%s report in run ledger", report.command, report.method)
    return True


def fetch_run_reports(command: str, limit: int = 20) -> List[Dict[str, Any]]:
    """Newest ledger entries for ``command``."""
    if not _has_db():
        return []
    sql = (
        f"SELECT {', '.join(LEDGER_COLUMNS)} FROM run_reports "
        "WHERE command = %s ORDER BY created_at DESC LIMIT %s"
    )
    with _ledger() as conn:
        found = conn.execute(sql, (command, limit)).fetchall()
    return [dict(zip(LEDGER_COLUMNS, entry)) for entry in found]
