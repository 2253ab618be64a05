from __future__ import annotations

# Column order shared by inserts and selects; created_at is filled by the server.
LEDGER_COLUMNS = (
    "command",
    "method",
    "seed",
    "params",
    "metrics",
    "rows",
    "wall_seconds",
    "created_at",
)

RUN_REPORTS = """
CREATE TABLE IF NOT EXISTS run_reports (
  id BIGSERIAL PRIMARY KEY,
  command TEXT NOT NULL,
  method TEXT NOT NULL,
  seed BIGINT,
  params JSONB NOT NULL,
  metrics JSONB NOT NULL,
  rows JSONB NULL,
  wall_seconds DOUBLE PRECISION,
  created_at TIMESTAMPTZ NOT NULL DEFAULT now()
);
"""

RUN_REPORTS_INDEX = """
CREATE INDEX IF NOT EXISTS run_reports_by_command
  ON run_reports (command, created_at DESC);
"""

ALL_DDL = (RUN_REPORTS, RUN_REPORTS_INDEX)
