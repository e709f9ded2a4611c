"""
Run directories and the SQLite index that lists them.

Layout of one run:
    <root>/<run_id>/
        config.yaml
        fingerprint.txt
        training_log.csv
        policy.dsamw
        checkpoints/iter_XXXXXX.{dsamw,pt}
        reports/<task>_goals.csv, <task>_summary.csv
        episodes/<task>_episodes.npz
        plots/
<root>/index.db holds one row per run, one per report written and the
ablation variants that failed (kept like dead-letter entries).
"""
import logging
import sqlite3
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

from src.models.config import RunConfig
from src.storage.config_files import config_fingerprint, dump_config

logger = logging.getLogger(__name__)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class RunPaths:
    root: Path

    @property
    def run_id(self) -> str:
        return self.root.name

    @property
    def config(self) -> Path:
        return self.root / "config.yaml"

    @property
    def training_log(self) -> Path:
        return self.root / "training_log.csv"

    @property
    def policy(self) -> Path:
        return self.root / "policy.dsamw"

    @property
    def checkpoints(self) -> Path:
        return self.root / "checkpoints"

    @property
    def reports(self) -> Path:
        return self.root / "reports"

    @property
    def episodes(self) -> Path:
        return self.root / "episodes"

    @property
    def plots(self) -> Path:
        return self.root / "plots"

    def initialize_layout(self) -> "RunPaths":
        for directory in (self.root, self.checkpoints, self.reports, self.episodes, self.plots):
            directory.mkdir(parents=True, exist_ok=True)
        return self

    def checkpoint(self, iteration: int, suffix: str) -> Path:
        return self.checkpoints / f"iter_{iteration:06d}.{suffix}"

    def latest_checkpoint(self) -> Optional[Path]:
        """Newest iter_*.pt whose .dsamw sibling also exists."""
        candidates = sorted(self.checkpoints.glob("iter_*.pt"))
        complete = [p for p in candidates if p.with_suffix(".dsamw").exists()]
        return complete[-1] if complete else None


class RunStore:
    """Run directories under one root, indexed in SQLite"""

    def __init__(self, root: str = "runs"):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.db_path = self.root / "index.db"
        self.conn: Optional[sqlite3.Connection] = None

    def connect(self):
        """Establish database connection"""
        self.conn = sqlite3.connect(self.db_path, check_same_thread=False)
        self.conn.row_factory = sqlite3.Row
        return self.conn

    def _ensure_connected(self):
        if not self.conn:
            self.connect()
            return
        try:
            self.conn.execute("SELECT 1")
        except (sqlite3.ProgrammingError, sqlite3.OperationalError):
            self.connect()

    def initialize_schema(self):
        """Create index tables if missing"""
        self._ensure_connected()
        cursor = self.conn.cursor()
        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id TEXT PRIMARY KEY,
                kind TEXT NOT NULL,             -- "train", "eval-pose", "ablate", ...
                name TEXT NOT NULL,
                fingerprint TEXT NOT NULL,
                seed INTEGER NOT NULL,
                status TEXT NOT NULL,           -- "created", "running", "completed", "partial", "failed"
                created_at TEXT NOT NULL,
                updated_at TEXT NOT NULL
            )
        """)
        cursor.execute("""
            CREATE TABLE IF NOT EXISTS reports (
                report_id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT NOT NULL,
                task TEXT NOT NULL,
                path TEXT NOT NULL,
                created_at TEXT NOT NULL
            )
        """)
        cursor.execute("""
            CREATE INDEX IF NOT EXISTS idx_reports_run
            ON reports(run_id, created_at DESC)
        """)
        cursor.execute("""
            CREATE TABLE IF NOT EXISTS failures (
                failure_id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT NOT NULL,
                variant TEXT NOT NULL,
                error_type TEXT NOT NULL,
                error_message TEXT NOT NULL,
                overrides TEXT,                 -- JSON
                failed_at TEXT NOT NULL
            )
        """)
        self.conn.commit()

    # ------------------------------------------------------------------

    def run_paths(self, run_id: str) -> RunPaths:
        return RunPaths(self.root / run_id)

    def create_run(self, config: RunConfig, kind: str = "train", extra_fingerprint: str = "",
                   run_id: Optional[str] = None) -> RunPaths:
        """
        Create (or reopen) the directory for a run and register it.

        Runs are named after the config fingerprint, so the same config and
        inputs always map to the same directory.
        """
        fingerprint = config_fingerprint(config, extra_fingerprint)
        if run_id is None:
            prefix = config.name if kind == "train" else f"{config.name}-{kind}"
            run_id = f"{prefix}-{fingerprint[:10]}"
        paths = self.run_paths(run_id).initialize_layout()
        dump_config(config, paths.config)
        (paths.root / "fingerprint.txt").write_text(fingerprint + "\n")

        self.initialize_schema()
        now = _now()
        self.conn.execute("""
            INSERT INTO runs (run_id, kind, name, fingerprint, seed, status, created_at, updated_at)
            VALUES (?, ?, ?, ?, ?, 'created', ?, ?)
            ON CONFLICT(run_id) DO UPDATE SET updated_at = excluded.updated_at
        """, (run_id, kind, config.name, fingerprint, config.seed, now, now))
        self.conn.commit()
        logger.info("run %s at %s", run_id, paths.root)
        return paths

    def mark_status(self, run_id: str, status: str):
        self.initialize_schema()
        self.conn.execute("UPDATE runs SET status = ?, updated_at = ? WHERE run_id = ?",
                          (status, _now(), run_id))
        self.conn.commit()

    def record_report(self, run_id: str, task: str, path: Path):
        self.initialize_schema()
        self.conn.execute("INSERT INTO reports (run_id, task, path, created_at) VALUES (?, ?, ?, ?)",
                          (run_id, task, str(path), _now()))
        self.conn.commit()

    def record_failure(self, run_id: str, variant: str, error_type: str, error_message: str,
                       overrides_json: str):
        self.initialize_schema()
        self.conn.execute("""
            INSERT INTO failures (run_id, variant, error_type, error_message, overrides, failed_at)
            VALUES (?, ?, ?, ?, ?, ?)
        """, (run_id, variant, error_type, error_message, overrides_json, _now()))
        self.conn.commit()

    def list_runs(self) -> List[dict]:
        """Indexed runs, newest first"""
        self.initialize_schema()
        cursor = self.conn.execute("SELECT * FROM runs ORDER BY created_at DESC, run_id")
        return [dict(row) for row in cursor.fetchall()]

    def get_reports(self, run_id: Optional[str] = None) -> List[dict]:
        self.initialize_schema()
        if run_id is None:
            cursor = self.conn.execute("SELECT * FROM reports ORDER BY created_at DESC")
        else:
            cursor = self.conn.execute("SELECT * FROM reports WHERE run_id = ? ORDER BY created_at DESC",
                                       (run_id,))
        return [dict(row) for row in cursor.fetchall()]

    def get_failures(self, run_id: Optional[str] = None) -> List[dict]:
        self.initialize_schema()
        if run_id is None:
            cursor = self.conn.execute("SELECT * FROM failures ORDER BY failed_at DESC")
        else:
            cursor = self.conn.execute("SELECT * FROM failures WHERE run_id = ? ORDER BY failed_at DESC",
                                       (run_id,))
        return [dict(row) for row in cursor.fetchall()]

    def close(self):
        """Close database connection"""
        if self.conn:
            self.conn.close()
            self.conn = None
