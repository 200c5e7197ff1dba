"""
Report store for ConvBound using SQLite.
Keeps bound comparison reports and oracle-suite runs for later inspection.
"""

import json
import logging
import math
import sqlite3
import uuid
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from lib import config
from lib.types import BoundReport, LayerNorms, VerificationResult

logger = logging.getLogger(__name__)


@contextmanager
def get_db():
    """Context manager for database connections; tables are created on first use"""
    path = Path(config.database_path())
    path.parent.mkdir(parents=True, exist_ok=True)
    conn = sqlite3.connect(path)
    conn.row_factory = sqlite3.Row  # Enable column access by name
    try:
        _init_tables(conn)
        yield conn
        conn.commit()
    except Exception:
        conn.rollback()
        raise
    finally:
        conn.close()


def _init_tables(conn: sqlite3.Connection):
    cursor = conn.cursor()

    cursor.execute("""
        CREATE TABLE IF NOT EXISTS reports (
            id TEXT PRIMARY KEY,
            bundle TEXT NOT NULL,
            mode TEXT,
            ignore_n INTEGER DEFAULT 0,
            n INTEGER DEFAULT 1,
            bounds TEXT NOT NULL,
            layers TEXT,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
    """)

    cursor.execute("""
        CREATE TABLE IF NOT EXISTS verify_runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            bundle TEXT,
            trials INTEGER NOT NULL,
            seed INTEGER NOT NULL,
            results TEXT NOT NULL,
            passed INTEGER DEFAULT 0,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
    """)

    cursor.execute("CREATE INDEX IF NOT EXISTS idx_reports_created ON reports(created_at)")


def _finite(value: float) -> Optional[float]:
    # JSON has no infinities
    return value if math.isfinite(value) else None


def _layer_json(layer: LayerNorms) -> Dict[str, Any]:
    return {
        'kind': layer.kind.value if layer.kind else None,
        'mode': layer.mode.value,
        'a': layer.a,
        's': layer.s,
        'n21': layer.n21,
        'gamma_fnorm': layer.gamma_fnorm,
        'd_in': layer.d_in,
        'd_out': layer.d_out,
    }


# ===== REPORT FUNCTIONS =====

def save_report(report: BoundReport, bundle_label: str) -> str:
    """Save a comparison report, returning its id"""
    report_id = uuid.uuid4().hex
    bounds = [
        {
            'family': b.family.value,
            'value': _finite(b.value),
            'log10_value': _finite(b.log10_value),
            'overflow': b.overflow,
        }
        for b in report.bounds
    ]
    with get_db() as conn:
        cursor = conn.cursor()
        cursor.execute("""
            INSERT INTO reports (id, bundle, mode, ignore_n, n, bounds, layers)
            VALUES (?, ?, ?, ?, ?, ?, ?)
        """, (
            report_id,
            bundle_label,
            report.mode.value if report.mode else None,
            1 if report.ignore_n else 0,
            report.n,
            json.dumps(bounds),
            json.dumps([_layer_json(layer) for layer in report.layers]),
        ))
    logger.info("Saved report %s for %s", report_id, bundle_label)
    return report_id


def _report_row(row: sqlite3.Row) -> Dict[str, Any]:
    report = dict(row)
    report['ignore_n'] = bool(report['ignore_n'])
    report['bounds'] = json.loads(report['bounds'])
    report['layers'] = json.loads(report['layers'] or '[]')
    return report


def get_report(report_id: str) -> Optional[Dict[str, Any]]:
    """Get a stored report by ID"""
    with get_db() as conn:
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM reports WHERE id = ?", (report_id,))
        row = cursor.fetchone()
        if not row:
            return None
        return _report_row(row)


def list_reports(limit: int = 20) -> List[Dict[str, Any]]:
    """Most recent reports first"""
    with get_db() as conn:
        cursor = conn.cursor()
        cursor.execute("""
            SELECT * FROM reports
            ORDER BY created_at DESC, rowid DESC
            LIMIT ?
        """, (limit,))
        return [_report_row(row) for row in cursor.fetchall()]


def delete_report(report_id: str):
    with get_db() as conn:
        cursor = conn.cursor()
        cursor.execute("DELETE FROM reports WHERE id = ?", (report_id,))


# ===== VERIFY RUN FUNCTIONS =====

def save_verify_run(results: Sequence[VerificationResult], bundle_label: Optional[str], trials: int, seed: int) -> int:
    """Save one oracle-suite run, returning its row id"""
    payload = [
        {
            'name': r.name,
            'trials': r.trials,
            'violations': r.violations,
            'max_error': _finite(r.max_error),
            'tolerance': r.tolerance,
            'passed': r.passed,
        }
        for r in results
    ]
    with get_db() as conn:
        cursor = conn.cursor()
        cursor.execute("""
            INSERT INTO verify_runs (bundle, trials, seed, results, passed)
            VALUES (?, ?, ?, ?, ?)
        """, (bundle_label, trials, seed, json.dumps(payload), 1 if all(r.passed for r in results) else 0))
        return cursor.lastrowid


def list_verify_runs(limit: int = 20) -> List[Dict[str, Any]]:
    with get_db() as conn:
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM verify_runs ORDER BY id DESC LIMIT ?", (limit,))
        runs = []
        for row in cursor.fetchall():
            run = dict(row)
            run['passed'] = bool(run['passed'])
            run['results'] = json.loads(run['results'])
            runs.append(run)
        return runs
