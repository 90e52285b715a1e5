# csp_sched/file_manager.py
"""
File Manager - the only module that touches disk or the environment

Instances, solutions and reports go in and out through here, and so does
configuration. Solvers never read files or env vars themselves; they ask
load_settings().

Files:
  instance JSON     {"m", "capacities", "users": [...]}
  solution JSON     {"chosen": [[user, pref]], "fractional": [[user, pref, x]]}
  report CSV        instance,algorithm,epsilon,utility,beta,elapsed_ms

Environment (a .env file in the working directory is loaded first):
  CSP_SCHED_MEM_CAP          DP / enumeration memory cap   (default 2GiB)
  CSP_SCHED_ORACLE_BUDGET    oracle assignment budget      (default 2e7)
  CSP_SCHED_PTAS_GUESS_CAP   PTAS guess count cap          (default 1e7)
  CSP_SCHED_MAX_SLOTS        slot cap for FPTAS / PTAS     (default 3)
"""

import csv
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

from core_model import Instance
from errors import ParseError, PreconditionError
from parsers import (
    SolutionRecord,
    instance_to_json,
    parse_instance,
    parse_solution,
    solution_to_json,
)

SUPPORTED_ALGORITHMS_FILE = Path(__file__).with_name('supported_algorithms.json')

REPORT_FIELDS = ['instance', 'algorithm', 'epsilon', 'utility', 'beta', 'elapsed_ms']

BYTES_PER_ENTRY = 64

_SIZE_UNITS = {'': 1, 'B': 1, 'KIB': 2 ** 10, 'MIB': 2 ** 20, 'GIB': 2 ** 30,
               'KB': 10 ** 3, 'MB': 10 ** 6, 'GB': 10 ** 9}


# ─── Settings ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Settings:
    mem_cap_bytes:  int = 2 * 2 ** 30
    oracle_budget:  int = 2 * 10 ** 7
    ptas_guess_cap: int = 10 ** 7
    max_slots:      int = 3

    @property
    def mem_cap_entries(self) -> int:
        return max(1, self.mem_cap_bytes // BYTES_PER_ENTRY)


def parse_size(text: str) -> int:
    """'2GiB' -> 2147483648; plain numbers are bytes."""
    match = re.fullmatch(r'\s*([0-9]*\.?[0-9]+(?:[eE][0-9]+)?)\s*([A-Za-z]*)\s*', text)
    if not match or match.group(2).upper() not in _SIZE_UNITS:
        raise ValueError(f"cannot read size {text!r}; use bytes or a KiB/MiB/GiB suffix")
    return int(float(match.group(1)) * _SIZE_UNITS[match.group(2).upper()])


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(float(raw))
    except ValueError:
        raise ValueError(f"{name}={raw!r} is not a number") from None
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def load_settings() -> Settings:
    load_dotenv()
    defaults = Settings()
    raw_cap = os.environ.get('CSP_SCHED_MEM_CAP')
    return Settings(
        mem_cap_bytes=parse_size(raw_cap) if raw_cap else defaults.mem_cap_bytes,
        oracle_budget=_env_int('CSP_SCHED_ORACLE_BUDGET', defaults.oracle_budget),
        ptas_guess_cap=_env_int('CSP_SCHED_PTAS_GUESS_CAP', defaults.ptas_guess_cap),
        max_slots=_env_int('CSP_SCHED_MAX_SLOTS', defaults.max_slots),
    )


# ─── Algorithm registry ───────────────────────────────────────────────────────

def load_algorithm_registry() -> dict[str, dict]:
    """name -> entry, from supported_algorithms.json."""
    _require_file(
        SUPPORTED_ALGORITHMS_FILE,
        "supported_algorithms.json ships with the package — reinstall csp-sched."
    )
    with open(SUPPORTED_ALGORITHMS_FILE, 'r', encoding='utf-8') as f:
        registry = json.load(f)
    return {entry['name']: entry for entry in registry.get('algorithms', [])}


def assert_algorithm_supported(name: str) -> dict:
    """Registry entry for `name`; hard fail listing the known algorithms otherwise."""
    registry = load_algorithm_registry()
    base = name.split('+', 1)[0]
    entry = registry.get(base)
    if entry is None:
        available = [f"  * {n}" for n in registry]
        raise PreconditionError(
            f"[file_manager] Unknown algorithm: {name}\n"
            "Algorithms listed in supported_algorithms.json:\n" + "\n".join(available)
        )
    return entry


# ─── Readers ──────────────────────────────────────────────────────────────────

def _read_json(path: Path):
    _require_file(path, "Check the path, or create it with `csp-sched generate`.")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None


def load_instance(path) -> Instance:
    path = Path(path)
    return parse_instance(_read_json(path), str(path))


def load_solution(path) -> SolutionRecord:
    path = Path(path)
    return parse_solution(_read_json(path), str(path))


# ─── Writers ──────────────────────────────────────────────────────────────────

def dump_json(data) -> str:
    """Canonical text: insertion order kept, two-space indent, trailing newline."""
    return json.dumps(data, indent=2, ensure_ascii=False) + '\n'


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    return path


def write_instance(instance: Instance, path) -> Path:
    return _write_text(Path(path), dump_json(instance_to_json(instance)))


def write_solution(record: SolutionRecord, path) -> Path:
    return _write_text(Path(path), dump_json(solution_to_json(record)))


def format_report_row(instance: str, algorithm: str, epsilon, utility, beta, elapsed) -> dict:
    """One CSV row; elapsed in seconds, written as milliseconds."""
    def fmt(value):
        if value is None or value == '':
            return ''
        return f"{value:.10g}" if isinstance(value, float) else str(value)

    return {
        'instance':   instance,
        'algorithm':  algorithm,
        'epsilon':    fmt(epsilon),
        'utility':    fmt(utility),
        'beta':       fmt(beta),
        'elapsed_ms': '' if elapsed is None else f"{elapsed * 1000:.3f}",
    }


def write_report(rows: list[dict], stream, fields: list[str] = REPORT_FIELDS) -> None:
    writer = csv.DictWriter(stream, fieldnames=fields, lineterminator='\n')
    writer.writeheader()
    writer.writerows(rows)


def append_report_row(row: dict, path, fields: list[str] = REPORT_FIELDS) -> Path:
    """Append to a CSV report, writing the header first if the file is new."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'a', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fields, lineterminator='\n')
        if new:
            writer.writeheader()
        writer.writerow(row)
    return path


# ─── Internal ─────────────────────────────────────────────────────────────────

def _require_file(path: Path, guidance: str) -> None:
    if not path.exists():
        raise ParseError(str(path), f"file not found.\n{guidance}")
