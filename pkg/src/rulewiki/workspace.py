"""File-backed wiki storage: named rulebases, revisions, ingestion, config.

Each rulebase lives in its own directory: ``source.ee`` (the wiki text),
``tables/*.tsv`` (ingested fact tables), ``meta`` (revision counter and
timestamp) and ``diagnostics`` (the latest parse warnings).  Everything is
a plain text file so the whole workspace diffs and backs up like any other
collection of documents.

Saves are optimistic: a write carries the revision it was based on and is
refused with the current revision when someone else saved in between.
Parse problems never block a save — a wiki keeps drafts — but they are
recorded and returned so editors see them immediately.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .engine import EngineLimits
from .rulebook import FactTable, ParseError, Rulebase, parse_rulebase
from .sentences import Value, parse_sentence, skeleton_of

TRIPLE_HEADING = "some-subject is related by some-predicate to some-object"

_ID_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*\Z")


class UnknownRulebase(KeyError):
    def __init__(self, rulebase_id: str):
        super().__init__(rulebase_id)
        self.rulebase_id = rulebase_id

    def __str__(self) -> str:
        return f"no rulebase named {self.rulebase_id!r}"


class InvalidId(ValueError):
    def __init__(self, rulebase_id: str):
        super().__init__(
            f"{rulebase_id!r} is not a valid rulebase id (letters, digits, "
            "dot, dash, underscore; must not start with punctuation)"
        )
        self.rulebase_id = rulebase_id


class RevisionConflict(RuntimeError):
    def __init__(self, current: int, expected: int):
        super().__init__(
            f"rulebase is at revision {current}, but the write expected "
            f"{expected}; reconcile and try again"
        )
        self.current = current
        self.expected = expected


class BadTriple(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class WidthMismatch(ValueError):
    def __init__(self, row: int, got: int, want: int):
        super().__init__(
            f"row {row} has {got} cells but the heading has {want} holes"
        )
        self.row = row


class BadConfig(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class RulebaseEntry:
    id: str
    source: str
    revision: int
    updated_at: str  # ISO 8601, UTC


# ---------------------------------------------------------------------------
# TSV table files
# ---------------------------------------------------------------------------


def _escape_cell(text: str) -> str:
    return (
        text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")
    )


def _unescape_cell(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"t": "\t", "n": "\n", "\\": "\\"}.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _write_table(path: Path, table: FactTable) -> None:
    lines = [table.heading.text]
    for row in table.rows:
        lines.append("\t".join(_escape_cell(v.text) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _read_table(path: Path) -> FactTable:
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    heading = parse_sentence(lines[0])
    arity = skeleton_of(heading).arity
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        cells = tuple(Value(_unescape_cell(c)) for c in line.split("\t"))
        if len(cells) != arity:
            raise ValueError(
                f"{path.name}: stored row width {len(cells)} does not match "
                f"heading arity {arity}"
            )
        if cells not in rows:
            rows.append(cells)
    return FactTable(heading=heading, rows=tuple(rows), name=path.stem)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# the workspace
# ---------------------------------------------------------------------------


class Workspace:
    """A directory of rulebases, one subdirectory per id."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, rulebase_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(rulebase_id, threading.Lock())

    def _dir(self, rulebase_id: str) -> Path:
        if not _ID_RE.match(rulebase_id):
            raise InvalidId(rulebase_id)
        return self.root / rulebase_id

    def ids(self) -> list[str]:
        out = []
        if self.root.is_dir():
            for child in sorted(self.root.iterdir()):
                if (child / "meta").is_file():
                    out.append(child.name)
        return out

    def exists(self, rulebase_id: str) -> bool:
        return (self._dir(rulebase_id) / "meta").is_file()

    # -- reading -----------------------------------------------------------

    def load(self, rulebase_id: str) -> RulebaseEntry:
        directory = self._dir(rulebase_id)
        meta = directory / "meta"
        if not meta.is_file():
            raise UnknownRulebase(rulebase_id)
        fields = _parse_kv(meta.read_text(encoding="utf-8"))
        source_path = directory / "source.ee"
        source = (
            source_path.read_text(encoding="utf-8")
            if source_path.is_file()
            else ""
        )
        return RulebaseEntry(
            id=rulebase_id,
            source=source,
            revision=int(fields.get("revision", "0")),
            updated_at=fields.get("updated_at", ""),
        )

    def tables(self, rulebase_id: str) -> list[FactTable]:
        directory = self._dir(rulebase_id) / "tables"
        out = []
        if directory.is_dir():
            for path in sorted(directory.glob("*.tsv")):
                out.append(_read_table(path))
        return out

    def rulebase(self, rulebase_id: str) -> Rulebase:
        """The effective rulebase: parsed source plus ingested tables."""
        entry = self.load(rulebase_id)
        rb = parse_rulebase(entry.source)
        extra = self.tables(rulebase_id)
        return rb.with_tables(extra) if extra else rb

    def diagnostics(self, rulebase_id: str) -> list[str]:
        path = self._dir(rulebase_id) / "diagnostics"
        if not path.is_file():
            return []
        return [l for l in path.read_text(encoding="utf-8").split("\n") if l]

    # -- writing -----------------------------------------------------------

    def save(
        self, rulebase_id: str, source: str, expected_revision: int
    ) -> RulebaseEntry:
        """Store new source; refuse when someone saved since it was read."""
        directory = self._dir(rulebase_id)
        with self._lock(rulebase_id):
            current = 0
            if (directory / "meta").is_file():
                current = self.load(rulebase_id).revision
            if expected_revision != current:
                raise RevisionConflict(current, expected_revision)
            directory.mkdir(parents=True, exist_ok=True)
            _atomic_write(directory / "source.ee", source)
            try:
                parsed = parse_rulebase(source)
                notes = [d.render() for d in parsed.diagnostics]
            except ParseError as exc:
                notes = [f"ERROR {exc}"]
            _atomic_write(directory / "diagnostics", "\n".join(notes) + "\n")
            return self._bump(directory, rulebase_id, current)

    def _bump(self, directory: Path, rulebase_id: str, current: int) -> RulebaseEntry:
        revision = current + 1
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        _atomic_write(
            directory / "meta",
            f"revision = {revision}\nupdated_at = {stamp}\n",
        )
        return self.load(rulebase_id)

    # -- ingestion ---------------------------------------------------------

    def ingest_rows(
        self,
        rulebase_id: str,
        heading_text: str,
        rows: Iterable[Sequence[str]],
        table_name: Optional[str] = None,
    ) -> FactTable:
        """Create or extend a stored table from delimited row data."""
        heading = parse_sentence(heading_text)
        arity = skeleton_of(heading).arity
        value_rows = []
        for number, row in enumerate(rows, start=1):
            cells = tuple(Value(str(c)) for c in row)
            if len(cells) != arity:
                raise WidthMismatch(number, len(cells), arity)
            value_rows.append(cells)
        return self._store_rows(rulebase_id, heading_text, value_rows, table_name)

    def ingest_ntriples(
        self,
        rulebase_id: str,
        table_name: str,
        lines: Iterable[str],
    ) -> int:
        """Append subject/predicate/object rows from N-Triples lines.

        Returns the number of rows now present that came from this input.
        Blank nodes ``_:x`` become ``__x`` values; URI brackets and literal
        quotes are stripped; a quoted object may contain spaces.
        """
        rows = []
        for number, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[-1] != ".":
                raise BadTriple(number, "a triple must end with ' .'")
            terms = parts[:-1]
            if len(terms) < 3:
                raise BadTriple(
                    number,
                    f"expected subject, predicate and object, got {len(terms)} term(s)",
                )
            subject = _term(terms[0])
            predicate = _term(terms[1])
            obj = _term(" ".join(terms[2:]))
            rows.append((Value(subject), Value(predicate), Value(obj)))
        self._store_rows(rulebase_id, TRIPLE_HEADING, rows, table_name)
        return len(rows)

    def _store_rows(
        self,
        rulebase_id: str,
        heading_text: str,
        rows: list[tuple[Value, ...]],
        table_name: Optional[str],
    ) -> FactTable:
        heading = parse_sentence(heading_text)
        name = table_name or _table_slug(heading_text)
        directory = self._dir(rulebase_id)
        with self._lock(rulebase_id):
            current = 0
            if (directory / "meta").is_file():
                current = self.load(rulebase_id).revision
            tables_dir = directory / "tables"
            tables_dir.mkdir(parents=True, exist_ok=True)
            path = tables_dir / f"{name}.tsv"
            merged: list[tuple[Value, ...]] = []
            if path.is_file():
                existing = _read_table(path)
                if skeleton_of(existing.heading) != skeleton_of(heading):
                    raise ValueError(
                        f"table {name!r} already stores "
                        f"{existing.heading.text!r}, not {heading_text!r}"
                    )
                merged.extend(existing.rows)
            for row in rows:
                if row not in merged:
                    merged.append(row)
            table = FactTable(heading=heading, rows=tuple(merged), name=name)
            _write_table(path, table)
            if not (directory / "source.ee").is_file():
                _atomic_write(directory / "source.ee", "")
            self._bump(directory, rulebase_id, current)
            return table


def _term(raw: str) -> str:
    if raw.startswith("_:"):
        return "__" + raw[2:]
    if raw.startswith("<") and raw.endswith(">"):
        return raw[1:-1]
    if raw.startswith('"'):
        end = raw.rfind('"')
        if end > 0:
            return raw[1:end]
    return raw


def _table_slug(heading_text: str) -> str:
    words = [w for w in heading_text.split() if not w.startswith(("some-", "that-"))]
    slug = "_".join(re.sub(r"[^A-Za-z0-9]+", "", w).lower() for w in words)
    return slug.strip("_") or "table"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DbSource:
    name: str
    driver: str
    database: str = ""
    host: str = ""
    credentials_ref: str = ""


@dataclass(frozen=True)
class WorkspaceConfig:
    root: Path = Path("workspace")
    port: int = 8077
    limits: EngineLimits = EngineLimits()
    sources: dict[str, DbSource] = field(default_factory=dict)


_TOP_KEYS = {"root", "port"}
_LIMIT_KEYS = {"max_fixpoint_rounds", "max_derived_facts"}
_SOURCE_KEYS = {"driver", "database", "host", "credentials_ref"}


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for line in text.split("\n"):
        line = line.strip()
        if not line or line.startswith(("#", ";")) or "=" not in line:
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def parse_config(text: str) -> WorkspaceConfig:
    """Read ``key = value`` lines with ``[section]`` headers.

    Recognized: top-level ``root``/``port``, a ``[limits]`` section, and
    ``[source NAME]`` sections for external databases.  Anything else is
    rejected with its line number — a typo in a config should be loud.
    """
    root = WorkspaceConfig().root
    port = WorkspaceConfig().port
    limit_values = {
        "max_fixpoint_rounds": EngineLimits().max_fixpoint_rounds,
        "max_derived_facts": EngineLimits().max_derived_facts,
    }
    sources: dict[str, DbSource] = {}
    section: Optional[str] = None
    source_name: Optional[str] = None
    source_values: dict[str, str] = {}

    def flush_source():
        nonlocal source_name, source_values
        if source_name is not None:
            if "driver" not in source_values:
                raise BadConfig(0, f"source {source_name!r} has no driver")
            sources[source_name] = DbSource(name=source_name, **source_values)
        source_name = None
        source_values = {}

    for number, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            flush_source()
            header = line[1:-1].strip()
            if header == "limits":
                section = "limits"
            elif header.startswith("source ") and header[7:].strip():
                section = "source"
                source_name = header[7:].strip()
            else:
                raise BadConfig(number, f"unknown section [{header}]")
            continue
        if "=" not in line:
            raise BadConfig(number, f"expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if section is None:
            if key not in _TOP_KEYS:
                raise BadConfig(number, f"unknown key {key!r}")
            if key == "root":
                root = Path(value)
            else:
                port = _int_value(number, key, value)
        elif section == "limits":
            if key not in _LIMIT_KEYS:
                raise BadConfig(number, f"unknown limits key {key!r}")
            limit_values[key] = _int_value(number, key, value)
        else:
            if key not in _SOURCE_KEYS:
                raise BadConfig(number, f"unknown source key {key!r}")
            source_values[key] = value
    flush_source()
    return WorkspaceConfig(
        root=root,
        port=port,
        limits=EngineLimits(**limit_values),
        sources=sources,
    )


def _int_value(line: int, key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise BadConfig(line, f"{key} must be an integer, got {value!r}") from None


def load_config(path: Path) -> WorkspaceConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
