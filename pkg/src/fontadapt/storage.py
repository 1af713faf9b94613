"""Disk layout: append-only JSON Lines event logs per (user, scenario) plus
atomic model snapshot files. No database; desk-scale by design.

    <root>/group/rows.jsonl          group seed corpus
    <root>/group/model.json          group model snapshot
    <root>/users/<user>/datasets/<slug>.jsonl
    <root>/users/<user>/models/<slug>.json

Events are appended and fsynced before any refit, so confirmed feedback
survives a crash; snapshots are written via tmp-file + rename.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from pathlib import Path
from typing import Iterable, Optional

from .datagen import GroupRow, read_fixture
from .errors import StorageError
from .modeling import FeedbackEvent, ScenarioModel

_SLUG_SAFE = re.compile(r"[^A-Za-z0-9._ -]+")


def scenario_slug(canonical: str) -> str:
    """Filesystem-safe name for a scenario; a short digest keeps distinct
    canonical forms from colliding after sanitization."""
    digest = hashlib.blake2s(canonical.encode("utf-8"), digest_size=4).hexdigest()
    safe = _SLUG_SAFE.sub("_", canonical).strip().replace(" ", "_")
    return f"{safe[:60]}_{digest}" if safe else digest


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def write_model_snapshot(path: Path, model: ScenarioModel) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(path, json.dumps(model.to_dict(), sort_keys=True) + "\n")


def read_model_snapshot(path: Path) -> ScenarioModel:
    return ScenarioModel.from_dict(json.loads(path.read_text(encoding="utf-8")))


def append_event(path: Path, event: FeedbackEvent) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    line = json.dumps(event.to_dict(), sort_keys=True) + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()
        os.fsync(fh.fileno())


def read_events(path: Path) -> list[FeedbackEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                events.append(FeedbackEvent.from_dict(json.loads(line)))
    return events


class StoreLayout:
    """Paths under one store root, per user."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def group_rows_path(self) -> Path:
        return self.root / "group" / "rows.jsonl"

    @property
    def group_model_path(self) -> Path:
        return self.root / "group" / "model.json"

    def user_dir(self, user_id: str) -> Path:
        safe = _SLUG_SAFE.sub("_", user_id) or "user"
        return self.root / "users" / safe

    def dataset_path(self, user_id: str, canonical: str) -> Path:
        return self.user_dir(user_id) / "datasets" / f"{scenario_slug(canonical)}.jsonl"

    def model_path(self, user_id: str, canonical: str) -> Path:
        return self.user_dir(user_id) / "models" / f"{scenario_slug(canonical)}.json"

    def user_ids(self) -> list[str]:
        users_dir = self.root / "users"
        if not users_dir.is_dir():
            return []
        return sorted(p.name for p in users_dir.iterdir() if p.is_dir())

    def user_dataset_paths(self, user_id: str) -> list[Path]:
        datasets = self.user_dir(user_id) / "datasets"
        if not datasets.is_dir():
            return []
        return sorted(datasets.glob("*.jsonl"))

    def write_group_rows(self, rows: Iterable[GroupRow]) -> None:
        path = self.group_rows_path
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [json.dumps(r.to_dict(), sort_keys=True) for r in rows]
        _atomic_write(path, "\n".join(lines) + "\n")

    def read_group_rows(self) -> list[GroupRow]:
        if not self.group_rows_path.exists():
            raise StorageError(f"no group corpus at {self.group_rows_path}; run `train` first")
        return read_fixture(self.group_rows_path)

    def read_group_model(self) -> Optional[ScenarioModel]:
        if not self.group_model_path.exists():
            return None
        return read_model_snapshot(self.group_model_path)
