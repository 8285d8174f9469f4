"""File ingestion, canonical serialization and the session store.

Schemas:
    item set JSON   {"name", "items": [{"id", "label", "outcomes": [{"value", "prob"}]}]}
    ratings CSV     header ``user_id,item_id,rating``; missing pairs absent
    returns CSV     header ``date,<asset>,...`` with daily net returns
    questionnaire   {"pairs": [{"first", "second"}], "provenance", "objective"}
    answer sheet    {"questionnaire_id", "answers": [{"pair_index", "choice"}]}
    utility JSON    {"grid", "alpha", "beta", "estimator", "objective"}

Sessions persist as one canonical JSON file each under a configured
directory, with optimistic versioning and forward-only status transitions.
"""

from __future__ import annotations

import csv
import json
import os
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import resources

import numpy as np

from .elicitation import AnswerSheet, ElicitedUtility
from .errors import ConflictError, NotFoundError, ValidationError
from .lotteries import BreakpointGrid, ItemSet, Lottery, PwlUtility
from .portfolio import CASH_LABEL, ReturnsPanel
from .questionnaire import Questionnaire, RatingsMatrix

SESSION_STATUSES = ("questioning", "answered", "elicited", "recommended")

_CHOICE_TO_INT = {"first": 1, "second": -1, "none": 0}
_INT_TO_CHOICE = {v: k for k, v in _CHOICE_TO_INT.items()}


def canonical_json(payload) -> str:
    """Stable rendering used for files and byte-equality checks."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- item sets ---------------------------------------------------------------


def item_set_to_dict(items: ItemSet) -> dict:
    return {
        "name": items.name,
        "items": [
            {
                "id": it.id,
                "label": it.label,
                "outcomes": [{"value": v, "prob": p} for v, p in it.outcomes],
            }
            for it in items.items
        ],
    }


def item_set_from_dict(payload: dict) -> ItemSet:
    try:
        lots = tuple(
            Lottery(
                id=str(entry["id"]),
                label=str(entry.get("label", entry["id"])),
                outcomes=tuple(
                    (float(o["value"]), float(o["prob"])) for o in entry["outcomes"]
                ),
            )
            for entry in payload["items"]
        )
        return ItemSet(items=lots, name=str(payload["name"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed item set JSON: missing field {exc}") from exc


def load_item_set(path: str) -> ItemSet:
    with open(path, encoding="utf-8") as fh:
        return item_set_from_dict(json.load(fh))


def save_item_set(items: ItemSet, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(item_set_to_dict(items)))


def bundled_item_set(name: str) -> ItemSet:
    """Item sets shipped with the package: ``items10`` and ``items20``."""
    ref = resources.files("roboadvisor.data").joinpath(f"{name}.json")
    if not ref.is_file():
        raise NotFoundError(f"no bundled item set named {name!r}")
    return item_set_from_dict(json.loads(ref.read_text(encoding="utf-8")))


# -- ratings -----------------------------------------------------------------


def load_ratings(path: str, items: ItemSet | None = None) -> RatingsMatrix:
    entries: list[tuple[str, str, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"user_id", "item_id", "rating"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValidationError(f"ratings CSV must have header {sorted(required)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                rating = float(row["rating"])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"line {line_no}: bad rating {row['rating']!r}") from exc
            if not 0.0 <= rating <= 10.0:
                raise ValidationError(f"line {line_no}: rating {rating} outside [0, 10]")
            entries.append((row["user_id"], row["item_id"], rating))
    item_ids = tuple(it.id for it in items.items) if items is not None else None
    try:
        return RatingsMatrix.from_entries(entries, item_ids=item_ids)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def save_ratings(ratings: RatingsMatrix, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "item_id", "rating"])
        for u, i, r in zip(ratings.user_index, ratings.item_index, ratings.ratings):
            writer.writerow([ratings.user_ids[u], ratings.item_ids[i], f"{r:.10g}"])


# -- returns -----------------------------------------------------------------


def load_returns(path: str) -> ReturnsPanel:
    """Net-return CSV to gross factors; a unit risk-free column is prepended."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "date" or len(header) < 2:
            raise ValidationError("returns CSV needs a 'date' column plus asset columns")
        labels = tuple(header[1:])
        dates: list[str] = []
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(f"line {line_no}: expected {len(header)} cells")
            dates.append(row[0])
            try:
                net = [float(cell) for cell in row[1:]]
            except ValueError as exc:
                raise ValidationError(f"line {line_no}: non-numeric return") from exc
            rows.append(net)
    if not rows:
        raise ValidationError("returns CSV has no data rows")
    gross = 1.0 + np.asarray(rows, dtype=float)
    factors = np.hstack([np.ones((len(rows), 1)), gross])
    return ReturnsPanel(
        dates=tuple(dates), asset_labels=(CASH_LABEL,) + labels, factors=factors
    )


# -- questionnaires, answers, utilities ---------------------------------------


def questionnaire_to_dict(questionnaire: Questionnaire) -> dict:
    return {
        "pairs": [
            {"first": first.id, "second": second.id}
            for first, second in questionnaire.pairs
        ],
        "provenance": questionnaire.provenance,
        "objective": questionnaire.objective,
    }


def questionnaire_from_dict(payload: dict, items: ItemSet) -> Questionnaire:
    try:
        pairs = tuple(
            (items.by_id(str(p["first"])), items.by_id(str(p["second"])))
            for p in payload["pairs"]
        )
        return Questionnaire(
            pairs=pairs,
            provenance=str(payload.get("provenance", "unknown")),
            objective=payload.get("objective"),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed questionnaire JSON: {exc}") from exc


def answer_sheet_to_dict(answers: AnswerSheet, questionnaire_id: str = "") -> dict:
    return {
        "questionnaire_id": questionnaire_id,
        "answers": [
            {"pair_index": idx, "choice": _INT_TO_CHOICE[z]}
            for idx, z in enumerate(answers.choices)
        ],
    }


def answer_sheet_from_dict(payload: dict, questionnaire: Questionnaire) -> AnswerSheet:
    try:
        raw = payload["answers"]
        choices = [0] * len(questionnaire.pairs)
        seen: set[int] = set()
        for entry in raw:
            idx = int(entry["pair_index"])
            if not 0 <= idx < len(questionnaire.pairs):
                raise ValidationError(f"pair_index {idx} out of range")
            if idx in seen:
                raise ValidationError(f"duplicate pair_index {idx}")
            seen.add(idx)
            choice = entry["choice"]
            if choice not in _CHOICE_TO_INT:
                raise ValidationError(f"unknown choice {choice!r}")
            choices[idx] = _CHOICE_TO_INT[choice]
        return AnswerSheet(questionnaire=questionnaire, choices=tuple(choices))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed answer sheet JSON: {exc}") from exc


def utility_to_dict(elicited: ElicitedUtility) -> dict:
    u = elicited.utility
    return {
        "grid": list(u.grid.points),
        "alpha": list(u.alpha),
        "beta": list(u.beta),
        "estimator": elicited.estimator,
        "objective": elicited.objective,
    }


def utility_from_dict(payload: dict) -> ElicitedUtility:
    try:
        grid = BreakpointGrid(points=tuple(float(p) for p in payload["grid"]))
        utility = PwlUtility(
            grid=grid,
            alpha=tuple(float(a) for a in payload["alpha"]),
            beta=tuple(float(b) for b in payload["beta"]),
        )
        return ElicitedUtility(
            utility=utility,
            estimator=payload.get("estimator", "pessimistic"),
            objective=float(payload.get("objective", 0.0)),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed utility JSON: {exc}") from exc


def load_utility(path: str) -> ElicitedUtility:
    with open(path, encoding="utf-8") as fh:
        return utility_from_dict(json.load(fh))


def save_utility(elicited: ElicitedUtility, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(utility_to_dict(elicited)))


# -- session store -------------------------------------------------------------


@dataclass(frozen=True)
class SessionRecord:
    """One questionnaire-to-recommendation pipeline run, as stored on disk."""

    session_id: str
    item_set: str
    status: str
    questionnaire: dict
    seed: int | None = None
    answers: list = field(default_factory=list)
    utilities: dict = field(default_factory=dict)
    portfolio: dict | None = None
    created_at: str = ""
    updated_at: str = ""
    version: int = 1

    def __post_init__(self) -> None:
        if self.status not in SESSION_STATUSES:
            raise ValidationError(f"unknown session status {self.status!r}")
        k = len(self.questionnaire.get("pairs", []))
        if len(self.answers) > k:
            raise ValidationError("more answers than questionnaire pairs")
        if self.utilities and SESSION_STATUSES.index(self.status) < 2:
            raise ValidationError("utilities stored before elicitation")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "SessionRecord":
        return cls(**payload)


class SessionStore:
    """JSON-file-per-session persistence with optimistic concurrency."""

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> str:
        safe = "".join(ch for ch in session_id if ch.isalnum() or ch in "-_")
        if safe != session_id or not safe:
            raise ValidationError(f"unusable session id {session_id!r}")
        return os.path.join(self.directory, f"{safe}.json")

    def _write(self, record: SessionRecord) -> None:
        path = self._path(record.session_id)
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(record.to_dict()))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def create(self, record: SessionRecord) -> SessionRecord:
        with self._lock_for(record.session_id):
            if os.path.exists(self._path(record.session_id)):
                raise ConflictError(f"session {record.session_id!r} already exists")
            stamp = record.created_at or _utc_now()
            stored = replace(record, created_at=stamp, updated_at=stamp, version=1)
            self._write(stored)
            return stored

    def get(self, session_id: str) -> SessionRecord:
        path = self._path(session_id)
        if not os.path.exists(path):
            raise NotFoundError(f"no session {session_id!r}")
        with open(path, encoding="utf-8") as fh:
            return SessionRecord.from_dict(json.load(fh))

    def update(self, record: SessionRecord) -> SessionRecord:
        """Persist changes; ``record.version`` must match the stored version."""
        with self._lock_for(record.session_id):
            current = self.get(record.session_id)
            if record.version != current.version:
                raise ConflictError(
                    f"stale version {record.version} (stored {current.version})"
                )
            if SESSION_STATUSES.index(record.status) < SESSION_STATUSES.index(
                current.status
            ):
                raise ValidationError(
                    f"status cannot regress from {current.status!r} to {record.status!r}"
                )
            stored = replace(
                record,
                created_at=current.created_at,
                updated_at=_utc_now(),
                version=current.version + 1,
            )
            self._write(stored)
            return stored

    def list_ids(self) -> list[str]:
        return sorted(
            name[:-5] for name in os.listdir(self.directory) if name.endswith(".json")
        )


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
