"""Session lifecycle and the recommendation/feedback pipeline.

One engine hosts many sessions; ingestion is ordered per session, feedback
refits are serialized per user, and model snapshots swap atomically. With a
store root attached, feedback events are appended durably before any refit
and the full state reloads on restart.
"""

from __future__ import annotations

import json
import statistics
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .config import EngineConfig
from .datagen import GroupRow
from .errors import InsufficientSamples, InvalidCalibration, StorageError, UnknownSession
from .labeler import FallbackLabeler
from .labels import (
    LabelContext,
    LabelTree,
    Labeler,
    PersonalFlags,
    ScenarioLabel,
    edit_label,
    parse_label,
    resolve_label,
)
from .modeling import (
    GROUP_SCENARIO,
    FeedbackEvent,
    FontParams,
    ScenarioModel,
    ScenarioStore,
    feature_vector,
    fit_ridge,
    transfer_model,
    update_with_feedback,
)
from .sensing import SensorSample, aggregate_window, classify_motion, estimate_reading_distance
from .storage import StoreLayout, append_event, read_events, write_model_snapshot


@dataclass
class Session:
    session_id: str
    user_id: str
    ipd_cm: float
    environment_hint: Optional[str] = None
    window: deque = field(default_factory=deque)
    recent_distances: deque = field(default_factory=lambda: deque(maxlen=50))
    last_ts: Optional[int] = None
    active_label: Optional[ScenarioLabel] = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


@dataclass(frozen=True)
class RecommendationResponse:
    params: FontParams
    scenario: str
    model_scenario: str
    model_version: int
    features_used: tuple[float, ...]
    latency_ms: float


class Engine:
    def __init__(
        self,
        group_rows: Sequence[GroupRow],
        config: Optional[EngineConfig] = None,
        labeler: Optional[Labeler] = None,
        store_root: Optional[str | Path] = None,
        group_model: Optional[ScenarioModel] = None,
    ):
        self.config = config or EngineConfig()
        self.labeler = labeler or FallbackLabeler()
        self.group_rows = [(r.vector(), r.params()) for r in group_rows]
        if group_model is None:
            group_model = fit_ridge(
                self.group_rows,
                lam=self.config.ridge_lambda,
                scenario=GROUP_SCENARIO,
                version=1,
            )
        self.group_model = group_model
        self.layout = StoreLayout(store_root) if store_root is not None else None
        self._sessions: dict[str, Session] = {}
        self._stores: dict[str, ScenarioStore] = {}
        self._trees: dict[str, LabelTree] = {}
        self._user_locks: dict[str, threading.Lock] = {}
        self._global_lock = threading.Lock()
        if self.layout is not None:
            self._restore_users()

    # --- user state ---

    def _user_lock(self, user_id: str) -> threading.Lock:
        with self._global_lock:
            return self._user_locks.setdefault(user_id, threading.Lock())

    def _make_store(self, user_id: str) -> ScenarioStore:
        persist_event = None
        persist_model = None
        if self.layout is not None:
            layout = self.layout

            def persist_event(event: FeedbackEvent, _user=user_id):
                append_event(layout.dataset_path(_user, event.label), event)

            def persist_model(model: ScenarioModel, _user=user_id):
                write_model_snapshot(layout.model_path(_user, model.scenario), model)

        return ScenarioStore(
            self.group_rows,
            self.group_model,
            lam=self.config.ridge_lambda,
            weight_group=self.config.weight_group,
            weight_user=self.config.weight_user,
            min_rows=self.config.min_rows,
            persist_event=persist_event,
            persist_model=persist_model,
        )

    def store_for(self, user_id: str) -> ScenarioStore:
        with self._global_lock:
            store = self._stores.get(user_id)
            if store is None:
                store = self._make_store(user_id)
                self._stores[user_id] = store
            return store

    def tree_for(self, user_id: str) -> LabelTree:
        with self._global_lock:
            tree = self._trees.get(user_id)
            if tree is None:
                tree = LabelTree()
                self._trees[user_id] = tree
            return tree

    def _labels_log_path(self, user_id: str) -> Path:
        return self.layout.user_dir(user_id) / "labels.jsonl"

    def _log_label(self, user_id: str, label: ScenarioLabel, confirmed: bool) -> None:
        if self.layout is None:
            return
        path = self._labels_log_path(user_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"label": label.canonical(), "confirmed": confirmed},
                                sort_keys=True) + "\n")

    def _restore_users(self) -> None:
        for user_id in self.layout.user_ids():
            store = self._make_store(user_id)
            tree = LabelTree()
            labels_log = self._labels_log_path(user_id)
            if labels_log.exists():
                with open(labels_log, "r", encoding="utf-8") as fh:
                    for line in fh:
                        if not line.strip():
                            continue
                        obj = json.loads(line)
                        tree.insert(parse_label(obj["label"]),
                                    confirmed=bool(obj.get("confirmed", False)))
            for path in self.layout.user_dataset_paths(user_id):
                events = read_events(path)
                if not events:
                    continue
                scenario = events[0].label
                store.load_events(scenario, events)
                # a scenario with confirmed feedback is a label in active use
                tree.insert(parse_label(scenario), confirmed=True)
            with self._global_lock:
                self._stores[user_id] = store
                self._trees[user_id] = tree

    # --- sessions ---

    def open_session(
        self,
        user_id: str,
        ipd_cm: Optional[float] = None,
        environment_hint: Optional[str] = None,
    ) -> Session:
        if not user_id or not user_id.strip():
            raise ValueError("user_id must be non-empty")
        if ipd_cm is None:
            ipd_cm = self.config.default_ipd_cm
        if not (self.config.ipd_min_cm <= ipd_cm <= self.config.ipd_max_cm):
            raise InvalidCalibration(
                f"ipd_cm {ipd_cm} outside "
                f"[{self.config.ipd_min_cm}, {self.config.ipd_max_cm}]"
            )
        session = Session(
            session_id=uuid.uuid4().hex,
            user_id=user_id,
            ipd_cm=ipd_cm,
            environment_hint=environment_hint,
            recent_distances=deque(maxlen=self.config.recent_distance_window),
        )
        with self._global_lock:
            self._sessions[session.session_id] = session
        return session

    def session(self, session_id: str) -> Session:
        with self._global_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    # --- pipeline ---

    def ingest(self, session_id: str, samples: Sequence[SensorSample]) -> int:
        """Append in-order samples to the session window; samples that step
        backwards in time are rejected, the rest accepted."""
        session = self.session(session_id)
        accepted = 0
        with session.lock:
            for sample in samples:
                if session.last_ts is not None and sample.timestamp_ms < session.last_ts:
                    continue
                resolved = self._resolve_distance(session, sample)
                session.window.append(resolved)
                session.last_ts = resolved.timestamp_ms
                if resolved.distance_cm is not None:
                    session.recent_distances.append(resolved.distance_cm)
                accepted += 1
            self._evict(session)
        return accepted

    def _resolve_distance(self, session: Session, sample: SensorSample) -> SensorSample:
        if sample.distance_cm is not None or sample.eye_span_px is None:
            return sample
        distance = estimate_reading_distance(
            sample.eye_span_px, session.ipd_cm, self.config.focal_px
        )
        return SensorSample(
            timestamp_ms=sample.timestamp_ms,
            lux=sample.lux,
            accel_offset=sample.accel_offset,
            eye_span_px=sample.eye_span_px,
            distance_cm=distance,
        )

    def _evict(self, session: Session) -> None:
        if not session.window:
            return
        horizon = session.window[-1].timestamp_ms - self.config.window_ms
        while session.window and session.window[0].timestamp_ms < horizon:
            session.window.popleft()

    def _snapshot_features(self, session: Session, flags: PersonalFlags):
        with session.lock:
            window = list(session.window)
            distances = list(session.recent_distances)
        fallback = (
            statistics.median(distances)
            if distances
            else self.config.default_distance_cm
        )
        return aggregate_window(
            window,
            flags,
            min_samples=self.config.min_samples,
            fallback_distance_cm=fallback,
        )

    def _resolve_scenario(self, session: Session, features) -> ScenarioLabel:
        motion = classify_motion(
            features, self.config.theta_still, self.config.theta_run
        )
        context = LabelContext(motion, session.environment_hint, features.flags)
        tree = self.tree_for(session.user_id)
        known_before = {e.label.canonical() for e in tree.entries()}
        label = resolve_label(context, tree, self.labeler)
        if label.canonical() not in known_before:
            self._log_label(session.user_id, label, confirmed=False)
        session.active_label = label
        return label

    def recommend(self, session_id: str, flags: PersonalFlags = PersonalFlags()) -> RecommendationResponse:
        t0 = time.perf_counter()
        session = self.session(session_id)
        features = self._snapshot_features(session, flags)
        label = self._resolve_scenario(session, features)
        store = self.store_for(session.user_id)
        tree = self.tree_for(session.user_id)
        model = transfer_model(tree, store, label)
        vec = feature_vector(features)
        params = model.predict(vec)
        latency_ms = (time.perf_counter() - t0) * 1000.0
        return RecommendationResponse(
            params=params,
            scenario=label.canonical(),
            model_scenario=model.scenario,
            model_version=model.version,
            features_used=tuple(vec),
            latency_ms=latency_ms,
        )

    def feedback(
        self,
        session_id: str,
        params: FontParams,
        flags: PersonalFlags = PersonalFlags(),
    ) -> int:
        """Record one confirmed correction and refit its scenario model.
        Returns the new model version."""
        session = self.session(session_id)
        features = self._snapshot_features(session, flags)
        if session.active_label is None:
            self._resolve_scenario(session, features)
        label = session.active_label
        event = FeedbackEvent(
            features=tuple(feature_vector(features)),
            label=label.canonical(),
            params=params,
            timestamp_ms=session.last_ts if session.last_ts is not None else 0,
        )
        with self._user_lock(session.user_id):
            store = self.store_for(session.user_id)
            model = update_with_feedback(store, event)
        return model.version

    # --- label endpoints ---

    def get_label(self, session_id: str) -> dict:
        session = self.session(session_id)
        if session.active_label is None:
            return {"scenario": GROUP_SCENARIO, "confirmed": False, "placeholder": True}
        entry = self.tree_for(session.user_id).get(session.active_label)
        return {
            "scenario": session.active_label.canonical(),
            "confirmed": bool(entry and entry.confirmed),
            "placeholder": False,
        }

    def set_label(
        self,
        session_id: str,
        label_text: Optional[str] = None,
        confirm: bool = False,
    ) -> dict:
        """Explicitly set the active label and/or confirm the pending one."""
        session = self.session(session_id)
        tree = self.tree_for(session.user_id)
        if label_text is not None:
            label = parse_label(label_text)
            tree.insert(label, confirmed=False)
            session.active_label = label
        if confirm:
            if session.active_label is None:
                raise ValueError("no active label to confirm")
            tree.confirm(session.active_label)
            self._log_label(session.user_id, session.active_label, confirmed=True)
        return self.get_label(session_id)

    def edit_label(self, session_id: str, instruction: str) -> dict:
        session = self.session(session_id)
        if session.active_label is None:
            raise ValueError("no active label to edit; recommend or set one first")
        new_label, warning = edit_label(session.active_label, instruction, self.labeler)
        tree = self.tree_for(session.user_id)
        if warning is None:
            tree.insert(new_label, confirmed=True)
            self._log_label(session.user_id, new_label, confirmed=True)
            session.active_label = new_label
        result = self.get_label(session_id)
        if warning is not None:
            result["warning"] = warning
        return result

    # --- model inspection ---

    def model_snapshot(self, scenario: str, user_id: Optional[str] = None) -> Optional[ScenarioModel]:
        if scenario == GROUP_SCENARIO:
            return self.group_model
        if user_id is None:
            return None
        return self.store_for(user_id).model_for(scenario)
