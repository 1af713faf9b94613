"""Per-scenario ridge-regression models mapping context features to font
parameters.

Closed-form weighted ridge on standardized features with an unpenalized
intercept. Models are immutable snapshots; every feedback event triggers a
full refit (datasets are at most hundreds of rows, so a refit is microseconds)
which keeps replay bit-deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientData, SingularSystem, StorageError
from .labels import LabelTree, ScenarioLabel, similarity
from .sensing import ContextFeatures

FONT_PARAM_RANGES: dict[str, tuple[float, float]] = {
    "size_sp": (12.0, 40.0),
    "weight_px": (0.0, 3.0),
    "line_spacing_em": (0.0, 1.0),
    "letter_spacing_em": (0.0, 0.5),
}

FEATURE_ORDER = (
    "log_lux",
    "vib_x",
    "vib_y",
    "vib_z",
    "distance_cm",
    "fatigued",
    "distracted",
    "vision_reduced",
)
N_FEATURES = len(FEATURE_ORDER)

OUTPUT_ORDER = ("size_sp", "weight_px", "line_spacing_em", "letter_spacing_em")
N_OUTPUTS = len(OUTPUT_ORDER)

GROUP_SCENARIO = "GROUP"
SCHEMA_VERSION = 1

DEFAULT_LAMBDA = 1.0
DEFAULT_WEIGHT_GROUP = 1.0
# One confirmed correction must move the served prediction decisively even
# against the dense parts of the 497-row group prior; at the leverage a
# context point has there (~0.005), ten events need w_u near 100 to close a
# 4 sp gap within 1 sp.
DEFAULT_WEIGHT_USER = 100.0
DEFAULT_MIN_ROWS = 3


@dataclass(frozen=True)
class FontParams:
    size_sp: float
    weight_px: float
    line_spacing_em: float
    letter_spacing_em: float

    def __post_init__(self):
        for name, (lo, hi) in FONT_PARAM_RANGES.items():
            v = getattr(self, name)
            if not math.isfinite(v) or not (lo <= v <= hi):
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    @classmethod
    def clamped(cls, size_sp, weight_px, line_spacing_em, letter_spacing_em):
        vals = {}
        for name, raw in zip(
            OUTPUT_ORDER, (size_sp, weight_px, line_spacing_em, letter_spacing_em)
        ):
            lo, hi = FONT_PARAM_RANGES[name]
            if not math.isfinite(raw):
                raw = lo
            vals[name] = min(hi, max(lo, float(raw)))
        return cls(**vals)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.size_sp, self.weight_px, self.line_spacing_em, self.letter_spacing_em)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in OUTPUT_ORDER}

    @classmethod
    def from_dict(cls, d: dict) -> "FontParams":
        return cls(**{name: float(d[name]) for name in OUTPUT_ORDER})

    def l1_distance(self, other: "FontParams") -> float:
        return sum(abs(a - b) for a, b in zip(self.as_tuple(), other.as_tuple()))


def feature_vector(features: ContextFeatures) -> list[float]:
    """Fixed-order model input. Light enters as log10(1 + lux) so the four
    orders of magnitude between indoor and outdoor light cannot swamp the
    other features; flags are 0/1 indicators."""
    return [
        math.log10(1.0 + features.light_lux),
        features.vib_x,
        features.vib_y,
        features.vib_z,
        features.distance_cm,
        1.0 if features.flags.fatigued else 0.0,
        1.0 if features.flags.distracted else 0.0,
        1.0 if features.flags.vision_reduced else 0.0,
    ]


def vector_from_raw(lux: float, vib_x: float, vib_y: float, vib_z: float,
                    distance_cm: float,
                    fatigued: bool = False, distracted: bool = False,
                    vision_reduced: bool = False) -> list[float]:
    return [
        math.log10(1.0 + lux),
        vib_x,
        vib_y,
        vib_z,
        distance_cm,
        1.0 if fatigued else 0.0,
        1.0 if distracted else 0.0,
        1.0 if vision_reduced else 0.0,
    ]


@dataclass(frozen=True)
class FeedbackEvent:
    """One confirmed correction: the unit of online learning."""

    features: tuple[float, ...]
    label: str
    params: FontParams
    timestamp_ms: int

    def __post_init__(self):
        if len(self.features) != N_FEATURES:
            raise ValueError(f"feature vector must have {N_FEATURES} entries")
        if not self.label:
            raise ValueError("label must be non-empty")
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "ts_ms": self.timestamp_ms,
            "label": self.label,
            "features": list(self.features),
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackEvent":
        return cls(
            features=tuple(d["features"]),
            label=d["label"],
            params=FontParams.from_dict(d["params"]),
            timestamp_ms=int(d["ts_ms"]),
        )


@dataclass(frozen=True)
class ScenarioModel:
    """Immutable fitted snapshot: 4 outputs x (intercept + 8 standardized
    features), plus the standardization that predictions must replay."""

    scenario: str
    version: int
    sample_count: int
    feature_means: tuple[float, ...]
    feature_sds: tuple[float, ...]
    coefficients: tuple[tuple[float, ...], ...]  # N_OUTPUTS rows x (1 + N_FEATURES)

    def predict(self, features: Sequence[float]) -> FontParams:
        if len(features) != N_FEATURES:
            raise ValueError(f"feature vector must have {N_FEATURES} entries")
        z = [
            (v - m) / s
            for v, m, s in zip(features, self.feature_means, self.feature_sds)
        ]
        raw = []
        for row in self.coefficients:
            acc = row[0]
            for beta, zv in zip(row[1:], z):
                acc += beta * zv
            raw.append(acc)
        return FontParams.clamped(*raw)

    def raw_coefficients(self) -> tuple[tuple[float, ...], ...]:
        """Coefficients de-standardized to original feature units:
        row = (intercept, slope_per_feature...)."""
        out = []
        for row in self.coefficients:
            slopes = [b / s for b, s in zip(row[1:], self.feature_sds)]
            intercept = row[0] - sum(
                b * m / s for b, m, s in zip(row[1:], self.feature_means, self.feature_sds)
            )
            out.append(tuple([intercept] + slopes))
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "version": self.version,
            "sample_count": self.sample_count,
            "feature_order": list(FEATURE_ORDER),
            "output_order": list(OUTPUT_ORDER),
            "standardization": {
                "mean": list(self.feature_means),
                "sd": list(self.feature_sds),
            },
            "coefficients": [list(row) for row in self.coefficients],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioModel":
        return cls(
            scenario=d["scenario"],
            version=int(d["version"]),
            sample_count=int(d["sample_count"]),
            feature_means=tuple(d["standardization"]["mean"]),
            feature_sds=tuple(d["standardization"]["sd"]),
            coefficients=tuple(tuple(row) for row in d["coefficients"]),
        )


Row = tuple[Sequence[float], FontParams]


def fit_ridge(
    rows: Sequence[Row],
    lam: float = DEFAULT_LAMBDA,
    weights: Optional[Sequence[float]] = None,
    scenario: str = GROUP_SCENARIO,
    version: int = 1,
) -> ScenarioModel:
    """Closed-form weighted ridge, one solve shared by all four outputs.

    Features are standardized internally (weighted mean/sd); the intercept is
    unpenalized. lam=0 with exactly collinear features raises SingularSystem.
    """
    if len(rows) < 2:
        raise InsufficientData(f"need at least 2 rows, got {len(rows)}")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    n = len(rows)
    X = np.array([list(r[0]) for r in rows], dtype=float)
    Y = np.array([r[1].as_tuple() for r in rows], dtype=float)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"feature vectors must have {N_FEATURES} entries")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("weights must be positive, one per row")

    w_total = w.sum()
    means = (w[:, None] * X).sum(axis=0) / w_total
    var = (w[:, None] * (X - means) ** 2).sum(axis=0) / w_total
    sds = np.sqrt(var)
    zero_var = sds <= 1e-12
    sds = np.where(zero_var, 1.0, sds)

    Z = (X - means) / sds
    A = np.hstack([np.ones((n, 1)), Z])
    sw = np.sqrt(w)
    Aw = A * sw[:, None]
    Yw = Y * sw[:, None]
    G = Aw.T @ Aw
    # Constant features carry no signal; always regularize them so their
    # coefficient is exactly 0 even at lam=0.
    diag = np.full(N_FEATURES + 1, lam)
    diag[0] = 0.0  # intercept unpenalized
    diag[1:][zero_var] = np.maximum(lam, 1.0)
    G = G + np.diag(diag)
    b = Aw.T @ Yw
    try:
        B = np.linalg.solve(G, b)  # (1 + N_FEATURES) x N_OUTPUTS
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(B)):
        raise SingularSystem("non-finite solution (collinear features at lambda=0?)")

    return ScenarioModel(
        scenario=scenario,
        version=version,
        sample_count=n,
        feature_means=tuple(float(v) for v in means),
        feature_sds=tuple(float(v) for v in sds),
        coefficients=tuple(tuple(float(v) for v in B[:, j]) for j in range(N_OUTPUTS)),
    )


class ScenarioStore:
    """Per-user store: group seed rows, per-scenario feedback datasets, and the
    fitted model snapshots. Persistence (when attached) appends events before
    any refit so a crash never loses confirmed feedback."""

    def __init__(
        self,
        group_rows: Sequence[Row],
        group_model: ScenarioModel,
        lam: float = DEFAULT_LAMBDA,
        weight_group: float = DEFAULT_WEIGHT_GROUP,
        weight_user: float = DEFAULT_WEIGHT_USER,
        min_rows: int = DEFAULT_MIN_ROWS,
        persist_event=None,
        persist_model=None,
    ):
        self.group_rows = list(group_rows)
        self.group_model = group_model
        self.lam = lam
        self.weight_group = weight_group
        self.weight_user = weight_user
        self.min_rows = min_rows
        self._events: dict[str, list[FeedbackEvent]] = {}
        self._models: dict[str, ScenarioModel] = {}
        self._persist_event = persist_event
        self._persist_model = persist_model

    def events_for(self, scenario: str) -> list[FeedbackEvent]:
        return list(self._events.get(scenario, ()))

    def row_count(self, scenario: str) -> int:
        return len(self._events.get(scenario, ()))

    def model_for(self, scenario: str) -> Optional[ScenarioModel]:
        if scenario == GROUP_SCENARIO:
            return self.group_model
        return self._models.get(scenario)

    def scenarios(self) -> list[str]:
        return sorted(self._events)

    def _refit(self, scenario: str) -> ScenarioModel:
        events = self._events.get(scenario, [])
        rows: list[Row] = list(self.group_rows)
        weights = [self.weight_group] * len(self.group_rows)
        for ev in events:
            rows.append((ev.features, ev.params))
            weights.append(self.weight_user)
        return fit_ridge(
            rows,
            lam=self.lam,
            weights=weights,
            scenario=scenario,
            version=len(events),
        )

    def apply_feedback(self, event: FeedbackEvent) -> ScenarioModel:
        """Durably append the event, then refit. A refit failure leaves the
        previously served model active."""
        scenario = event.label
        if self._persist_event is not None:
            try:
                self._persist_event(event)
            except OSError as exc:
                raise StorageError(str(exc)) from exc
        self._events.setdefault(scenario, []).append(event)
        prior = self._models.get(scenario)
        try:
            model = self._refit(scenario)
        except Exception:
            return prior if prior is not None else self.group_model
        self._models[scenario] = model
        if self._persist_model is not None:
            try:
                self._persist_model(model)
            except OSError as exc:
                raise StorageError(str(exc)) from exc
        return model

    def load_events(self, scenario: str, events: Sequence[FeedbackEvent]) -> None:
        """Rebuild a scenario dataset from a replayed event log and refit once;
        the final coefficients equal those of event-by-event refits."""
        self._events[scenario] = list(events)
        if events:
            self._models[scenario] = self._refit(scenario)


def update_with_feedback(store: ScenarioStore, event: FeedbackEvent) -> ScenarioModel:
    return store.apply_feedback(event)


def transfer_model(
    tree: LabelTree, store: ScenarioStore, target: ScenarioLabel
) -> ScenarioModel:
    """Serve the target's own model when it has enough user rows, else the
    most similar scenario that does (ties: higher usage count, then
    lexicographically smaller canonical form), else the group model."""
    target_key = target.canonical()
    own = store.model_for(target_key)
    if own is not None and store.row_count(target_key) >= store.min_rows:
        return own

    best: Optional[tuple[float, int, str, ScenarioModel]] = None
    for entry in tree.entries():
        canonical = entry.label.canonical()
        if canonical == target_key:
            continue
        model = store.model_for(canonical)
        if model is None or store.row_count(canonical) < store.min_rows:
            continue
        sim = similarity(target, entry.label)
        if best is None:
            best = (sim, entry.usage_count, canonical, model)
            continue
        b_sim, b_usage, b_canon, _ = best
        if sim > b_sim or (
            sim == b_sim
            and (entry.usage_count > b_usage
                 or (entry.usage_count == b_usage and canonical < b_canon))
        ):
            best = (sim, entry.usage_count, canonical, model)
    if best is not None:
        return best[3]
    return store.group_model
