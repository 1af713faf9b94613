"""Three-layer scenario labels: movement, environment scene, personalized
descriptors. Labels key per-scenario datasets and models; similarity between
labels drives model transfer to unseen contexts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .errors import LabelerUnavailable, MalformedLabelerOutput
from .sensing import MotionState


@dataclass(frozen=True)
class PersonalFlags:
    """Self-reported state that sensors cannot observe."""

    fatigued: bool = False
    distracted: bool = False
    vision_reduced: bool = False

    def descriptors(self) -> tuple[str, ...]:
        out = []
        if self.fatigued:
            out.append("fatigued")
        if self.distracted:
            out.append("distracted")
        if self.vision_reduced:
            out.append("reduced vision")
        return tuple(out)


NEUTRAL_FLAGS = PersonalFlags()


def _normalize_environment(name: str) -> str:
    # trim, collapse whitespace, capitalize each word so equality and the
    # canonical text form agree; "-" and "," are canonical-form delimiters
    # and cannot appear inside a segment
    words = name.replace("-", " ").replace(",", " ").strip().split()
    return " ".join(w.capitalize() for w in words)


def _normalize_descriptor(text: str) -> str:
    cleaned = text.replace("-", " ").replace(",", " ")
    return " ".join(cleaned.strip().split()).lower()


@dataclass(frozen=True)
class ScenarioLabel:
    movement: MotionState
    environment: str
    personalization: tuple[str, ...] = ()

    def __post_init__(self):
        env = _normalize_environment(self.environment)
        if not env:
            raise ValueError("environment must be non-empty")
        object.__setattr__(self, "environment", env)
        # dedupe + sort so that equal descriptor sets share one canonical form
        descs = tuple(
            sorted({d for d in (_normalize_descriptor(p) for p in self.personalization) if d})
        )
        object.__setattr__(self, "personalization", descs)

    def canonical(self) -> str:
        base = f"{self.movement.value}-{self.environment}"
        if self.personalization:
            return f"{base}-{', '.join(self.personalization)}"
        return base


def parse_label(text: str) -> ScenarioLabel:
    """Parse the canonical grammar `movement "-" environment ["-" descriptors]`.

    Tolerates surrounding whitespace in each segment; anything else is a
    MalformedLabelerOutput.
    """
    if not isinstance(text, str) or not text.strip():
        raise MalformedLabelerOutput("empty label text")
    parts = [p.strip() for p in text.strip().split("-", 2)]
    if len(parts) < 2:
        raise MalformedLabelerOutput(f"not in movement-environment form: {text!r}")
    movement = None
    for state in MotionState:
        if parts[0].casefold() == state.value.casefold():
            movement = state
            break
    if movement is None:
        raise MalformedLabelerOutput(f"unknown movement {parts[0]!r}")
    if not parts[1]:
        raise MalformedLabelerOutput("empty environment segment")
    descriptors: tuple[str, ...] = ()
    if len(parts) == 3:
        descriptors = tuple(d.strip() for d in parts[2].split(",") if d.strip())
    try:
        return ScenarioLabel(movement, parts[1], descriptors)
    except ValueError as exc:
        raise MalformedLabelerOutput(str(exc)) from exc


# movement dominates: vibration is the strongest driver of parameter change
SIM_WEIGHT_MOVEMENT = 0.5
SIM_WEIGHT_ENVIRONMENT = 0.3
SIM_WEIGHT_PERSONALIZATION = 0.2


def similarity(a: ScenarioLabel, b: ScenarioLabel) -> float:
    """Weighted layer match in [0, 1]; 1 iff the canonical forms match."""
    score = 0.0
    if a.movement == b.movement:
        score += SIM_WEIGHT_MOVEMENT
    if a.environment.casefold() == b.environment.casefold():
        score += SIM_WEIGHT_ENVIRONMENT
    sa, sb = set(a.personalization), set(b.personalization)
    if not sa and not sb:
        jaccard = 1.0
    else:
        jaccard = len(sa & sb) / len(sa | sb)
    return score + SIM_WEIGHT_PERSONALIZATION * jaccard


@dataclass
class LabelContext:
    """What the engine knows when it needs a label: classified movement, an
    optional client-supplied scene hint, and the user's personal flags."""

    movement: MotionState
    environment_hint: Optional[str] = None
    flags: PersonalFlags = NEUTRAL_FLAGS


@dataclass
class LabelEntry:
    label: ScenarioLabel
    created_ms: int
    usage_count: int = 0
    confirmed: bool = False


class LabelTree:
    """Per-user set of known scenario labels with usage counts and a
    pending-confirmation flag on freshly generated ones."""

    def __init__(self):
        self._entries: dict[str, LabelEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    @staticmethod
    def _key(label: ScenarioLabel) -> str:
        return label.canonical().casefold()

    def insert(self, label: ScenarioLabel, now_ms: int = 0, confirmed: bool = False) -> LabelEntry:
        """Idempotent on canonical form: re-inserting bumps the usage count."""
        key = self._key(label)
        entry = self._entries.get(key)
        if entry is None:
            entry = LabelEntry(label=label, created_ms=now_ms, usage_count=1,
                               confirmed=confirmed)
            self._entries[key] = entry
        else:
            entry.usage_count += 1
            entry.confirmed = entry.confirmed or confirmed
        return entry

    def confirm(self, label: ScenarioLabel) -> LabelEntry:
        entry = self._entries.get(self._key(label))
        if entry is None:
            entry = self.insert(label, confirmed=True)
        else:
            entry.confirmed = True
        return entry

    def get(self, label: ScenarioLabel) -> Optional[LabelEntry]:
        return self._entries.get(self._key(label))

    def contains(self, label: ScenarioLabel) -> bool:
        return self._key(label) in self._entries

    def entries(self) -> list[LabelEntry]:
        return list(self._entries.values())

    def labels(self, confirmed_only: bool = False) -> list[ScenarioLabel]:
        return [
            e.label
            for e in self._entries.values()
            if e.confirmed or not confirmed_only
        ]


class Labeler(Protocol):
    """Pluggable label intelligence; the engine never depends on a remote one."""

    def select(self, context: LabelContext, candidates: Sequence[ScenarioLabel]) -> Optional[str]:
        """Return the canonical form of the best candidate, or None to decline."""
        ...

    def generate(self, context: LabelContext) -> str:
        """Return a new label in canonical form."""
        ...

    def edit(self, current: str, instruction: str) -> str:
        """Return the current label modified per the instruction, canonical form."""
        ...


def fallback_label(context: LabelContext) -> ScenarioLabel:
    """Deterministic label from context alone: classified movement, normalized
    hint (or "Unknown"), and one descriptor per raised personal flag."""
    env = _normalize_environment(context.environment_hint or "")
    if not env:
        env = "Unknown"
    return ScenarioLabel(
        movement=context.movement,
        environment=env,
        personalization=context.flags.descriptors(),
    )


def resolve_label(context: LabelContext, tree: LabelTree, labeler: Labeler) -> ScenarioLabel:
    """Select an existing label for the context, else generate a new one.

    Whatever the labeler answers is re-parsed and re-validated; a label that
    violates the invariants never escapes. Labeler failures degrade to the
    deterministic fallback.
    """
    try:
        candidates = tree.labels(confirmed_only=True)
        if candidates:
            answer = labeler.select(context, candidates)
            if answer is not None:
                try:
                    selected = parse_label(answer)
                except MalformedLabelerOutput:
                    selected = None
                if selected is not None and tree.contains(selected):
                    entry = tree.insert(selected)
                    return entry.label
        generated = parse_label(labeler.generate(context))
        tree.insert(generated, confirmed=False)
        return generated
    except (LabelerUnavailable, MalformedLabelerOutput):
        label = fallback_label(context)
        tree.insert(label, confirmed=False)
        return label


def edit_label(
    current: ScenarioLabel, instruction: str, labeler: Labeler
) -> tuple[ScenarioLabel, Optional[str]]:
    """Apply a free-text edit instruction via the labeler.

    Returns (label, warning). On unparseable labeler output the current label
    is returned unchanged with a warning message; LabelerUnavailable
    propagates to the caller.
    """
    if not instruction or not instruction.strip():
        raise ValueError("instruction must be non-empty")
    answer = labeler.edit(current.canonical(), instruction)
    try:
        return parse_label(answer), None
    except MalformedLabelerOutput as exc:
        return current, f"labeler output not in canonical form: {exc}"
