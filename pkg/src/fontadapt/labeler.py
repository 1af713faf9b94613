"""Labeler implementations.

FallbackLabeler is deterministic and dependency-free; it is what the engine
runs by default and what the tests exercise. RemoteLabeler talks to a
chat-completion endpoint using the versioned prompt templates shipped under
prompts/; any transport or protocol failure surfaces as LabelerUnavailable and
the caller degrades to the fallback.
"""

from __future__ import annotations

import re
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

from .errors import LabelerUnavailable
from .labels import LabelContext, ScenarioLabel, fallback_label, parse_label
from .sensing import MotionState

_PROMPT_DIR = Path(__file__).parent / "prompts"

PROMPT_NAMES = (
    "system_role",
    "step1",
    "step2",
    "step3",
    "example",
    "attention",
    "user_description_prompt",
    "user_step1",
    "user_step2",
    "format_attention",
    "select_label_role",
)


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    if name not in PROMPT_NAMES:
        raise KeyError(f"unknown prompt template {name!r}")
    return (_PROMPT_DIR / f"{name}.txt").read_text(encoding="utf-8")


def _env_tokens(text: str) -> set[str]:
    return {t for t in re.split(r"[^\w]+", text.casefold()) if t}


class FallbackLabeler:
    """Rule-based labeler: no network, bit-for-bit deterministic."""

    # select() accepts a candidate only with matching movement plus at least
    # this much combined environment/personalization evidence
    min_select_score = 0.55

    def select(
        self, context: LabelContext, candidates: Sequence[ScenarioLabel]
    ) -> Optional[str]:
        hint_tokens = _env_tokens(context.environment_hint or "")
        if not hint_tokens:
            return None
        wanted = set(fallback_label(context).personalization)
        best: Optional[tuple[float, str]] = None
        for cand in candidates:
            if cand.movement != context.movement:
                continue
            cand_tokens = _env_tokens(cand.environment)
            overlap = len(hint_tokens & cand_tokens) / len(hint_tokens | cand_tokens)
            if overlap == 0.0:
                continue
            have = set(cand.personalization)
            if not wanted and not have:
                desc_match = 1.0
            else:
                desc_match = len(wanted & have) / len(wanted | have)
            score = 0.5 + 0.3 * overlap + 0.2 * desc_match
            if score < self.min_select_score:
                continue
            if best is None or score > best[0] or (
                score == best[0] and cand.canonical() < best[1]
            ):
                best = (score, cand.canonical())
        return best[1] if best else None

    def generate(self, context: LabelContext) -> str:
        return fallback_label(context).canonical()

    def edit(self, current: str, instruction: str) -> str:
        label = parse_label(current)
        movement = label.movement
        environment = label.environment
        descriptors = list(label.personalization)
        text = " ".join(instruction.strip().split())
        low = text.casefold()

        if re.search(r"\brunning\b", low):
            movement = MotionState.RUNNING
        elif re.search(r"\bwalking\b", low):
            movement = MotionState.WALKING
        elif re.search(r"\b(still|standing|sitting)\b", low):
            movement = MotionState.STILL

        not_wearing = re.search(r"\bnot wearing (?:my |any )?([\w\s]+?)[.!?]?$", low)
        wearing = re.search(r"\bwearing ([\w\s]+?)[.!?]?$", low)
        if not_wearing:
            desc = f"no {not_wearing.group(1).strip()}"
            if desc not in descriptors:
                descriptors.append(desc)
        elif wearing:
            desc = f"wearing {wearing.group(1).strip()}"
            if desc not in descriptors:
                descriptors.append(desc)

        in_env = re.search(r"\bin (?:(?:an|a|the)\s+)?([\w\s]+?)[.!?]?$", low)
        if in_env and not not_wearing and not wearing:
            environment = in_env.group(1).strip()

        return ScenarioLabel(movement, environment, tuple(descriptors)).canonical()


class RemoteLabeler:
    """Chat-completion-backed labeler carrying the shipped prompt templates.

    Request body follows the common chat-completions shape; the response is
    expected to contain a single line in the canonical label grammar.
    """

    def __init__(
        self,
        base_url: str,
        model: str = "gpt-4o",
        api_key: Optional[str] = None,
        timeout_s: float = 10.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout_s = timeout_s

    def _chat(self, messages: list[dict]) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(
                f"{self.base_url}/v1/chat/completions",
                json={"model": self.model, "messages": messages, "temperature": 0},
                headers=headers,
                timeout=self.timeout_s,
            )
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"].strip()
        except Exception as exc:
            raise LabelerUnavailable(str(exc)) from exc

    @staticmethod
    def _context_block(context: LabelContext) -> str:
        lines = [f"movement status: {context.movement.value}"]
        if context.environment_hint:
            lines.append(f"location information: {context.environment_hint}")
        descs = context.flags.descriptors()
        if descs:
            lines.append(f"personal factors: {', '.join(descs)}")
        return "\n".join(lines)

    def select(
        self, context: LabelContext, candidates: Sequence[ScenarioLabel]
    ) -> Optional[str]:
        listing = "\n".join(c.canonical() for c in candidates)
        messages = [
            {"role": "system", "content": load_prompt("select_label_role")},
            {
                "role": "user",
                "content": "\n".join(
                    [
                        self._context_block(context),
                        load_prompt("step3"),
                        listing,
                        load_prompt("attention"),
                    ]
                ),
            },
        ]
        answer = self._chat(messages)
        return answer or None

    def generate(self, context: LabelContext) -> str:
        messages = [
            {"role": "system", "content": load_prompt("system_role")},
            {
                "role": "user",
                "content": "\n".join(
                    [
                        load_prompt("step1"),
                        load_prompt("step2"),
                        self._context_block(context),
                        load_prompt("example"),
                        load_prompt("attention"),
                    ]
                ),
            },
        ]
        return self._chat(messages)

    def edit(self, current: str, instruction: str) -> str:
        messages = [
            {"role": "system", "content": load_prompt("user_step1")},
            {
                "role": "user",
                "content": "\n".join(
                    [
                        load_prompt("user_description_prompt"),
                        current,
                        load_prompt("user_step2"),
                        instruction,
                        load_prompt("format_attention"),
                    ]
                ),
            },
        ]
        return self._chat(messages)


class OfflineLabeler:
    """Always-unavailable labeler; forces the fallback path (useful in tests
    and as an explicit 'no remote' configuration)."""

    def select(self, context, candidates):
        raise LabelerUnavailable("labeler disabled")

    def generate(self, context):
        raise LabelerUnavailable("labeler disabled")

    def edit(self, current, instruction):
        raise LabelerUnavailable("labeler disabled")
