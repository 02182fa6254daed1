"""Context sources and the monitor -> adapter -> assembler loop."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .adapter import DEFAULT_MAX_CHAIN, AdaptationReport, Policy, adapt, auto_policy
from .errors import AdaptationFailed
from .profile import ContextProfile
from .runtime import RuntimeService


@dataclass(frozen=True)
class ContextChange:
    parameter: str
    value: str


class ContextMonitor:
    """Holds the observed user profile and publishes assignment events."""

    def __init__(self, context: ContextProfile | None = None):
        self.context = context or ContextProfile()
        self._listeners: list[Callable[[ContextChange, ContextProfile], None]] = []

    def subscribe(self, listener: Callable[[ContextChange, ContextProfile], None]) -> None:
        self._listeners.append(listener)

    def set(self, parameter: str, value: str) -> None:
        self.context = self.context.with_value(parameter, value)
        event = ContextChange(parameter, value)
        for listener in list(self._listeners):
            listener(event, self.context)

    def load(self, ctx: ContextProfile) -> None:
        for name, value in ctx:
            self.set(name, value)


class LanguageDetector:
    """Guess a text's language by dictionary membership voting.

    Each known word votes for every language whose vocabulary contains it;
    ties go to the alphabetically first language.
    """

    def __init__(self, dictionaries: Mapping[tuple[str, str], Mapping[str, str]]):
        vocab: dict[str, set[str]] = {}
        for (src, dst), table in dictionaries.items():
            vocab.setdefault(src, set()).update(w.lower() for w in table)
            vocab.setdefault(dst, set()).update(w.lower() for w in table.values())
        self.vocabularies = vocab

    def detect(self, text: str) -> str | None:
        votes = Counter()
        for word in text.lower().split():
            for lang, words in self.vocabularies.items():
                if word in words:
                    votes[lang] += 1
        if not votes:
            return None
        best = max(votes.values())
        return min(lang for lang, n in votes.items() if n == best)


@dataclass
class AdaptationEvent:
    change: ContextChange | None
    report: AdaptationReport
    error: AdaptationFailed | None = None


@dataclass
class AdaptationLoop:
    """Re-adapts the running service whenever the monitored context changes."""

    runtime: RuntimeService
    monitor: ContextMonitor = field(default_factory=ContextMonitor)
    policy: Policy = auto_policy
    max_chain: int = DEFAULT_MAX_CHAIN
    history: list[AdaptationEvent] = field(default_factory=list)

    def __post_init__(self):
        self.monitor.subscribe(self._on_change)

    @property
    def context(self) -> ContextProfile:
        return self.monitor.context

    def _on_change(self, change: ContextChange, ctx: ContextProfile) -> None:
        self.adapt(change)

    def adapt(self, change: ContextChange | None = None) -> AdaptationEvent:
        registry = self.runtime.registry
        try:
            _, report = adapt(self.runtime.assembly, self.context, registry,
                              self.policy, self.max_chain)
        except AdaptationFailed as exc:
            event = AdaptationEvent(change, exc.report or AdaptationReport(), exc)
        else:
            if report.chosen_plan is not None:
                self.runtime.reconfigure(report.chosen_plan)
            event = AdaptationEvent(change, report)
        self.history.append(event)
        return event
