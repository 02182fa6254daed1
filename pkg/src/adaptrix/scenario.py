"""Scripted, reproducible runs of the adaptive service.

A scenario is one step per line (``#`` comments, shell-style quoting)::

    load-registry ../fixtures/forum-registry
    deploy ../fixtures/forum.adl
    set-context langue FR
    expect-violations 1
    expect-plan INSERT TranslationFR_EN
    send C.ihm "bonjour le monde"
    expect-store "1\\tEN\\thello the world"

Relative paths resolve against the scenario file's directory.
"""
from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path

from .adapter import DEFAULT_MAX_CHAIN, AdaptationReport, Policy, auto_policy
from .assembly import parse_adl
from .errors import AdaptrixError, ExpectationFailed, FormatError, RuntimeFault, ScenarioError
from .monitors import AdaptationLoop, ContextMonitor, LanguageDetector
from .registry import load_registry
from .runtime import Message, instantiate

VERBS = {
    "load-registry", "deploy", "set-context", "detect-language", "adapt", "send",
    "expect-violations", "expect-plan", "expect-store", "expect-rejected", "expect-trace",
}


@dataclass(frozen=True)
class Step:
    lineno: int
    verb: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return " ".join([self.verb, *(shlex.quote(a) for a in self.args)])


@dataclass(frozen=True)
class ScenarioScript:
    steps: tuple[Step, ...]
    base_dir: Path = Path(".")
    name: str = "scenario"


def parse_scenario(text: str, base_dir=".", name: str = "scenario") -> ScenarioScript:
    steps = []
    deployed = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        try:
            toks = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
        if not toks:
            continue
        verb, args = toks[0], tuple(toks[1:])
        if verb not in VERBS:
            raise FormatError(f"unknown step {verb!r}", lineno)
        if verb == "deploy":
            deployed = True
        elif verb in ("send", "adapt") and not deployed:
            raise FormatError(f"{verb} before deploy", lineno)
        steps.append(Step(lineno, verb, args))
    return ScenarioScript(tuple(steps), Path(base_dir), name)


def load_scenario(path) -> ScenarioScript:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), path.parent, path.name)


@dataclass(frozen=True)
class Expectation:
    step: int
    ok: bool
    expected: object
    actual: object


@dataclass
class ScenarioResult:
    transcript: list[str] = field(default_factory=list)
    expectations: list[Expectation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.expectations)

    def text(self) -> str:
        return "\n".join(self.transcript) + "\n"

    def raise_for_failures(self) -> None:
        for e in self.expectations:
            if not e.ok:
                raise ExpectationFailed(e.step, e.expected, e.actual)


def _action_matches(expected: str, rendered: str) -> bool:
    return rendered == expected or rendered.startswith(expected + "@")


def plan_matches(expected: str, report: AdaptationReport | None) -> bool:
    chosen = report.chosen_plan if report else None
    if expected.upper() == "NONE":
        return chosen is None
    if chosen is None:
        return False
    wanted = [e.strip() for e in expected.split(";")]
    got = [str(a) for a in chosen.actions]
    return len(wanted) == len(got) and all(_action_matches(w, g) for w, g in zip(wanted, got))


class _Runner:
    def __init__(self, script: ScenarioScript, policy: Policy, max_chain: int):
        self.script = script
        self.policy = policy
        self.max_chain = max_chain
        self.result = ScenarioResult()
        self.registry = None
        self.loop: AdaptationLoop | None = None
        self.monitor = ContextMonitor()
        self.last_send: tuple[str, object] | None = None

    def out(self, line: str) -> None:
        self.result.transcript.append(line)

    def path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.script.base_dir / q

    def expect(self, step: Step, ok: bool, expected, actual) -> None:
        self.result.expectations.append(Expectation(step.lineno, ok, expected, actual))
        self.out(f"{step.lineno} {step} -> " + ("PASS" if ok else f"FAIL (got {actual!r})"))

    @property
    def last_report(self) -> AdaptationReport | None:
        if self.loop is None or not self.loop.history:
            return None
        return self.loop.history[-1].report

    def report_lines(self, event) -> None:
        for line in event.report.render().splitlines():
            self.out(f"  {line}")

    def run(self) -> ScenarioResult:
        self.out(f"# scenario {self.script.name}")
        for step in self.script.steps:
            try:
                getattr(self, "do_" + step.verb.replace("-", "_"))(step)
            except AdaptrixError as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise ScenarioError(step.lineno, f"{step.verb}: {exc}") from exc
        return self.result

    # steps

    def do_load_registry(self, step: Step) -> None:
        if not step.args:
            raise FormatError("load-registry needs a directory", step.lineno)
        self.registry = load_registry(*(self.path(a) for a in step.args))
        self.out(f"{step.lineno} {step} -> {len(self.registry)} descriptors")

    def do_deploy(self, step: Step) -> None:
        if self.registry is None:
            raise FormatError("deploy before load-registry", step.lineno)
        assembly = parse_adl(self.path(step.args[0]).read_text(encoding="utf-8"), self.registry)
        runtime = instantiate(assembly, self.registry)
        self.monitor = ContextMonitor(self.monitor.context)
        self.loop = AdaptationLoop(runtime, self.monitor, self.policy, self.max_chain)
        self.out(f"{step.lineno} {step} -> assembly {assembly.name}: "
                 f"{len(assembly.local_instances)} instances, "
                 f"{len(assembly.local_connections)} local connections")

    def do_set_context(self, step: Step) -> None:
        if len(step.args) != 2:
            raise FormatError("set-context PARAM VALUE", step.lineno)
        self.out(f"{step.lineno} {step}")
        self._set(*step.args)

    def _set(self, param: str, value: str) -> None:
        before = len(self.loop.history) if self.loop else 0
        self.monitor.set(param, value)
        if self.loop:
            for event in self.loop.history[before:]:
                self.report_lines(event)

    def do_detect_language(self, step: Step) -> None:
        payload = step.args[0]
        param = step.args[1] if len(step.args) > 1 else "langue"
        dictionaries = self.loop.runtime.dictionaries if self.loop else {}
        lang = LanguageDetector(dictionaries).detect(payload)
        self.out(f"{step.lineno} {step} -> {lang or 'unknown'}")
        if lang:
            self._set(param, lang)

    def do_adapt(self, step: Step) -> None:
        self.out(f"{step.lineno} {step}")
        self.report_lines(self.loop.adapt())

    def do_send(self, step: Step) -> None:
        if len(step.args) < 2:
            raise FormatError("send EXPORT PAYLOAD [PARAM=VALUE...]", step.lineno)
        export, payload = step.args[:2]
        tags = dict(self.monitor.context.assignments)
        for kv in step.args[2:]:
            k, eq, v = kv.partition("=")
            if not eq:
                raise FormatError(f"bad tag {kv!r}", step.lineno)
            tags[k] = v
        try:
            outcome = self.loop.runtime.send(export, Message(payload, tags))
        except RuntimeFault as exc:
            self.last_send = ("rejected", exc)
            self.out(f"{step.lineno} {step} -> REJECTED {exc}")
            return
        self.last_send = ("delivered", outcome)
        shown = ",".join(f"{k}={v}" for k, v in sorted(outcome.tags.items()))
        self.out(f"{step.lineno} {step} -> delivered trace={'>'.join(outcome.trace)} "
                 f"tags={shown} payload={outcome.payload!r}")

    def do_expect_violations(self, step: Step) -> None:
        want = int(step.args[0])
        report = self.last_report
        got = len(report.violations) if report else 0
        self.expect(step, got == want, want, got)

    def do_expect_plan(self, step: Step) -> None:
        want = " ".join(step.args)
        report = self.last_report
        got = report.chosen_plan.render_actions() if report and report.chosen_plan else "NONE"
        if report and report.status == "unsatisfiable":
            got = "UNSATISFIABLE"
        self.expect(step, plan_matches(want, report), want, got)

    def do_expect_store(self, step: Step) -> None:
        want = [a.replace("\\t", "\t") for a in step.args]
        got = self.loop.runtime.forum().dump()
        self.expect(step, got == want, want, got)

    def do_expect_rejected(self, step: Step) -> None:
        got = self.last_send[0] if self.last_send else "nothing sent"
        self.expect(step, got == "rejected", "rejected", got)

    def do_expect_trace(self, step: Step) -> None:
        got = None
        if self.last_send and self.last_send[0] == "delivered":
            got = list(self.last_send[1].trace)
        self.expect(step, got == list(step.args), list(step.args), got)


def run_scenario(script: ScenarioScript, policy: Policy = auto_policy,
                 max_chain: int = DEFAULT_MAX_CHAIN) -> ScenarioResult:
    return _Runner(script, policy, max_chain).run()
