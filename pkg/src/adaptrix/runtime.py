"""A live, in-process message-routing service built from an assembly.

Each instance gets a behavior object.  A message entering through an export
walks the connections; on arrival at an instance its active preconditions are
enforced against the message tags (the runtime mirror of the adaptation
axiom), the behavior runs, and on the way out every parameter the profile
mentions is reset to the value its postconditions supply, or dropped when
they supply none, just as static propagation cuts the flow there.

Deliveries and reconfigurations share one lock: reconfigure() drains the
queue before touching the assembly, so no message is ever in flight while the
structure changes.
"""
from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .assembly import AdaptationAction, Assembly, Node, Remove, Replace, apply_actions
from .errors import BehaviorMissing, BehaviorRejected, UnroutableMessage
from .profile import PRECONDITION, ProfilePoint, Truth, evaluate_condition


@dataclass(frozen=True)
class Message:
    payload: str
    tags: Mapping[str, str] = field(default_factory=dict)
    trace: tuple[str, ...] = ()

    def visit(self, instance: str) -> "Message":
        return replace(self, trace=self.trace + (instance,))

    def retag(self, **tags: str) -> "Message":
        merged = dict(self.tags)
        merged.update(tags)
        return replace(self, tags=merged)


@dataclass(frozen=True)
class StoredMessage:
    seq: int
    payload: str
    tags: Mapping[str, str]

    def dump(self, parameter: str = "langue") -> str:
        return f"{self.seq}\t{self.tags.get(parameter, '')}\t{self.payload}"


@dataclass(frozen=True)
class DeliveryOutcome:
    export: str
    trace: tuple[str, ...]
    payload: str
    tags: Mapping[str, str]
    result: object = None


# -- dictionaries ----------------------------------------------------------

def parse_dictionary(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        src, _, dst = line.partition("\t")
        if src and dst:
            out[src.strip().lower()] = dst.strip()
    return out


def bundled_dictionaries() -> dict[tuple[str, str], dict[str, str]]:
    out = {}
    root = resources.files("adaptrix") / "data" / "dictionaries"
    for entry in root.iterdir():
        name = entry.name
        if name.endswith(".tsv") and "_" in name:
            src, dst = name[:-4].split("_", 1)
            out[(src, dst)] = parse_dictionary(entry.read_text(encoding="utf-8"))
    return out


def load_dictionaries(directory) -> dict[tuple[str, str], dict[str, str]]:
    out = {}
    for path in sorted(Path(directory).glob("*_*.tsv")):
        src, dst = path.stem.split("_", 1)
        out[(src, dst)] = parse_dictionary(path.read_text(encoding="utf-8"))
    return out


def translate_text(text: str, dictionary: Mapping[str, str]) -> str:
    words = []
    for w in text.split():
        hit = dictionary.get(w.lower())
        words.append(hit if hit is not None else f"[{w}]")
    return " ".join(words)


# -- behaviors -------------------------------------------------------------

@dataclass
class Port:
    """What a behavior sees of its instance for one delivery."""

    instance: str
    interface: str
    outputs: tuple[str, ...]
    points: tuple[ProfilePoint, ...]
    dictionaries: Mapping[tuple[str, str], Mapping[str, str]]

    def only_output(self) -> str:
        if len(self.outputs) != 1:
            raise UnroutableMessage(f"{self.instance} has {len(self.outputs)} outputs; cannot pick one")
        return self.outputs[0]


Call = Callable[[str, Message], object]


class Behavior:
    def handle(self, port: Port, message: Message, call: Call):
        raise NotImplementedError


class Passthrough(Behavior):
    def handle(self, port, message, call):
        if not port.outputs:  # a terminal instance absorbs the message
            return None
        return call(port.only_output(), message)


class Compose(Passthrough):
    """Wraps user text into a message for the rest of the service."""

    def handle(self, port, message, call):
        return call(port.only_output(), replace(message, payload=" ".join(message.payload.split())))


class Translate(Behavior):
    def handle(self, port, message, call):
        pres = {p.parameter: p.value for p in port.points if p.kind == PRECONDITION}
        posts = {p.parameter: p.value for p in port.points if p.supplies}
        payload = message.payload
        for param in sorted(pres.keys() & posts.keys()):
            table = port.dictionaries.get((pres[param], posts[param]), {})
            payload = translate_text(payload, table)
        return call(port.only_output(), replace(message, payload=payload))


class Forum(Behavior):
    """Append-only message store; ``read``-style ports list it."""

    def __init__(self):
        self.store: list[StoredMessage] = []

    def handle(self, port, message, call):
        if port.interface == "read":
            return list(self.store)
        entry = StoredMessage(len(self.store) + 1, message.payload, dict(message.tags))
        self.store.append(entry)
        return entry

    def dump(self, parameter: str = "langue") -> list[str]:
        return [m.dump(parameter) for m in self.store]


class Visualize(Behavior):
    """Lists stored messages whose tags agree with the reader's."""

    def handle(self, port, message, call):
        stored = call(port.only_output(), message) or []
        return [m for m in stored
                if all(m.tags.get(k, v) == v for k, v in message.tags.items())]


BEHAVIORS: dict[str, Callable[[], Behavior]] = {
    "passthrough": Passthrough,
    "proxy": Passthrough,
    "compose": Compose,
    "translate": Translate,
    "forum": Forum,
    "visualize": Visualize,
}


# -- the service -----------------------------------------------------------

@dataclass
class _Ticket:
    export: str
    message: Message
    outcome: DeliveryOutcome | None = None
    error: Exception | None = None


class RuntimeService:
    def __init__(self, assembly: Assembly, registry, dictionaries=None):
        self.registry = registry
        self.dictionaries = dict(bundled_dictionaries() if dictionaries is None else dictionaries)
        self.assembly = assembly
        self.behaviors: dict[str, Behavior] = {}
        self._lock = threading.RLock()
        self._queue: deque[_Ticket] = deque()
        self.delivered = 0
        self._sync(assembly, replaced=())

    def _make(self, iid: str, assembly: Assembly) -> Behavior:
        desc = self.registry.descriptors[assembly.instances[iid].descriptor]
        factory = BEHAVIORS.get(desc.behavior or "")
        if factory is None:
            raise BehaviorMissing(f"{iid} ({desc.name}): no behavior {desc.behavior!r}")
        return factory()

    def _sync(self, assembly: Assembly, replaced: Iterable[str]) -> None:
        fresh = {}
        for iid in assembly.instances:
            if iid in self.behaviors and iid not in replaced:
                fresh[iid] = self.behaviors[iid]
            else:
                fresh[iid] = self._make(iid, assembly)
        self.behaviors = fresh

    # delivery

    def send(self, export: str, message: Message) -> DeliveryOutcome:
        ticket = _Ticket(export, message)
        with self._lock:
            self._queue.append(ticket)
            self._drain()
        if ticket.error is not None:
            raise ticket.error
        return ticket.outcome

    def _drain(self) -> None:
        while self._queue:
            t = self._queue.popleft()
            try:
                t.outcome = self._deliver(t.export, t.message)
                self.delivered += 1
            except Exception as exc:  # surfaced to the sender, never lost
                t.error = exc

    def _deliver(self, export_name: str, message: Message) -> DeliveryOutcome:
        a = self.assembly
        exp = a.export(export_name)
        if exp is None:
            raise UnroutableMessage(f"no export {export_name!r}")
        last: list[Message] = [message]

        def arrive(node: Node, msg: Message):
            inst = a.instances[node.instance]
            points = tuple(self.registry.profile(inst.descriptor).active_points(inst.mode_map))
            here = [p for p in points if p.interface == node.interface]
            msg = msg.visit(node.instance)
            last[0] = msg
            for p in here:
                if p.kind == PRECONDITION and evaluate_condition(p.condition, msg.tags) is Truth.FAILS:
                    raise BehaviorRejected(node.instance, p.parameter, p.value, msg.tags.get(p.parameter))
            desc = self.registry.descriptors[inst.descriptor]
            port = Port(node.instance, node.interface, tuple(s.name for s in desc.required),
                        tuple(here), self.dictionaries)
            # parameters this instance decides leave with its own value, or none
            decided = {p.parameter for p in points}
            supplied = {p.parameter: p.value for p in points if p.supplies}

            def call(out_iface: str, out: Message):
                conn = a.connection_from(Node(node.instance, out_iface))
                if conn is None:
                    raise UnroutableMessage(f"{node.instance}.{out_iface} is not connected")
                if decided:
                    tags = {k: v for k, v in out.tags.items() if k not in decided}
                    tags.update(supplied)
                    out = replace(out, tags=tags)
                return arrive(conn.target, out)

            return self.behaviors[node.instance].handle(port, msg, call)

        result = arrive(Node(exp.instance, exp.interface), message)
        final = last[0]
        return DeliveryOutcome(export_name, final.trace, final.payload, dict(final.tags), result)

    # reconfiguration

    def reconfigure(self, actions: Iterable[AdaptationAction] | object) -> Assembly:
        """Apply a plan (or a list of actions) atomically between deliveries."""
        actions = tuple(getattr(actions, "actions", actions))
        with self._lock:
            self._drain()
            new = apply_actions(self.assembly, actions, self.registry)
            replaced = {a.instance for a in actions if isinstance(a, (Replace, Remove))}
            self._sync(new, replaced)
            self.assembly = new
            return new

    # inspection

    def state_of(self, iid: str) -> Behavior:
        return self.behaviors[iid]

    def forums(self) -> dict[str, Forum]:
        return {k: b for k, b in self.behaviors.items() if isinstance(b, Forum)}

    def forum(self) -> Forum:
        forums = self.forums()
        if len(forums) != 1:
            raise LookupError(f"expected exactly one forum, found {sorted(forums)}")
        return next(iter(forums.values()))


def instantiate(assembly: Assembly, registry, dictionaries=None) -> RuntimeService:
    return RuntimeService(assembly, registry, dictionaries)
