"""Propagation of profile conditions over an assembly and the adaptation axiom.

Every interface endpoint (and every composite export) is a node.  Data flows
along connections (caller's required -> callee's provided), from a provided
export into the composite, and, inside an instance, from each provided to each
required interface.  For a given parameter the internal hop is cut when the
instance has an active point on that parameter: such a component decides the
value itself.

Values travel as labels.  A *supplied* label (from a postcondition or from
the context at a ui export) moves forward along data flow; a *required*
label (from a precondition) moves backward.  The valuation is the least
fixpoint of that closure, so it does not depend on rule order.
"""
from __future__ import annotations

import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable

from .assembly import PROVIDED, REQUIRED, Assembly, Node
from .errors import NonTermination
from .profile import PRECONDITION, ContextProfile

CONTEXT = "context"


@dataclass(frozen=True, order=True)
class Label:
    value: str
    origin: str
    anchor: Node
    kind: str  # "context" | "pre" | "post"

    def __str__(self) -> str:
        return f"{self.value}@{self.origin}"


@dataclass(frozen=True)
class FlowState:
    supplied: frozenset[Label] = frozenset()
    required: frozenset[Label] = frozenset()

    @property
    def status(self) -> str:
        if self.conflicts():
            return "conflict"
        if self.supplied and self.required:
            return "satisfied"
        if self.supplied:
            return "supplied"
        if self.required:
            return "required"
        return "unknown"

    def conflicts(self) -> list[tuple[str, Label, Label]]:
        out = []
        for s in sorted(self.supplied):
            for r in sorted(self.required):
                if s.value != r.value:
                    out.append(("demand", s, r))
        sup = sorted(self.supplied)
        for i, a in enumerate(sup):
            for b in sup[i + 1:]:
                if a.value != b.value:
                    out.append(("supply", a, b))
        return out


@dataclass(frozen=True)
class FlowEdge:
    src: Node
    dst: Node
    kind: str  # "connection" | "remote" | "export" | "internal"
    id: str
    msgtype: str | None = None
    owner: str | None = None  # instance owning an internal edge


@dataclass
class FlowGraph:
    nodes: list[Node]
    edges: list[FlowEdge]
    # instance -> parameters it decides (internal hop cut)
    opaque: dict[str, set[str]]

    def edges_for(self, parameter: str) -> list[FlowEdge]:
        return [e for e in self.edges
                if e.kind != "internal" or parameter not in self.opaque.get(e.owner, ())]


def build_flow_graph(assembly: Assembly, registry) -> FlowGraph:
    nodes: list[Node] = []
    edges: list[FlowEdge] = []
    opaque: dict[str, set[str]] = {}
    for iid, inst in sorted(assembly.instances.items()):
        desc = registry.descriptors[inst.descriptor]
        prov = [Node(iid, s.name) for s in desc.provided]
        req = [Node(iid, s.name) for s in desc.required]
        nodes += prov + req
        for p in prov:
            for r in req:
                edges.append(FlowEdge(p, r, "internal", f"{p}->{r}", owner=iid))
        points = registry.profile(inst.descriptor).active_points(inst.mode_map)
        opaque[iid] = {pt.parameter for pt in points}
    for c in assembly.connections:
        sig, _ = registry.descriptors[assembly.instances[c.src].descriptor].interface(c.src_iface)
        # links to remote components belong to the connector, not to the composite
        remote = assembly.instances[c.src].remote or assembly.instances[c.dst].remote
        edges.append(FlowEdge(c.source, c.target, "remote" if remote else "connection",
                              c.id, sig.msgtype))
    for e in assembly.exports:
        b = assembly.boundary_node(e)
        inner = Node(e.instance, e.interface)
        sig, kind = registry.descriptors[assembly.instances[e.instance].descriptor].interface(e.interface)
        nodes.append(b)
        if kind == PROVIDED:
            edges.append(FlowEdge(b, inner, "export", f"{b}->{inner}", sig.msgtype))
        else:
            edges.append(FlowEdge(inner, b, "export", f"{inner}->{b}", sig.msgtype))
    return FlowGraph(nodes, edges, opaque)


@dataclass
class FlowValuation:
    assembly: Assembly
    graph: FlowGraph
    parameters: tuple[str, ...]
    states: dict[tuple[Node, str], FlowState]
    seeds: dict[tuple[Node, str], FlowState]
    iterations: int = 0

    def state(self, node: Node, parameter: str) -> FlowState:
        return self.states.get((node, parameter), FlowState())

    @property
    def flow_count(self) -> int:
        return len(self.graph.nodes) * len(self.parameters)

    def snapshot(self) -> dict:
        """Order-free comparable view (empty flows dropped)."""
        return {k: v for k, v in self.states.items() if v.supplied or v.required}

    def regions(self, parameter: str) -> list[frozenset[Node]]:
        """Undirected connected components of the parameter's flow graph."""
        adj: dict[Node, set[Node]] = defaultdict(set)
        for e in self.graph.edges_for(parameter):
            adj[e.src].add(e.dst)
            adj[e.dst].add(e.src)
        seen: set[Node] = set()
        out = []
        for n in sorted(self.graph.nodes, key=str):
            if n in seen:
                continue
            comp, todo = set(), [n]
            while todo:
                x = todo.pop()
                if x in comp:
                    continue
                comp.add(x)
                todo.extend(adj[x] - comp)
            seen |= comp
            out.append(frozenset(comp))
        return out


def _seed(assembly: Assembly, registry, ctx: ContextProfile, parameters) -> list:
    """Seeding rule applications: (node, parameter, side, label)."""
    rules = []
    for iid, inst in sorted(assembly.instances.items()):
        desc = registry.descriptors[inst.descriptor]
        outputs = [Node(iid, s.name) for s in desc.required]
        for pt in registry.profile(inst.descriptor).active_points(inst.mode_map):
            origin = f"{iid}.{pt.interface}"
            here = Node(iid, pt.interface)
            if pt.kind == PRECONDITION:
                rules.append((here, pt.parameter, "required", Label(pt.value, origin, here, "pre")))
            elif pt.supplies:
                # the returned value leaves through the instance's outputs;
                # a sink hands it back at the point itself
                for out in outputs or [here]:
                    rules.append((out, pt.parameter, "supplied", Label(pt.value, origin, out, "post")))
    for e in assembly.exports:
        if not e.ui:
            continue
        kind = registry.descriptors[assembly.instances[e.instance].descriptor].interface(e.interface)[1]
        if kind != PROVIDED:
            continue
        b = assembly.boundary_node(e)
        for p, v in ctx:
            rules.append((b, p, "supplied", Label(v, CONTEXT, b, "context")))
    return [r for r in rules if r[1] in parameters]


def _parameters(assembly: Assembly, registry, ctx: ContextProfile) -> tuple[str, ...]:
    params = {p for p, _ in ctx}
    for inst in assembly.instances.values():
        params |= {pt.parameter for pt in registry.profile(inst.descriptor).active_points(inst.mode_map)}
    return tuple(sorted(params))


def propagate(assembly: Assembly, registry, ctx: ContextProfile | None = None,
              rng: random.Random | None = None) -> FlowValuation:
    """Least fixpoint of the propagation rules.

    ``rng`` shuffles the application order of the seeding rules and of the
    edge rules within every sweep; the result must not depend on it.
    """
    ctx = ctx or ContextProfile()
    graph = build_flow_graph(assembly, registry)
    params = _parameters(assembly, registry, ctx)
    supplied: dict[tuple[Node, str], set[Label]] = defaultdict(set)
    required: dict[tuple[Node, str], set[Label]] = defaultdict(set)

    seeds = _seed(assembly, registry, ctx, set(params))
    if rng is not None:
        rng.shuffle(seeds)
    for node, p, side, label in seeds:
        (supplied if side == "supplied" else required)[(node, p)].add(label)
    seed_view = {
        k: FlowState(frozenset(supplied.get(k, ())), frozenset(required.get(k, ())))
        for k in set(supplied) | set(required)
    }

    rules = [(p, e) for p in params for e in graph.edges_for(p)]
    n_flows = len(graph.nodes) * len(params)
    cap = 10 * max(n_flows, 1)
    iterations = 0
    while True:
        if rng is not None:
            rng.shuffle(rules)
        changed = False
        for p, e in rules:
            fwd = supplied.get((e.src, p))
            if fwd and not fwd <= supplied[(e.dst, p)]:
                supplied[(e.dst, p)] |= fwd
                changed = True
            back = required.get((e.dst, p))
            if back and not back <= required[(e.src, p)]:
                required[(e.src, p)] |= back
                changed = True
        if not changed:
            break
        iterations += 1
        if iterations > cap:
            raise NonTermination(f"no fixpoint after {cap} sweeps")

    states = {}
    for key in set(supplied) | set(required):
        s, r = frozenset(supplied.get(key, ())), frozenset(required.get(key, ()))
        if s or r:
            states[key] = FlowState(s, r)
    return FlowValuation(assembly, graph, params, states, seed_view, iterations)


# -- service profile -------------------------------------------------------

@dataclass(frozen=True, order=True)
class BoundaryCondition:
    export: str
    parameter: str
    role: str  # "required" | "supplied"
    value: str
    origin: str

    def __str__(self) -> str:
        return f"{self.export}: {self.role} {self.parameter}='{self.value}' ({self.origin})"


@dataclass(frozen=True)
class ServiceProfile:
    conditions: tuple[BoundaryCondition, ...] = ()

    def at(self, export: str) -> list[BoundaryCondition]:
        return [c for c in self.conditions if c.export == export]


def compose_service_profile(assembly: Assembly, registry) -> ServiceProfile:
    fv = propagate(assembly, registry, ContextProfile())
    out = set()
    for e in assembly.exports:
        b = assembly.boundary_node(e)
        for p in fv.parameters:
            st = fv.state(b, p)
            for lab in st.required:
                out.add(BoundaryCondition(e.name, p, "required", lab.value, lab.origin))
            for lab in st.supplied:
                out.add(BoundaryCondition(e.name, p, "supplied", lab.value, lab.origin))
    return ServiceProfile(tuple(sorted(out)))


# -- adaptation axiom ------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    parameter: str
    path: tuple[Node, ...]
    supplied: Label
    required: Label
    kind: str = "demand"  # "supply" when two supplied values collide
    pairs: frozenset = field(default=frozenset(), compare=False)
    region: frozenset = field(default=frozenset(), compare=False)

    def __str__(self) -> str:
        other = "required" if self.kind == "demand" else "supplied"
        path = "->".join(str(n) for n in self.path)
        return (f"VIOLATION {self.parameter} supplied={self.supplied} "
                f"{other}={self.required} path={path}")


def shortest_path(edges: Iterable[FlowEdge], src: Node, dst: Node) -> tuple[Node, ...] | None:
    succ: dict[Node, list[Node]] = defaultdict(list)
    for e in edges:
        succ[e.src].append(e.dst)
    prev = {src: None}
    q = deque([src])
    while q:
        x = q.popleft()
        if x == dst:
            path = []
            while x is not None:
                path.append(x)
                x = prev[x]
            return tuple(reversed(path))
        for y in sorted(succ[x], key=str):
            if y not in prev:
                prev[y] = x
                q.append(y)
    return None


def _pair_key(kind, a: Label, b: Label):
    return (kind != "demand", a.value, a.origin, str(a.anchor), b.value, b.origin, str(b.anchor))


def check_axioms(fv: FlowValuation) -> list[Violation]:
    """One violation per (parameter, connected flow region) holding a conflict."""
    violations = []
    for p in fv.parameters:
        edges = fv.graph.edges_for(p)
        for region in fv.regions(p):
            found = []
            for node in sorted(region, key=str):
                for kind, a, b in fv.state(node, p).conflicts():
                    found.append((kind, a, b, node))
            if not found:
                continue
            pairs = frozenset((kind, a, b) for kind, a, b, _ in found)
            kind, a, b, node = min(found, key=lambda f: _pair_key(*f[:3]) + (str(f[3]),))
            if kind == "demand":
                path = shortest_path(edges, a.anchor, b.anchor)
            else:
                path = shortest_path(edges, a.anchor, node)
            violations.append(Violation(p, path or (node,), a, b, kind, pairs, region))
    violations.sort(key=lambda v: (v.parameter, _pair_key(v.kind, v.supplied, v.required)))
    return violations


def resolved(before: Violation, after: Iterable[Violation]) -> bool:
    """True when none of ``before``'s conflicting label pairs survives in ``after``."""
    remaining = set()
    for v in after:
        remaining |= v.pairs
    return not (before.pairs & remaining)


def format_violations(violations: list[Violation]) -> str:
    return "".join(f"{v}\n" for v in violations)
