"""Verification, corrective search and plan application.

adapt() runs the whole loop: propagate and check the axiom; for each
violated parameter build the graph of its conflict regions, enumerate the
mismatched supply->demand branches, search the registry for component chains
that carry the supplied value to the required one, turn those into candidate
plans, let a policy pick one and apply it.
"""
from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence, TextIO

from .assembly import (
    AdaptationAction,
    Assembly,
    Insert,
    Node,
    Remove,
    Replace,
    SetConfig,
    apply_actions,
)
from .composition import (
    FlowEdge,
    FlowValuation,
    Label,
    Violation,
    check_axioms,
    propagate,
    resolved,
)
from .errors import (
    AssemblyError,
    NoConflict,
    PolicyAbstained,
    RegressionDetected,
    Unsatisfiable,
)
from .profile import ContextProfile
from .registry import Registry, transfer_effects

DEFAULT_MAX_CHAIN = 3
# per-branch chain choices considered when combining branches into plans
_CHAINS_PER_BRANCH = 4
_MAX_COMBINATIONS = 256
_MAX_EDGE_ASSIGNMENTS = 32


@dataclass(frozen=True)
class ParameterGraph:
    parameter: str
    nodes: frozenset[Node]
    edges: tuple[FlowEdge, ...]
    supply: dict[Node, tuple[Label, ...]] = field(compare=False)
    demand: dict[Node, tuple[Label, ...]] = field(compare=False)

    def component_count(self) -> int:
        parent = {n: n for n in self.nodes}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.edges:
            parent[find(e.src)] = find(e.dst)
        return len({find(n) for n in self.nodes})


@dataclass(frozen=True)
class Branch:
    parameter: str
    path: tuple[Node, ...]
    supplied: Label
    required: Label
    edges: tuple[FlowEdge, ...]

    def insertable_edges(self) -> list[FlowEdge]:
        """Edges the adapter may splice into, nearest the demand anchor first."""
        return [e for e in reversed(self.edges) if e.kind in ("connection", "export") and e.msgtype]

    def __str__(self) -> str:
        return (f"{self.parameter}: {self.supplied.value}->{self.required.value} "
                f"via {'->'.join(map(str, self.path))}")


@dataclass(frozen=True)
class CandidateChain:
    chain: tuple[str, ...]
    edge: str
    position: int
    effect: tuple[str, str]
    msgtype: str
    alternatives: tuple[str, ...] = ()  # further compatible edges, by position

    @property
    def edges(self) -> tuple[str, ...]:
        return (self.edge,) + self.alternatives


@dataclass(frozen=True)
class AdaptationPlan:
    actions: tuple[AdaptationAction, ...]
    justification: tuple[Violation, ...] = ()

    @property
    def cost(self) -> tuple[int, int, int]:
        inserts = [a for a in self.actions if isinstance(a, Insert)]
        return (len(self.actions) - len(inserts), len(inserts), sum(len(a.chain) for a in inserts))

    def sort_key(self):
        r, i, l = self.cost
        has_replace = any(isinstance(a, Replace) for a in self.actions)
        return (has_replace, i, l, r, self.render_actions())

    def render_actions(self) -> str:
        return "; ".join(str(a) for a in self.actions)


# -- graph and branches ----------------------------------------------------

def build_parameter_graph(fv: FlowValuation, parameter: str) -> ParameterGraph:
    """Subgraph made of every flow region of ``parameter`` that holds a conflict."""
    nodes: set[Node] = set()
    for region in fv.regions(parameter):
        if any(fv.state(n, parameter).conflicts() for n in region):
            nodes |= region
    if not nodes:
        raise NoConflict(f"parameter {parameter!r} has no conflict")
    edges = tuple(e for e in fv.graph.edges_for(parameter) if e.src in nodes and e.dst in nodes)
    supply, demand = {}, {}
    for (node, p), st in fv.seeds.items():
        if p != parameter or node not in nodes:
            continue
        if st.supplied:
            supply[node] = tuple(sorted(st.supplied))
        if st.required:
            demand[node] = tuple(sorted(st.required))
    return ParameterGraph(parameter, frozenset(nodes), edges, supply, demand)


def _simple_paths(succ: dict, src: Node, dst: Node) -> Iterable[list[Node]]:
    stack = [(src, [src])]
    while stack:
        node, path = stack.pop()
        if node == dst:
            yield path
            continue
        for nxt in sorted(succ.get(node, ()), key=str, reverse=True):
            if nxt not in path:
                stack.append((nxt, path + [nxt]))


def find_mismatched_branches(g: ParameterGraph) -> list[Branch]:
    succ: dict[Node, list[Node]] = {}
    by_pair = {}
    for e in g.edges:
        succ.setdefault(e.src, []).append(e.dst)
        by_pair[(e.src, e.dst)] = e
    out = []
    for s_node, s_labels in g.supply.items():
        for d_node, d_labels in g.demand.items():
            pairs = [(s, d) for s in s_labels for d in d_labels if s.value != d.value]
            if not pairs:
                continue
            for path in _simple_paths(succ, s_node, d_node):
                edges = tuple(by_pair[(a, b)] for a, b in zip(path, path[1:]))
                for s, d in pairs:
                    out.append(Branch(g.parameter, tuple(path), s, d, edges))
    out.sort(key=lambda b: (tuple(map(str, b.path)), b.supplied, b.required))
    return out


# -- registry search -------------------------------------------------------

def enumerate_chains(reg: Registry, parameter: str, msgtype: str, start: str, goal: str,
                     max_chain: int) -> list[tuple[str, ...]]:
    """Every descriptor sequence of length <= max_chain carrying start to goal.

    Breadth-first over parameter values; descriptors are the transitions.
    """
    moves: dict[str, list[tuple[str, str]]] = {}
    for name in sorted(reg.descriptors):
        for pre, post in transfer_effects(reg.descriptors[name], reg.profile(name), parameter, msgtype):
            moves.setdefault(pre, []).append((name, post))
    found = []
    layer = [((), start)]
    for _ in range(max_chain):
        nxt = []
        for chain, value in layer:
            for name, post in moves.get(value, ()):
                nxt.append((chain + (name,), post))
        found += [c for c, v in nxt if v == goal]
        layer = nxt
    return found


def search_candidates(reg: Registry, branch: Branch, parameter: str,
                      max_chain: int = DEFAULT_MAX_CHAIN) -> list[CandidateChain]:
    if max_chain < 1:
        raise ValueError("max_chain must be >= 1")
    best: dict[tuple[str, ...], list[tuple[int, FlowEdge]]] = {}
    chains_by_type: dict[str, list[tuple[str, ...]]] = {}
    for pos, edge in enumerate(branch.insertable_edges()):
        if edge.msgtype not in chains_by_type:
            chains_by_type[edge.msgtype] = enumerate_chains(
                reg, parameter, edge.msgtype, branch.supplied.value, branch.required.value, max_chain)
        for chain in chains_by_type[edge.msgtype]:
            best.setdefault(chain, []).append((pos, edge))
    out = []
    for chain, placements in best.items():
        (pos, edge), rest = placements[0], placements[1:]
        out.append(CandidateChain(
            chain, edge.id, pos, (branch.supplied.value, branch.required.value), edge.msgtype,
            tuple(e.id for _, e in rest),
        ))
    out.sort(key=lambda c: (len(c.chain), c.chain, c.position))
    return out


# -- plans -----------------------------------------------------------------

@dataclass(frozen=True)
class ViolationAnalysis:
    violation: Violation
    branches: tuple[Branch, ...]
    candidates: tuple[tuple[CandidateChain, ...], ...]  # aligned with branches


def analyse(fv: FlowValuation, violations: Sequence[Violation], reg: Registry,
            max_chain: int = DEFAULT_MAX_CHAIN) -> list[ViolationAnalysis]:
    graphs = {}
    out = []
    for v in violations:
        if v.parameter not in graphs:
            g = build_parameter_graph(fv, v.parameter)
            graphs[v.parameter] = find_mismatched_branches(g)
        branches = tuple(b for b in graphs[v.parameter] if b.path[0] in v.region)
        cands = tuple(tuple(search_candidates(reg, b, v.parameter, max_chain)) for b in branches)
        out.append(ViolationAnalysis(v, branches, cands))
    return out


def _insert_plans(analyses: Sequence[ViolationAnalysis]) -> Iterable[list[Insert]]:
    """Candidate insertion sets, one chain per branch, best edges first."""
    options = []
    for an in analyses:
        for cands in an.candidates:
            if not cands:
                return
            options.append(cands[:_CHAINS_PER_BRANCH])
    if not options:
        return
    for combo in itertools.islice(itertools.product(*options), _MAX_COMBINATIONS):
        # identical choices for several branches collapse into one insertion
        unique = list(dict.fromkeys(combo))
        edge_lists = [c.edges for c in unique]
        for edges in itertools.islice(itertools.product(*edge_lists), _MAX_EDGE_ASSIGNMENTS):
            if len(set(edges)) != len(edges):
                continue
            yield [Insert(c.chain, e) for c, e in sorted(zip(unique, edges), key=lambda x: x[1])]


def _region_instances(assembly: Assembly, violations: Sequence[Violation]) -> list[str]:
    ids = set()
    for v in violations:
        ids |= {n.instance for n in v.region if not n.boundary}
    return sorted(i for i in ids if i in assembly.instances and not assembly.instances[i].remote)


def generate_plans(assembly: Assembly, reg: Registry, ctx: ContextProfile,
                   violations: Sequence[Violation],
                   analyses: Sequence[ViolationAnalysis] | None = None,
                   max_chain: int = DEFAULT_MAX_CHAIN) -> list[AdaptationPlan]:
    """Cost-ordered plans, each of which leaves the assembly violation-free.

    Every proposal is checked by applying it and re-running the axiom check;
    only plans that come out clean are returned.
    """
    if not violations:
        return []
    if analyses is None:
        analyses = analyse(propagate(assembly, reg, ctx), violations, reg, max_chain)
    plans: dict[tuple, AdaptationPlan] = {}
    emitted_chains: set = set()

    def consider(actions: list[AdaptationAction], chain_key=None) -> bool:
        if not actions or tuple(actions) in plans or (chain_key and chain_key in emitted_chains):
            return False
        try:
            result = apply_actions(assembly, actions, reg)
        except AssemblyError:
            return False
        if check_axioms(propagate(result, reg, ctx)):
            return False
        plans[tuple(actions)] = AdaptationPlan(tuple(actions), tuple(violations))
        if chain_key:
            emitted_chains.add(chain_key)
        return True

    # insertions: one plan per chain choice, at the first edge assignment that works
    for inserts in _insert_plans(analyses):
        consider(inserts, chain_key=("insert", tuple(sorted(a.chain for a in inserts))))

    local = _region_instances(assembly, violations)
    for iid in local:
        inst = assembly.instances[iid]
        desc = reg.descriptors[inst.descriptor]
        for cp in desc.config:
            for mode in cp.modes:
                if inst.mode_map.get(cp.name) != mode:
                    consider([SetConfig(iid, cp.name, mode)])
        for name in sorted(reg.descriptors):
            if name != inst.descriptor and reg.descriptors[name].signature() == desc.signature():
                consider([Replace(iid, name)])

    # adapter-inserted components whose own conditions are now part of a conflict
    stale = set()
    for v in violations:
        for _, a, b in v.pairs:
            for lab in (a, b):
                if lab.kind != "context" and lab.anchor.instance in assembly.adapter_tags:
                    stale.add(lab.anchor.instance)
    if stale:
        removal = [Remove(i) for i in sorted(stale)]
        candidates = [removal] + ([[r] for r in removal] if len(removal) > 1 else [])
        for base in candidates:
            if consider(base):
                continue
            try:
                trimmed = apply_actions(assembly, base, reg)
            except AssemblyError:
                continue
            fv = propagate(trimmed, reg, ctx)
            left = check_axioms(fv)
            if not left:
                continue
            for inserts in _insert_plans(analyse(fv, left, reg, max_chain)):
                consider(base + inserts,
                         chain_key=("remove+insert", tuple(map(str, base)),
                                    tuple(sorted(a.chain for a in inserts))))

    if not plans:
        raise Unsatisfiable(
            "no adaptation removes: " + "; ".join(str(v) for v in violations))
    return sorted(plans.values(), key=AdaptationPlan.sort_key)


# -- policies --------------------------------------------------------------

Policy = Callable[[Sequence[Violation], Sequence[AdaptationPlan]], "int | None"]


def auto_policy(violations, plans) -> int | None:
    """Take the cheapest plan."""
    if not plans:
        return None
    return min(range(len(plans)), key=lambda i: plans[i].sort_key())


def first_policy(violations, plans) -> int | None:
    return 0 if plans else None


def decline_policy(violations, plans) -> int | None:
    return None


class InteractivePolicy:
    """Ask the user, plan by plan, whether to apply it."""

    def __init__(self, stdin: TextIO | None = None, stdout: TextIO | None = None):
        self.stdin = stdin or sys.stdin
        self.stdout = stdout or sys.stdout

    def __call__(self, violations, plans) -> int | None:
        for v in violations:
            print(v, file=self.stdout)
        for k, plan in enumerate(plans, 1):
            print(f"PLAN {k} cost=({','.join(map(str, plan.cost))}): {plan.render_actions()}",
                  file=self.stdout)
            self.stdout.write(f"apply plan {k}? [y/N] ")
            self.stdout.flush()
            answer = self.stdin.readline()
            if answer.strip().lower() in ("y", "yes"):
                return k - 1
        return None


POLICIES = {"auto": auto_policy, "first": first_policy, "none": decline_policy}


# -- report and the adapt loop --------------------------------------------

@dataclass(frozen=True)
class AdaptationReport:
    violations: tuple[Violation, ...] = ()
    plans: tuple[AdaptationPlan, ...] = ()
    chosen: int | None = None
    status: str = "adapted"  # adapted | resolved | abstained | unsatisfiable | regression | planned
    reverify: bool | None = None

    def render(self) -> str:
        lines = [f"VIOLATIONS {len(self.violations)}"]
        lines += [str(v) for v in self.violations]
        for k, plan in enumerate(self.plans, 1):
            lines.append(f"PLAN {k} cost=({','.join(map(str, plan.cost))})")
            lines += [f"  {a}" for a in plan.actions]
        if self.status == "unsatisfiable":
            lines.append("UNSATISFIABLE")
        elif self.status == "abstained":
            lines.append("ABSTAINED")
        elif self.chosen is not None:
            lines.append(f"CHOSEN {self.chosen + 1}")
        if self.reverify is not None:
            lines.append(f"REVERIFY {'ok' if self.reverify else 'fail'}")
        return "\n".join(lines) + "\n"

    @property
    def chosen_plan(self) -> AdaptationPlan | None:
        return None if self.chosen is None else self.plans[self.chosen]


def plan(assembly: Assembly, ctx: ContextProfile, reg: Registry,
         max_chain: int = DEFAULT_MAX_CHAIN) -> AdaptationReport:
    """Verification and search only; nothing is applied."""
    fv = propagate(assembly, reg, ctx)
    violations = tuple(check_axioms(fv))
    if not violations:
        return AdaptationReport()
    try:
        plans = generate_plans(assembly, reg, ctx, violations,
                               analyse(fv, violations, reg, max_chain), max_chain)
    except Unsatisfiable:
        return AdaptationReport(violations, status="unsatisfiable")
    return AdaptationReport(violations, tuple(plans), status="planned")


def adapt(assembly: Assembly, ctx: ContextProfile, reg: Registry,
          policy: Policy = auto_policy,
          max_chain: int = DEFAULT_MAX_CHAIN) -> tuple[Assembly, AdaptationReport]:
    report = plan(assembly, ctx, reg, max_chain)
    if not report.violations:
        return assembly, report
    if report.status == "unsatisfiable":
        raise Unsatisfiable("no plan restores compatibility", report)

    choice = policy(report.violations, report.plans)
    if choice is None:
        report = replace(report, status="abstained")
        raise PolicyAbstained("plan selection declined", report)
    if not 0 <= choice < len(report.plans):
        raise ValueError(f"policy returned out-of-range plan index {choice}")

    chosen = report.plans[choice]
    result = apply_actions(assembly, chosen.actions, reg)
    after = check_axioms(propagate(result, reg, ctx))
    ok = all(resolved(v, after) for v in chosen.justification)
    report = replace(report, chosen=choice, reverify=ok, status="resolved" if ok else "regression")
    if not ok:
        raise RegressionDetected("justified violation survived the plan", report)
    return result, report
