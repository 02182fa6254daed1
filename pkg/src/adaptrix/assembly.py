"""Component descriptors, assemblies and structural adaptation actions.

ADL syntax, one statement per line, ``#`` starts a comment::

    assembly forum
    instance C C
    instance P Codec mode charset=utf8
    remote F F
    connect C.out -> ProxyF.post
    export C.ihm ui

``remote`` declares a component outside the composite (reached through a
connector instance); it takes part in propagation and routing but is not
counted as an instance of the assembly and cannot be exported.  A trailing
``adapted`` keyword on an instance line marks it as adapter-inserted.
"""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Union

import networkx as nx
from networkx.algorithms.isomorphism import categorical_multiedge_match

from .errors import (
    AssemblyError,
    DanglingConnection,
    FormatError,
    InvalidTarget,
    NotAdapterTagged,
    TypeMismatch,
    UnknownDescriptor,
)

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")
PROVIDED = "provided"
REQUIRED = "required"


# -- IDL plane -------------------------------------------------------------

@dataclass(frozen=True)
class Method:
    name: str
    args: tuple[tuple[str, str], ...] = ()
    returns: str = "Void"

    def __str__(self) -> str:
        args = ",".join(f"{n}:{t}" for n, t in self.args)
        return f"{self.name}({args})->{self.returns}"


@dataclass(frozen=True)
class InterfaceSignature:
    name: str
    msgtype: str
    methods: tuple[Method, ...] = ()

    def method(self, name: str) -> Method | None:
        for m in self.methods:
            if m.name == name:
                return m
        return None


@dataclass(frozen=True)
class ConfigParam:
    name: str
    modes: tuple[str, ...]
    default: str

    def __post_init__(self):
        if not self.modes:
            raise ValueError(f"config {self.name}: no modes")
        if self.default not in self.modes:
            raise ValueError(f"config {self.name}: default {self.default!r} not in modes")


@dataclass(frozen=True)
class ComponentDescriptor:
    name: str
    provided: tuple[InterfaceSignature, ...] = ()
    required: tuple[InterfaceSignature, ...] = ()
    ui: frozenset[str] = frozenset()
    config: tuple[ConfigParam, ...] = ()
    behavior: str | None = None

    def interface(self, name: str) -> tuple[InterfaceSignature, str] | None:
        for sig in self.provided:
            if sig.name == name:
                return sig, PROVIDED
        for sig in self.required:
            if sig.name == name:
                return sig, REQUIRED
        return None

    def config_param(self, name: str) -> ConfigParam | None:
        for c in self.config:
            if c.name == name:
                return c
        return None

    def default_modes(self) -> tuple[tuple[str, str], ...]:
        return tuple(sorted((c.name, c.default) for c in self.config))

    def io_ports(self, msgtype: str) -> tuple[str, str] | None:
        """(input, output) interface names for splicing onto an edge of ``msgtype``.

        A descriptor is insertable only if it has exactly one provided and
        exactly one required interface of that message type.
        """
        ins = [s.name for s in self.provided if s.msgtype == msgtype]
        outs = [s.name for s in self.required if s.msgtype == msgtype]
        if len(ins) != 1 or len(outs) != 1:
            return None
        return ins[0], outs[0]

    def signature(self) -> tuple:
        return (
            tuple(sorted((s.name, s.msgtype, s.methods) for s in self.provided)),
            tuple(sorted((s.name, s.msgtype, s.methods) for s in self.required)),
        )


# -- ADL plane -------------------------------------------------------------

class Node(NamedTuple):
    """A flow endpoint: one interface of one instance, or a composite export."""

    instance: str
    interface: str
    boundary: bool = False

    def __str__(self) -> str:
        if self.boundary:
            return f"{self.instance}[{self.interface}]"
        return f"{self.instance}.{self.interface}"


@dataclass(frozen=True)
class Instance:
    descriptor: str
    modes: tuple[tuple[str, str], ...] = ()
    remote: bool = False

    @property
    def mode_map(self) -> dict[str, str]:
        return dict(self.modes)


@dataclass(frozen=True)
class Connection:
    src: str
    src_iface: str
    dst: str
    dst_iface: str

    @property
    def source(self) -> Node:
        return Node(self.src, self.src_iface)

    @property
    def target(self) -> Node:
        return Node(self.dst, self.dst_iface)

    @property
    def id(self) -> str:
        return f"{self.source}->{self.target}"


@dataclass(frozen=True)
class Export:
    name: str
    instance: str
    interface: str
    ui: bool = False


@dataclass(frozen=True)
class Assembly:
    name: str
    instances: Mapping[str, Instance] = field(default_factory=dict)
    connections: tuple[Connection, ...] = ()
    exports: tuple[Export, ...] = ()
    adapter_tags: frozenset[str] = frozenset()

    @property
    def local_instances(self) -> dict[str, Instance]:
        return {k: v for k, v in self.instances.items() if not v.remote}

    @property
    def local_connections(self) -> list[Connection]:
        local = self.local_instances
        return [c for c in self.connections if c.src in local and c.dst in local]

    def export(self, name: str) -> Export | None:
        for e in self.exports:
            if e.name == name:
                return e
        return None

    def boundary_node(self, export: Export) -> Node:
        return Node(self.name, export.name, boundary=True)

    def connection_from(self, node: Node) -> Connection | None:
        for c in self.connections:
            if c.source == node:
                return c
        return None


# -- actions ---------------------------------------------------------------

@dataclass(frozen=True)
class Insert:
    chain: tuple[str, ...]
    edge: str

    def __str__(self) -> str:
        return f"INSERT {','.join(self.chain)}@{self.edge}"


@dataclass(frozen=True)
class Remove:
    instance: str

    def __str__(self) -> str:
        return f"REMOVE {self.instance}"


@dataclass(frozen=True)
class Replace:
    instance: str
    descriptor: str

    def __str__(self) -> str:
        return f"REPLACE {self.instance} {self.descriptor}"


@dataclass(frozen=True)
class SetConfig:
    instance: str
    param: str
    mode: str

    def __str__(self) -> str:
        return f"SETCONFIG {self.instance} {self.param}={self.mode}"


AdaptationAction = Union[Insert, Remove, Replace, SetConfig]


# -- parsing ---------------------------------------------------------------

def _ident(tok: str, lineno: int) -> str:
    if not _IDENT_RE.match(tok):
        raise FormatError(f"bad identifier {tok!r}", lineno)
    return tok


def _ref(tok: str, lineno: int) -> tuple[str, str]:
    inst, dot, iface = tok.partition(".")
    if not dot:
        raise FormatError(f"expected ID.IFACE, got {tok!r}", lineno)
    return _ident(inst, lineno), _ident(iface, lineno)


def parse_adl(text: str, registry) -> Assembly:
    """Parse an ADL document and validate it against ``registry``."""
    name = None
    instances: dict[str, Instance] = {}
    explicit_modes: dict[str, dict[str, str]] = {}
    connections: list[Connection] = []
    exports: list[tuple[str, str, bool | None]] = []
    tags: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kw = toks[0]
        if name is None and kw != "assembly":
            raise FormatError("document must start with 'assembly NAME'", lineno)
        if kw == "assembly":
            if name is not None or len(toks) != 2:
                raise FormatError("expected a single 'assembly NAME' statement", lineno)
            name = _ident(toks[1], lineno)
        elif kw in ("instance", "remote"):
            if len(toks) < 3:
                raise FormatError(f"expected '{kw} ID DESCRIPTOR'", lineno)
            iid, desc = _ident(toks[1], lineno), _ident(toks[2], lineno)
            if iid in instances or iid == name:
                raise FormatError(f"duplicate instance id {iid!r}", lineno)
            modes: dict[str, str] = {}
            rest = toks[3:]
            while rest:
                if rest[0] == "adapted":
                    tags.add(iid)
                    rest = rest[1:]
                elif rest[0] == "mode" and len(rest) >= 2 and "=" in rest[1]:
                    p, _, m = rest[1].partition("=")
                    modes[_ident(p, lineno)] = _ident(m, lineno)
                    rest = rest[2:]
                else:
                    raise FormatError(f"unexpected tokens {' '.join(rest)!r}", lineno)
            instances[iid] = Instance(desc, (), remote=(kw == "remote"))
            explicit_modes[iid] = modes
        elif kw == "connect":
            if len(toks) != 4 or toks[2] != "->":
                raise FormatError("expected 'connect A.req -> B.prov'", lineno)
            (a, ai), (b, bi) = _ref(toks[1], lineno), _ref(toks[3], lineno)
            connections.append(Connection(a, ai, b, bi))
        elif kw == "export":
            if len(toks) not in (2, 3) or (len(toks) == 3 and toks[2] != "ui"):
                raise FormatError("expected 'export ID.IFACE [ui]'", lineno)
            inst, iface = _ref(toks[1], lineno)
            exports.append((inst, iface, True if len(toks) == 3 else None))
        else:
            raise FormatError(f"unknown statement {kw!r}", lineno)

    if name is None:
        raise FormatError("empty ADL document")

    # resolve config modes against descriptor defaults
    resolved = {}
    for iid, inst in instances.items():
        desc = registry.descriptors.get(inst.descriptor)
        modes = dict(desc.default_modes()) if desc else {}
        modes.update(explicit_modes[iid])
        resolved[iid] = dataclasses.replace(inst, modes=tuple(sorted(modes.items())))

    export_objs = []
    for inst, iface, ui in exports:
        if ui is None:
            desc = registry.descriptors.get(resolved[inst].descriptor) if inst in resolved else None
            ui = bool(desc and iface in desc.ui)
        export_objs.append(Export(f"{inst}.{iface}", inst, iface, ui))

    assembly = Assembly(name, resolved, tuple(connections), tuple(export_objs), frozenset(tags))
    errors = validate_assembly(assembly, registry)
    if errors:
        raise errors[0].exception()
    return assembly


def format_adl(assembly: Assembly) -> str:
    lines = [f"assembly {assembly.name}"]
    for iid, inst in assembly.instances.items():
        kw = "remote" if inst.remote else "instance"
        line = f"{kw} {iid} {inst.descriptor}"
        for p, m in inst.modes:
            line += f" mode {p}={m}"
        if iid in assembly.adapter_tags:
            line += " adapted"
        lines.append(line)
    for c in assembly.connections:
        lines.append(f"connect {c.source} -> {c.target}")
    for e in assembly.exports:
        lines.append(f"export {e.instance}.{e.interface}" + (" ui" if e.ui else ""))
    return "\n".join(lines) + "\n"


# -- validation ------------------------------------------------------------

_ERROR_CLASSES = {
    "UnknownDescriptor": UnknownDescriptor,
    "DanglingConnection": DanglingConnection,
    "TypeMismatch": TypeMismatch,
}


@dataclass(frozen=True)
class StructuralError:
    kind: str
    detail: str

    def exception(self) -> AssemblyError:
        return _ERROR_CLASSES.get(self.kind, AssemblyError)(f"{self.kind}: {self.detail}")

    def __str__(self) -> str:
        return f"{self.kind}({self.detail})"


def _interface_of(assembly: Assembly, registry, node: Node):
    inst = assembly.instances.get(node.instance)
    if inst is None:
        return None
    desc = registry.descriptors.get(inst.descriptor)
    if desc is None:
        return None
    return desc.interface(node.interface)


def validate_assembly(assembly: Assembly, registry) -> list[StructuralError]:
    errors: list[StructuralError] = []
    for iid, inst in assembly.instances.items():
        desc = registry.descriptors.get(inst.descriptor)
        if desc is None:
            errors.append(StructuralError("UnknownDescriptor", inst.descriptor))
            continue
        modes = inst.mode_map
        for c in desc.config:
            if modes.get(c.name) not in c.modes:
                errors.append(StructuralError("BadMode", f"{iid}.{c.name}={modes.get(c.name)}"))
        for p in modes:
            if desc.config_param(p) is None:
                errors.append(StructuralError("BadMode", f"{iid} has no config {p!r}"))

    used_required: dict[Node, int] = {}
    for conn in assembly.connections:
        src = _interface_of(assembly, registry, conn.source)
        dst = _interface_of(assembly, registry, conn.target)
        if src is None or src[1] != REQUIRED:
            errors.append(StructuralError("DanglingConnection", f"{conn.id}: no required {conn.source}"))
            continue
        if dst is None or dst[1] != PROVIDED:
            errors.append(StructuralError("DanglingConnection", f"{conn.id}: no provided {conn.target}"))
            continue
        if src[0].msgtype != dst[0].msgtype:
            errors.append(StructuralError(
                "TypeMismatch", f"{conn.id}: {src[0].msgtype} vs {dst[0].msgtype}"))
        used_required[conn.source] = used_required.get(conn.source, 0) + 1

    names = set()
    for e in assembly.exports:
        if e.name in names:
            errors.append(StructuralError("BadExport", f"duplicate export {e.name}"))
        names.add(e.name)
        node = Node(e.instance, e.interface)
        inst = assembly.instances.get(e.instance)
        found = _interface_of(assembly, registry, node)
        if inst is None or found is None:
            errors.append(StructuralError("BadExport", f"{e.name}: no interface {node}"))
            continue
        if inst.remote:
            errors.append(StructuralError("BadExport", f"{e.name}: {e.instance} is remote"))
        if e.ui and found[1] != PROVIDED:
            errors.append(StructuralError("BadExport", f"{e.name}: ui export of required {node}"))
        if found[1] == REQUIRED:
            used_required[node] = used_required.get(node, 0) + 1

    for node, n in sorted(used_required.items()):
        if n > 1:
            errors.append(StructuralError("FanoutViolation", f"{node} has {n} outgoing bindings"))

    for tag in sorted(assembly.adapter_tags):
        if tag not in assembly.instances:
            errors.append(StructuralError("BadTag", tag))
    return errors


# -- actions ---------------------------------------------------------------

def _fresh_id(taken: Iterable[str], prefix: str = "T") -> str:
    taken = set(taken)
    n = 1
    while f"{prefix}{n}" in taken:
        n += 1
    return f"{prefix}{n}"


def _edge_lookup(assembly: Assembly, edge_id: str):
    for i, c in enumerate(assembly.connections):
        if c.id == edge_id:
            return "connection", i
    for i, e in enumerate(assembly.exports):
        b, n = str(assembly.boundary_node(e)), f"{e.instance}.{e.interface}"
        if edge_id in (f"{b}->{n}", f"{n}->{b}"):
            return "export", i
    return None, None


def edge_ids(assembly: Assembly, registry) -> list[tuple[str, str]]:
    """All insertable edges as (edge id, message type)."""
    out = []
    for c in assembly.connections:
        if assembly.instances[c.src].remote or assembly.instances[c.dst].remote:
            continue
        sig = _interface_of(assembly, registry, c.source)
        out.append((c.id, sig[0].msgtype))
    for e in assembly.exports:
        sig, kind = _interface_of(assembly, registry, Node(e.instance, e.interface))
        b = str(assembly.boundary_node(e))
        n = f"{e.instance}.{e.interface}"
        out.append((f"{b}->{n}" if kind == PROVIDED else f"{n}->{b}", sig.msgtype))
    return out


def _insert(assembly: Assembly, act: Insert, registry) -> Assembly:
    if not act.chain:
        raise InvalidTarget("empty insertion chain")
    kind, idx = _edge_lookup(assembly, act.edge)
    if kind is None:
        raise InvalidTarget(f"no edge {act.edge!r}")
    if kind == "connection":
        conn = assembly.connections[idx]
        if assembly.instances[conn.src].remote or assembly.instances[conn.dst].remote:
            raise InvalidTarget(f"{act.edge} links to a remote component")
        msgtype = _interface_of(assembly, registry, conn.source)[0].msgtype
    else:
        exp = assembly.exports[idx]
        sig, ekind = _interface_of(assembly, registry, Node(exp.instance, exp.interface))
        msgtype = sig.msgtype

    instances = dict(assembly.instances)
    new_ids, ports = [], []
    for dname in act.chain:
        desc = registry.descriptors.get(dname)
        if desc is None:
            raise UnknownDescriptor(dname)
        io = desc.io_ports(msgtype)
        if io is None:
            raise TypeMismatch(f"{dname} cannot be spliced onto a {msgtype} edge")
        iid = _fresh_id(list(instances) + [assembly.name])
        instances[iid] = Instance(dname, desc.default_modes())
        new_ids.append(iid)
        ports.append(io)

    links = [
        Connection(new_ids[k], ports[k][1], new_ids[k + 1], ports[k + 1][0])
        for k in range(len(new_ids) - 1)
    ]
    head_in = (new_ids[0], ports[0][0])
    tail_out = (new_ids[-1], ports[-1][1])
    connections = list(assembly.connections)
    exports = list(assembly.exports)
    if kind == "connection":
        spliced = [
            Connection(conn.src, conn.src_iface, *head_in),
            *links,
            Connection(*tail_out, conn.dst, conn.dst_iface),
        ]
        connections[idx:idx + 1] = spliced
    elif ekind == PROVIDED:
        exports[idx] = dataclasses.replace(exp, instance=head_in[0], interface=head_in[1])
        connections += links + [Connection(*tail_out, exp.instance, exp.interface)]
    else:
        exports[idx] = dataclasses.replace(exp, instance=tail_out[0], interface=tail_out[1])
        connections += [Connection(exp.instance, exp.interface, *head_in)] + links
    return dataclasses.replace(
        assembly,
        instances=instances,
        connections=tuple(connections),
        exports=tuple(exports),
        adapter_tags=assembly.adapter_tags | set(new_ids),
    )


def _remove(assembly: Assembly, act: Remove, registry) -> Assembly:
    iid = act.instance
    if iid not in assembly.instances:
        raise InvalidTarget(f"no instance {iid!r}")
    if iid not in assembly.adapter_tags:
        raise NotAdapterTagged(f"{iid} was not inserted by the adapter")
    incoming = [c for c in assembly.connections if c.dst == iid]
    outgoing = [c for c in assembly.connections if c.src == iid]
    in_exports = [e for e in assembly.exports
                  if e.instance == iid and _interface_of(assembly, registry, Node(iid, e.interface))[1] == PROVIDED]
    out_exports = [e for e in assembly.exports if e.instance == iid and e not in in_exports]
    n_in, n_out = len(incoming) + len(in_exports), len(outgoing) + len(out_exports)

    connections = [c for c in assembly.connections if iid not in (c.src, c.dst)]
    exports = list(assembly.exports)
    if (n_in, n_out) == (1, 1):
        if incoming and outgoing:
            a, b = incoming[0], outgoing[0]
            healed = Connection(a.src, a.src_iface, b.dst, b.dst_iface)
            pos = assembly.connections.index(a)
            before = sum(1 for c in assembly.connections[:pos] if iid not in (c.src, c.dst))
            connections.insert(before, healed)
        elif in_exports and outgoing:
            exp, b = in_exports[0], outgoing[0]
            exports[exports.index(exp)] = dataclasses.replace(exp, instance=b.dst, interface=b.dst_iface)
        elif incoming and out_exports:
            exp, a = out_exports[0], incoming[0]
            exports[exports.index(exp)] = dataclasses.replace(exp, instance=a.src, interface=a.src_iface)
        else:
            raise InvalidTarget(f"{iid} sits between two exports; cannot heal")
    elif (n_in, n_out) != (0, 0):
        raise InvalidTarget(f"{iid} has {n_in} inputs and {n_out} outputs; cannot heal")

    instances = {k: v for k, v in assembly.instances.items() if k != iid}
    return dataclasses.replace(
        assembly,
        instances=instances,
        connections=tuple(connections),
        exports=tuple(exports),
        adapter_tags=assembly.adapter_tags - {iid},
    )


def _replace(assembly: Assembly, act: Replace, registry) -> Assembly:
    inst = assembly.instances.get(act.instance)
    if inst is None:
        raise InvalidTarget(f"no instance {act.instance!r}")
    desc = registry.descriptors.get(act.descriptor)
    if desc is None:
        raise UnknownDescriptor(act.descriptor)
    used = [c.source for c in assembly.connections if c.src == act.instance]
    used += [c.target for c in assembly.connections if c.dst == act.instance]
    used += [Node(e.instance, e.interface) for e in assembly.exports if e.instance == act.instance]
    for node in used:
        old = _interface_of(assembly, registry, node)
        new = desc.interface(node.interface)
        if new is None or new[1] != old[1] or new[0].msgtype != old[0].msgtype:
            raise TypeMismatch(f"{act.descriptor} does not offer {node.interface} as {old[1]} {old[0].msgtype}")
    instances = dict(assembly.instances)
    instances[act.instance] = Instance(act.descriptor, desc.default_modes(), inst.remote)
    return dataclasses.replace(assembly, instances=instances)


def _set_config(assembly: Assembly, act: SetConfig, registry) -> Assembly:
    inst = assembly.instances.get(act.instance)
    if inst is None:
        raise InvalidTarget(f"no instance {act.instance!r}")
    param = registry.descriptors[inst.descriptor].config_param(act.param)
    if param is None or act.mode not in param.modes:
        raise InvalidTarget(f"{act.instance} has no mode {act.param}={act.mode}")
    modes = inst.mode_map
    modes[act.param] = act.mode
    instances = dict(assembly.instances)
    instances[act.instance] = dataclasses.replace(inst, modes=tuple(sorted(modes.items())))
    return dataclasses.replace(assembly, instances=instances)


_APPLY = {Insert: _insert, Remove: _remove, Replace: _replace, SetConfig: _set_config}


def apply_action(assembly: Assembly, act: AdaptationAction, registry) -> Assembly:
    result = _APPLY[type(act)](assembly, act, registry)
    errors = validate_assembly(result, registry)
    if errors:
        raise errors[0].exception()
    return result


def apply_actions(assembly: Assembly, actions: Iterable[AdaptationAction], registry) -> Assembly:
    for act in actions:
        assembly = apply_action(assembly, act, registry)
    return assembly


# -- structural equality ---------------------------------------------------

def _as_graph(assembly: Assembly) -> nx.MultiDiGraph:
    g = nx.MultiDiGraph()
    for iid, inst in assembly.instances.items():
        # user instances keep their identity; adapter-inserted ones are anonymous
        label = None if iid in assembly.adapter_tags else iid
        g.add_node(("i", iid), key=(label, inst.descriptor, inst.modes, inst.remote))
    for e in assembly.exports:
        g.add_node(("e", e.name), key=("export", e.name, e.ui))
        g.add_edge(("e", e.name), ("i", e.instance), port=(e.interface,))
    for c in assembly.connections:
        g.add_edge(("i", c.src), ("i", c.dst), port=(c.src_iface, c.dst_iface))
    return g


def structurally_equal(a: Assembly, b: Assembly) -> bool:
    """Equality up to the ids of adapter-inserted instances."""
    if a.name != b.name or len(a.instances) != len(b.instances):
        return False
    return nx.is_isomorphic(
        _as_graph(a), _as_graph(b),
        node_match=lambda x, y: x["key"] == y["key"],
        edge_match=categorical_multiedge_match("port", None),
    )
