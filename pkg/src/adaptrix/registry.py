"""File-backed component base with typed, profile-based lookup.

Layout::

    ROOT/manifest            component NAME / parameter NAME = v1,v2,...
    ROOT/NAME/descriptor     provides/requires/method/ui/config/behavior lines
    ROOT/NAME/profile        tag-based profile document (optional: neutral)
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .assembly import (
    PROVIDED,
    ComponentDescriptor,
    ConfigParam,
    InterfaceSignature,
    Method,
)
from .errors import DescriptorInvalid, FormatError, ManifestMissing, ProfileOrphan, RegistryError
from .profile import PRECONDITION, ComponentProfile, Parameter, parse_profile

_IDENT = r"[A-Za-z_][A-Za-z0-9_\-]*"
_METHOD_RE = re.compile(rf"^({_IDENT})\((.*)\)->({_IDENT})$")


@dataclass(frozen=True)
class Registry:
    descriptors: dict[str, ComponentDescriptor] = field(default_factory=dict)
    profiles: dict[str, ComponentProfile] = field(default_factory=dict)
    parameters: dict[str, Parameter] = field(default_factory=dict)

    @property
    def behaviors(self) -> dict[str, str | None]:
        return {n: d.behavior for n, d in self.descriptors.items()}

    def profile(self, descriptor: str) -> ComponentProfile:
        return self.profiles.get(descriptor) or ComponentProfile(descriptor)

    def __len__(self) -> int:
        return len(self.descriptors)

    @classmethod
    def build(cls, descriptors: Iterable[ComponentDescriptor],
              profiles: Iterable[ComponentProfile] = (),
              parameters: Iterable[Parameter] = ()) -> "Registry":
        """Assemble and cross-check an in-memory registry."""
        reg = cls(
            {d.name: d for d in descriptors},
            {p.component: p for p in profiles},
            {p.name: p for p in parameters},
        )
        for name, prof in reg.profiles.items():
            if name not in reg.descriptors:
                raise ProfileOrphan(f"profile for unregistered component {name!r}")
            problems = check_profile(reg.descriptors[name], prof, reg.parameters)
            if problems:
                raise DescriptorInvalid(name, problems[0])
        return reg


def parse_descriptor(text: str, name: str) -> ComponentDescriptor:
    provided: dict[str, InterfaceSignature] = {}
    required: dict[str, InterfaceSignature] = {}
    methods: dict[str, list[Method]] = {}
    ui: set[str] = set()
    config: list[ConfigParam] = []
    behavior = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kw = toks[0]
        if kw in ("provides", "requires"):
            if len(toks) != 4 or toks[2] != "msgtype":
                raise FormatError(f"expected '{kw} IFACE msgtype TYPE'", lineno)
            iface = toks[1]
            if iface in provided or iface in required:
                raise FormatError(f"interface {iface!r} declared twice", lineno)
            target = provided if kw == "provides" else required
            target[iface] = InterfaceSignature(iface, toks[3])
        elif kw == "method":
            if len(toks) != 3:
                raise FormatError("expected 'method IFACE NAME(arg:TYPE,...)->TYPE'", lineno)
            m = _METHOD_RE.match(toks[2])
            if not m:
                raise FormatError(f"bad method signature {toks[2]!r}", lineno)
            args = []
            for a in filter(None, m.group(2).split(",")):
                an, colon, at = a.partition(":")
                if not colon or not an or not at:
                    raise FormatError(f"bad argument {a!r}", lineno)
                args.append((an, at))
            meths = methods.setdefault(toks[1], [])
            if any(x.name == m.group(1) for x in meths):
                raise FormatError(f"method {toks[1]}.{m.group(1)} declared twice", lineno)
            meths.append(Method(m.group(1), tuple(args), m.group(3)))
        elif kw == "ui":
            if len(toks) != 2:
                raise FormatError("expected 'ui IFACE'", lineno)
            ui.add(toks[1])
        elif kw == "config":
            if len(toks) != 6 or toks[2] != "modes" or toks[4] != "default":
                raise FormatError("expected 'config NAME modes m1,m2 default m1'", lineno)
            try:
                config.append(ConfigParam(toks[1], tuple(toks[3].split(",")), toks[5]))
            except ValueError as exc:
                raise FormatError(str(exc), lineno) from None
        elif kw == "behavior":
            if len(toks) != 2:
                raise FormatError("expected 'behavior ID'", lineno)
            behavior = toks[1]
        else:
            raise FormatError(f"unknown statement {kw!r}", lineno)

    for iface in methods:
        if iface not in provided and iface not in required:
            raise FormatError(f"methods declared for unknown interface {iface!r}")
    for iface in ui:
        if iface not in provided:
            raise FormatError(f"ui interface {iface!r} is not provided")

    def finish(sigs):
        return tuple(
            InterfaceSignature(s.name, s.msgtype, tuple(methods.get(s.name, ())))
            for s in sigs.values()
        )

    return ComponentDescriptor(
        name=name,
        provided=finish(provided),
        required=finish(required),
        ui=frozenset(ui),
        config=tuple(config),
        behavior=behavior,
    )


def format_descriptor(desc: ComponentDescriptor) -> str:
    lines = []
    for kw, sigs in (("provides", desc.provided), ("requires", desc.required)):
        for s in sigs:
            lines.append(f"{kw} {s.name} msgtype {s.msgtype}")
            lines.extend(f"method {s.name} {m}" for m in s.methods)
    lines.extend(f"ui {i}" for i in sorted(desc.ui))
    for c in desc.config:
        lines.append(f"config {c.name} modes {','.join(c.modes)} default {c.default}")
    if desc.behavior:
        lines.append(f"behavior {desc.behavior}")
    return "\n".join(lines) + "\n"


def check_profile(desc: ComponentDescriptor, profile: ComponentProfile,
                  parameters: dict[str, Parameter]) -> list[str]:
    problems = []
    for p in profile.points:
        found = desc.interface(p.interface)
        if found is None:
            problems.append(f"point on unknown interface {p.interface!r}")
            continue
        sig, kind = found
        if kind != PROVIDED:
            problems.append(f"point on required interface {p.interface!r}")
        method = sig.method(p.method)
        if method is None:
            problems.append(f"no method {p.interface}.{p.method}")
            continue
        if p.kind == PRECONDITION:
            if (p.argument, p.argtype) not in method.args:
                problems.append(f"{p.interface}.{p.method} has no argument {p.argument}:{p.argtype}")
        elif p.returntype != method.returns:
            problems.append(f"{p.interface}.{p.method} returns {method.returns}, not {p.returntype}")
        if p.guard is not None:
            cp = desc.config_param(p.guard[0])
            if cp is None or p.guard[1] not in cp.modes:
                problems.append(f"guard {p.guard[0]}={p.guard[1]} names no config mode")
        param = parameters.get(p.parameter)
        if param is not None and not param.accepts(p.value):
            problems.append(f"{p.condition} outside declared domain")
    return problems


def parse_manifest(text: str) -> tuple[list[str], list[Parameter]]:
    components, params = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kw, _, rest = line.partition(" ")
        rest = rest.strip()
        if kw == "component":
            if not re.fullmatch(_IDENT, rest):
                raise FormatError(f"bad component name {rest!r}", lineno)
            components.append(rest)
        elif kw == "parameter":
            name, eq, values = rest.partition("=")
            name = name.strip()
            vals = [v.strip() for v in values.split(",") if v.strip()]
            if not eq or not re.fullmatch(_IDENT, name) or not vals:
                raise FormatError("expected 'parameter NAME = v1,v2,...'", lineno)
            params.append(Parameter(name, frozenset(vals)))
        else:
            raise FormatError(f"unknown manifest statement {kw!r}", lineno)
    return components, params


def _load_root(root: Path):
    manifest = root / "manifest"
    if not manifest.is_file():
        raise ManifestMissing(f"no manifest in {root}")
    names, params = parse_manifest(manifest.read_text(encoding="utf-8"))
    listed = set(names)
    descriptors, profiles = [], []
    for name in sorted(listed):
        d = root / name / "descriptor"
        if not d.is_file():
            raise DescriptorInvalid(name, f"missing {d}")
        try:
            descriptors.append(parse_descriptor(d.read_text(encoding="utf-8"), name))
        except FormatError as exc:
            raise DescriptorInvalid(name, str(exc)) from None
        p = root / name / "profile"
        if p.is_file():
            try:
                prof = parse_profile(p.read_text(encoding="utf-8"))
            except FormatError as exc:
                raise DescriptorInvalid(name, f"profile: {exc}") from None
            if prof.component != name:
                raise ProfileOrphan(f"{p} describes {prof.component!r}, not {name!r}")
            profiles.append(prof)
    # profiles lying around for components the manifest does not list
    for sub in sorted(root.iterdir()):
        if sub.is_dir() and sub.name not in listed and (sub / "profile").is_file():
            raise ProfileOrphan(f"profile without descriptor: {sub / 'profile'}")
    return descriptors, profiles, params


def load_registry(root, *more) -> Registry:
    """Load one or more registry directories into a single Registry.

    Components present in several roots must be identical.
    """
    descriptors: dict[str, ComponentDescriptor] = {}
    profiles: dict[str, ComponentProfile] = {}
    params: dict[str, Parameter] = {}
    for r in (root, *more):
        ds, ps, pars = _load_root(Path(r))
        for d in ds:
            if d.name in descriptors and descriptors[d.name] != d:
                raise RegistryError(f"conflicting definitions of {d.name!r}")
            descriptors[d.name] = d
        for p in ps:
            if p.component in profiles and profiles[p.component] != p:
                raise RegistryError(f"conflicting profiles for {p.component!r}")
            profiles[p.component] = p
        for par in pars:
            if par.name in params:
                par = Parameter(par.name, params[par.name].domain | par.domain)
            params[par.name] = par
    return Registry.build(descriptors.values(), profiles.values(), params.values())


# -- search ----------------------------------------------------------------

def transfer_effects(desc: ComponentDescriptor, profile: ComponentProfile,
                     parameter: str, msgtype: str) -> list[tuple[str, str]]:
    """(pre, post) value pairs a descriptor realises on ``parameter`` when spliced
    onto a ``msgtype`` edge with its default configuration.

    Only points on the input port count.  Conflicting preconditions (two
    values at once) or conflicting postconditions make the descriptor useless
    as a transformer, so it yields nothing.
    """
    io = desc.io_ports(msgtype)
    if io is None:
        return []
    modes = dict(desc.default_modes())
    pts = [p for p in profile.active_points(modes)
           if p.interface == io[0] and p.parameter == parameter]
    pres = {p.value for p in pts if p.kind == PRECONDITION}
    posts = {p.value for p in pts if p.supplies}
    if len(pres) != 1 or len(posts) != 1:
        return []
    return [(pres.pop(), posts.pop())]


def query(reg: Registry, parameter: str, pre: str, post: str, msgtype: str) -> list[str]:
    """Descriptors turning ``parameter=pre`` into ``parameter=post`` on a msgtype edge."""
    return sorted(
        name for name, desc in reg.descriptors.items()
        if (pre, post) in transfer_effects(desc, reg.profile(name), parameter, msgtype)
    )
