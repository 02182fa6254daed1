"""Context parameters, conditions and component profiles.

Profiles use the tag format below (element names are fixed)::

    <profile>
      <component>TranslationFR_EN</component>
      <point>
        <interface>Translation</interface>
        <method>translate</method>
        <argument>text</argument>
        <argtype>String</argtype>
        <precondition>langue = 'FR'</precondition>
      </point>
      ...
    </profile>

A point may additionally carry ``<guard>PARAM=MODE</guard>`` (just before the
condition) which makes it active only while the owning instance runs with that
configuration mode.
"""
from __future__ import annotations

import enum
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable, Mapping
from xml.sax.saxutils import escape

from .errors import DuplicateParameter, FormatError, MalformedCondition, UnknownElement

PRECONDITION = "precondition"
POSTCONDITION = "postcondition"

_IDENT = r"[A-Za-z_][A-Za-z0-9_\-]*"
_CONDITION_RE = re.compile(rf"^\s*({_IDENT})\s*=\s*'([^']+)'\s*$")
_GUARD_RE = re.compile(rf"^\s*({_IDENT})\s*=\s*({_IDENT})\s*$")

# Element order inside <point>; every one of them is optional except
# interface, method and exactly one condition.
_POINT_ORDER = (
    "interface", "method", "argument", "argtype", "returntype", "function", "guard",
    PRECONDITION, POSTCONDITION,
)


@dataclass(frozen=True)
class Parameter:
    name: str
    domain: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.name:
            raise ValueError("parameter name must be non-empty")

    def accepts(self, value: str) -> bool:
        # undeclared domain accepts any token
        return not self.domain or value in self.domain


@dataclass(frozen=True, order=True)
class Condition:
    parameter: str
    value: str
    operator: str = "="

    def __post_init__(self):
        if self.operator != "=":
            raise MalformedCondition(f"unsupported operator {self.operator!r}")

    def __str__(self) -> str:
        return f"{self.parameter} = '{self.value}'"


@dataclass(frozen=True)
class ProfilePoint:
    interface: str
    method: str
    kind: str
    condition: Condition
    argument: str | None = None
    argtype: str | None = None
    returntype: str | None = None
    function: str | None = None
    guard: tuple[str, str] | None = None

    def __post_init__(self):
        if self.kind == PRECONDITION:
            if self.argument is None or self.argtype is None:
                raise FormatError("precondition point needs <argument> and <argtype>")
            if self.returntype is not None or self.function is not None:
                raise FormatError("precondition point cannot carry a return slot")
        elif self.kind == POSTCONDITION:
            if self.returntype is None:
                raise FormatError("postcondition point needs <returntype>")
            if self.argument is not None or self.argtype is not None:
                raise FormatError("postcondition point cannot carry an argument slot")
            if self.function not in (None, "="):
                raise FormatError(f"unsupported function {self.function!r}")
        else:
            raise FormatError(f"unknown point kind {self.kind!r}")

    @property
    def parameter(self) -> str:
        return self.condition.parameter

    @property
    def value(self) -> str:
        return self.condition.value

    @property
    def supplies(self) -> bool:
        """True for postconditions that actually set the value on the returned flow."""
        # <function> is optional in the grammar; an absent function defaults to "=".
        return self.kind == POSTCONDITION and self.function in (None, "=")

    def active(self, modes: Mapping[str, str]) -> bool:
        if self.guard is None:
            return True
        param, mode = self.guard
        return modes.get(param) == mode


@dataclass(frozen=True)
class ComponentProfile:
    component: str
    points: tuple[ProfilePoint, ...] = ()

    def parameters(self) -> set[str]:
        return {p.parameter for p in self.points}

    def active_points(self, modes: Mapping[str, str]) -> list[ProfilePoint]:
        return [p for p in self.points if p.active(modes)]

    def mentions(self, parameter: str, modes: Mapping[str, str]) -> bool:
        return any(p.parameter == parameter for p in self.active_points(modes))


@dataclass(frozen=True)
class ContextProfile:
    assignments: Mapping[str, str] = field(default_factory=dict)

    def get(self, parameter: str) -> str | None:
        return self.assignments.get(parameter)

    def with_value(self, parameter: str, value: str) -> "ContextProfile":
        merged = dict(self.assignments)
        merged[parameter] = value
        return ContextProfile(merged)

    def __iter__(self):
        return iter(sorted(self.assignments.items()))


class Truth(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


def evaluate_condition(condition: Condition, valuation: Mapping[str, str]) -> Truth:
    value = valuation.get(condition.parameter)
    if value is None:
        return Truth.UNKNOWN
    return Truth.HOLDS if value == condition.value else Truth.FAILS


def parse_condition(text: str) -> Condition:
    m = _CONDITION_RE.match(text or "")
    if not m:
        raise MalformedCondition(f"condition must look like name = 'VALUE', got {text!r}")
    return Condition(m.group(1), m.group(2))


def _parse_xml(text: str, what: str) -> ET.Element:
    try:
        return ET.fromstring(text)
    except ET.ParseError as exc:
        raise FormatError(f"malformed {what} document: {exc}") from None


def _text(el: ET.Element) -> str:
    if len(el):
        raise FormatError(f"<{el.tag}> must contain text only")
    return (el.text or "").strip()


def _parse_point(el: ET.Element) -> ProfilePoint:
    fields: dict[str, str] = {}
    last = -1
    for child in el:
        if child.tag not in _POINT_ORDER:
            raise UnknownElement(f"unknown element <{child.tag}> in <point>")
        pos = _POINT_ORDER.index(child.tag)
        if pos <= last:
            raise FormatError(f"<{child.tag}> out of order or repeated in <point>")
        last = pos
        fields[child.tag] = _text(child)

    if "interface" not in fields or "method" not in fields:
        raise FormatError("<point> needs <interface> and <method>")
    kinds = [k for k in (PRECONDITION, POSTCONDITION) if k in fields]
    if len(kinds) != 1:
        raise FormatError("<point> needs exactly one <precondition> or <postcondition>")
    kind = kinds[0]

    guard = None
    if "guard" in fields:
        m = _GUARD_RE.match(fields["guard"])
        if not m:
            raise FormatError(f"guard must look like PARAM=MODE, got {fields['guard']!r}")
        guard = (m.group(1), m.group(2))

    return ProfilePoint(
        interface=fields["interface"],
        method=fields["method"],
        kind=kind,
        condition=parse_condition(fields[kind]),
        argument=fields.get("argument"),
        argtype=fields.get("argtype"),
        returntype=fields.get("returntype"),
        function=fields.get("function"),
        guard=guard,
    )


def parse_profile(text: str) -> ComponentProfile:
    root = _parse_xml(text, "profile")
    if root.tag != "profile":
        raise UnknownElement(f"expected <profile>, got <{root.tag}>")
    children = list(root)
    if not children or children[0].tag != "component":
        raise FormatError("<profile> must start with <component>")
    component = _text(children[0])
    if not component:
        raise FormatError("<component> is empty")
    points = []
    for child in children[1:]:
        if child.tag == "component":
            raise FormatError("<profile> has more than one <component>")
        if child.tag != "point":
            raise UnknownElement(f"unknown element <{child.tag}> in <profile>")
        points.append(_parse_point(child))
    return ComponentProfile(component, tuple(points))


def serialize_profile(profile: ComponentProfile) -> str:
    out = ["<profile>", f"  <component>{escape(profile.component)}</component>"]
    for p in profile.points:
        out.append("  <point>")
        out.append(f"    <interface>{escape(p.interface)}</interface>")
        out.append(f"    <method>{escape(p.method)}</method>")
        if p.argument is not None:
            out.append(f"    <argument>{escape(p.argument)}</argument>")
        if p.argtype is not None:
            out.append(f"    <argtype>{escape(p.argtype)}</argtype>")
        if p.returntype is not None:
            out.append(f"    <returntype>{escape(p.returntype)}</returntype>")
        if p.function is not None:
            out.append(f"    <function>{escape(p.function)}</function>")
        if p.guard is not None:
            out.append(f"    <guard>{p.guard[0]}={p.guard[1]}</guard>")
        out.append(f"    <{p.kind}>{escape(str(p.condition))}</{p.kind}>")
        out.append("  </point>")
    out.append("</profile>")
    return "\n".join(out) + "\n"


def parse_context(text: str) -> ContextProfile:
    root = _parse_xml(text, "context")
    if root.tag != "context":
        raise UnknownElement(f"expected <context>, got <{root.tag}>")
    assignments: dict[str, str] = {}
    for child in root:
        if child.tag != "parameter":
            raise UnknownElement(f"unknown element <{child.tag}> in <context>")
        name, value = child.get("name"), child.get("value")
        if not name or not value:
            raise FormatError("<parameter> needs name and value attributes")
        if name in assignments:
            raise DuplicateParameter(f"parameter {name!r} assigned twice")
        assignments[name] = value
    return ContextProfile(assignments)


def serialize_context(ctx: ContextProfile) -> str:
    if not ctx.assignments:
        return "<context/>\n"
    lines = ["<context>"]
    for name, value in ctx:
        lines.append(f'  <parameter name="{escape(name)}" value="{escape(value)}"/>')
    lines.append("</context>")
    return "\n".join(lines) + "\n"


def check_context(ctx: ContextProfile, parameters: Iterable[Parameter]) -> list[str]:
    """Return domain violations of ``ctx`` against declared parameters."""
    declared = {p.name: p for p in parameters}
    errors = []
    for name, value in ctx:
        param = declared.get(name)
        if param is not None and not param.accepts(value):
            errors.append(f"{name}={value} outside domain {sorted(param.domain)}")
    return errors
