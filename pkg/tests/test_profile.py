from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptrix.errors import DuplicateParameter, FormatError, MalformedCondition, UnknownElement
from adaptrix.profile import (
    POSTCONDITION,
    PRECONDITION,
    ComponentProfile,
    Condition,
    ContextProfile,
    Parameter,
    ProfilePoint,
    Truth,
    check_context,
    evaluate_condition,
    parse_condition,
    parse_context,
    parse_profile,
    serialize_context,
    serialize_profile,
)

from conftest import TRANSLATOR_LISTING

ident = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True)
value = st.from_regex(r"[A-Z]{1,3}", fullmatch=True)


def test_translator_listing_fields():
    p = parse_profile(TRANSLATOR_LISTING)
    assert p.component == "TranslationFR_EN"
    a, b = p.points
    assert (a.interface, a.method, a.kind, a.argument, a.argtype) == (
        "Translation", "translate", PRECONDITION, "text", "String")
    assert a.condition == Condition("langue", "FR")
    assert (b.kind, b.returntype, b.function, b.condition) == (
        POSTCONDITION, "String", "=", Condition("langue", "EN"))
    assert a.guard is None and b.guard is None


def test_serialized_listing_matches_modulo_whitespace():
    out = serialize_profile(parse_profile(TRANSLATOR_LISTING))
    squash = lambda s: "".join(s.split())
    assert squash(out) == squash(TRANSLATOR_LISTING)


def test_empty_profile():
    p = parse_profile("<profile><component>X</component></profile>")
    assert p == ComponentProfile("X")
    assert serialize_profile(p) == "<profile>\n  <component>X</component>\n</profile>\n"


@pytest.mark.parametrize("text, exc", [
    ("<profile><component>X</component>", FormatError),
    ("<profile><component>X</component><pointe/></profile>", UnknownElement),
    ("<profil><component>X</component></profil>", UnknownElement),
    ("<profile><point/></profile>", FormatError),
    ("""<profile><component>X</component><point><interface>I</interface><method>m</method>
        <argument>a</argument><argtype>T</argtype><precondition>langue == FR</precondition>
        </point></profile>""", MalformedCondition),
    ("""<profile><component>X</component><point><method>m</method><interface>I</interface>
        <argument>a</argument><argtype>T</argtype><precondition>l = 'A'</precondition>
        </point></profile>""", FormatError),
    ("""<profile><component>X</component><point><interface>I</interface><method>m</method>
        <returntype>T</returntype><function>+</function><postcondition>l = 'A'</postcondition>
        </point></profile>""", FormatError),
    ("""<profile><component>X</component><point><interface>I</interface><method>m</method>
        <returntype>T</returntype><precondition>l = 'A'</precondition>
        </point></profile>""", FormatError),
])
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_profile(text)


def test_condition_whitespace_normalised():
    assert parse_condition("  langue='FR'  ") == Condition("langue", "FR")
    assert parse_condition("langue   =   'FR' ") == Condition("langue", "FR")
    with pytest.raises(MalformedCondition):
        parse_condition("langue = FR")
    with pytest.raises(MalformedCondition):
        Condition("langue", "FR", "!=")


def test_guard_round_trip():
    pt = ProfilePoint("I", "m", PRECONDITION, Condition("l", "A"), argument="x", argtype="T",
                      guard=("mode", "strict"))
    prof = ComponentProfile("X", (pt,))
    assert parse_profile(serialize_profile(prof)) == prof
    assert pt.active({"mode": "strict"}) and not pt.active({"mode": "lax"})


def test_missing_function_still_supplies():
    pt = ProfilePoint("I", "m", POSTCONDITION, Condition("l", "A"), returntype="T")
    assert pt.supplies


def test_context_documents():
    assert parse_context('<context><parameter name="langue" value="FR"/></context>') == \
        ContextProfile({"langue": "FR"})
    assert parse_context("<context/>") == ContextProfile()
    with pytest.raises(DuplicateParameter):
        parse_context('<context><parameter name="langue" value="FR"/>'
                      '<parameter name="langue" value="EN"/></context>')
    c = ContextProfile({"b": "2", "a": "1"})
    assert parse_context(serialize_context(c)) == c


def test_check_context_domain():
    params = [Parameter("langue", frozenset({"FR", "EN"}))]
    assert check_context(ContextProfile({"langue": "FR"}), params) == []
    assert check_context(ContextProfile({"langue": "JP"}), params)
    assert check_context(ContextProfile({"other": "x"}), params) == []


@pytest.mark.parametrize("cond, val, expected", [
    (Condition("langue", "EN"), {"langue": "FR"}, Truth.FAILS),
    (Condition("langue", "FR"), {"langue": "FR"}, Truth.HOLDS),
    (Condition("langue", "EN"), {}, Truth.UNKNOWN),
])
def test_evaluate_condition_examples(cond, val, expected):
    assert evaluate_condition(cond, val) is expected


@given(ident, value, st.dictionaries(ident, value, max_size=4))
def test_evaluate_condition_total(param, v, valuation):
    got = evaluate_condition(Condition(param, v), valuation)
    if param not in valuation:
        assert got is Truth.UNKNOWN
    else:
        assert got is (Truth.HOLDS if valuation[param] == v else Truth.FAILS)


@st.composite
def points(draw):
    cond = Condition(draw(ident), draw(value))
    guard = draw(st.none() | st.tuples(ident, ident))
    if draw(st.booleans()):
        return ProfilePoint(draw(ident), draw(ident), PRECONDITION, cond,
                            argument=draw(ident), argtype=draw(ident), guard=guard)
    return ProfilePoint(draw(ident), draw(ident), POSTCONDITION, cond,
                        returntype=draw(ident), function=draw(st.sampled_from([None, "="])),
                        guard=guard)


profiles = st.builds(ComponentProfile, ident, st.lists(points(), max_size=5).map(tuple))


@given(profiles)
def test_round_trip_property(p):
    assert parse_profile(serialize_profile(p)) == p
