from __future__ import annotations

import random
import threading

import pytest

from adaptrix.adapter import adapt
from adaptrix.assembly import Assembly, Insert, Remove, Replace
from adaptrix.composition import check_axioms, propagate
from adaptrix.errors import BehaviorMissing, BehaviorRejected, Unsatisfiable, UnroutableMessage
from adaptrix.registry import Registry, load_registry
from adaptrix.runtime import Message, RuntimeService, instantiate, translate_text

import randgen
from conftest import FIXTURES

INSERT_FR = Insert(("TranslationFR_EN",), "C.out->ProxyF.post")


def _fr(text):
    return Message(text, {"langue": "FR"})


def test_adapted_delivery(forum, forum_registry):
    rt = instantiate(forum, forum_registry)
    rt.reconfigure([INSERT_FR])
    out = rt.send("C.ihm", _fr("bonjour  le monde"))
    assert out.trace == ("C", "T1", "ProxyF", "F")
    assert (out.payload, out.tags["langue"]) == ("hello the world", "EN")
    assert rt.forum().dump() == ["1\tEN\thello the world"]


def test_unadapted_rejected(forum, forum_registry):
    rt = instantiate(forum, forum_registry)
    with pytest.raises(BehaviorRejected) as info:
        rt.send("C.ihm", _fr("bonjour"))
    assert (info.value.instance, info.value.expected, info.value.actual) == ("F", "EN", "FR")
    assert rt.forum().dump() == []


def test_translator_refuses_wrong_language(forum, forum_registry):
    rt = instantiate(forum, forum_registry)
    rt.reconfigure([INSERT_FR])
    with pytest.raises(BehaviorRejected) as info:
        rt.send("C.ihm", Message("hello", {"langue": "EN"}))
    assert info.value.instance == "T1"


def test_reconfigure_preserves_store(forum, forum_registry):
    rt = instantiate(forum, forum_registry)
    for text in ["one", "two", "three"]:
        rt.send("C.ihm", Message(text, {"langue": "EN"}))
    store = rt.forum()
    rt.reconfigure([INSERT_FR])
    assert rt.forum() is store and len(store.store) == 3
    rt.reconfigure([Remove("T1")])
    with pytest.raises(BehaviorRejected):
        rt.send("C.ihm", _fr("bonjour"))
    assert rt.forum() is store and len(store.store) == 3


def test_replace_swaps_behavior(forum):
    reg = load_registry(FIXTURES / "forum-registry", FIXTURES / "proxy-variant")
    rt = instantiate(forum, reg)
    rt.send("C.ihm", Message("hi", {"langue": "EN"}))
    old = rt.state_of("ProxyF")
    rt.reconfigure([Replace("ProxyF", "ProxyF2")])
    out = rt.send("C.ihm", Message("there", {"langue": "EN"}))
    assert "ProxyF" in out.trace
    assert rt.assembly.instances["ProxyF"].descriptor == "ProxyF2"
    assert rt.state_of("ProxyF") is not old
    assert len(rt.forum().store) == 2


def test_visualize_filters_by_reader_tags(forum, forum_registry):
    rt = instantiate(forum, forum_registry)
    rt.reconfigure([INSERT_FR])
    rt.send("C.ihm", _fr("bonjour"))
    listed = rt.send("V.ihm", Message("", {"langue": "EN"})).result
    assert [m.payload for m in listed] == ["hello"]
    assert rt.send("V.ihm", Message("", {"langue": "DE"})).result == []
    assert len(rt.send("V.ihm", Message("")).result) == 1


def test_unknown_words_bracketed():
    assert translate_text("bonjour Zorglub", {"bonjour": "hello"}) == "hello [Zorglub]"


def test_empty_and_unroutable(forum, forum_registry):
    rt = RuntimeService(Assembly("empty"), forum_registry)
    with pytest.raises(UnroutableMessage):
        rt.send("C.ihm", Message("x"))


def test_missing_behavior(forum):
    reg = load_registry(FIXTURES / "forum-registry")
    ghosty = {**reg.descriptors}
    c = ghosty["C"]
    ghosty["C"] = c.__class__(c.name, c.provided, c.required, c.ui, c.config, "telepathy")
    with pytest.raises(BehaviorMissing):
        instantiate(forum, Registry(ghosty, reg.profiles, reg.parameters))


def test_concurrent_sends_and_reconfigurations(forum, forum_registry):
    rt = instantiate(forum, forum_registry)
    rt.reconfigure([INSERT_FR])
    errors: list[Exception] = []

    def sender():
        for _ in range(50):
            try:
                rt.send("C.ihm", _fr("bonjour"))
            except BehaviorRejected:
                pass  # lands between a remove and the next insert
            except Exception as exc:  # anything else is a torn structure
                errors.append(exc)

    def flipper():
        for _ in range(25):
            rt.reconfigure([Remove(sorted(rt.assembly.adapter_tags)[0])])
            rt.reconfigure([INSERT_FR])

    threads = [threading.Thread(target=sender) for _ in range(3)] + [threading.Thread(target=flipper)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    assert all(line.split("\t")[1:] == ["EN", "hello"] for line in rt.forum().dump())
    assert rt.delivered == len(rt.forum().store)


def test_static_clean_means_runtime_accepts():
    """After adaptation no ui send is refused at runtime."""
    rng = random.Random(17)
    sent = 0
    for _ in range(150):
        a, reg, c = randgen.random_case(rng, fanout=1, connect_prob=1.0)
        try:
            a, _ = adapt(a, c, reg)
        except Unsatisfiable:
            continue
        assert check_axioms(propagate(a, reg, c)) == []
        rt = instantiate(a, reg)
        out = rt.send("i0.ihm", Message("x", dict(c.assignments)))
        assert "i0" in out.trace
        sent += 1
    assert sent > 50
