from __future__ import annotations

from pathlib import Path

import pytest

from adaptrix.assembly import parse_adl
from adaptrix.profile import ContextProfile
from adaptrix.registry import load_registry

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
SCENARIOS = ROOT / "scenarios"

# the translator profile as printed in the original listing; only the opening
# "<" of the root element, lost in extraction, has been restored
TRANSLATOR_LISTING = """\
<profile>
  <component>TranslationFR_EN</component>
  <point>
    <interface>Translation</interface>
    <method>translate</method>
    <argument>text</argument>
    <argtype>String</argtype>
    <precondition>langue = 'FR' </precondition>
  </point>
  <point>
    <interface>Translation</interface>
    <method>translate</method>
    <returntype>String</returntype>
    <function>=</function>
    <postcondition>langue = 'EN' </postcondition>
  </point>
</profile>
"""


def ctx(**values: str) -> ContextProfile:
    return ContextProfile(dict(values))


@pytest.fixture(scope="session")
def forum_registry():
    return load_registry(FIXTURES / "forum-registry")


@pytest.fixture(scope="session")
def chain_registry():
    return load_registry(FIXTURES / "forum-base", FIXTURES / "chain-registry")


@pytest.fixture(scope="session")
def forum_adl() -> str:
    return (FIXTURES / "forum.adl").read_text()


@pytest.fixture
def forum(forum_registry, forum_adl):
    return parse_adl(forum_adl, forum_registry)
