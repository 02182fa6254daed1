"""Exception hierarchy shared by every adaptrix module."""
from __future__ import annotations


class AdaptrixError(Exception):
    """Base class for all errors raised by adaptrix."""


# -- document parsing ------------------------------------------------------

class FormatError(AdaptrixError):
    """Malformed document (bad tags, bad line syntax)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownElement(FormatError):
    pass


class MalformedCondition(FormatError):
    pass


class DuplicateParameter(FormatError):
    pass


# -- assemblies ------------------------------------------------------------

class AssemblyError(AdaptrixError):
    pass


class UnknownDescriptor(AssemblyError):
    pass


class DanglingConnection(AssemblyError):
    pass


class TypeMismatch(AssemblyError):
    pass


class InvalidTarget(AssemblyError):
    pass


class NotAdapterTagged(AssemblyError):
    pass


# -- registry --------------------------------------------------------------

class RegistryError(AdaptrixError):
    pass


class ManifestMissing(RegistryError):
    pass


class DescriptorInvalid(RegistryError):
    def __init__(self, name: str, cause: str):
        self.name = name
        self.cause = cause
        super().__init__(f"descriptor {name!r} invalid: {cause}")


class ProfileOrphan(RegistryError):
    pass


# -- composition / adaptation ---------------------------------------------

class NonTermination(AdaptrixError):
    """Propagation exceeded its iteration cap. Always an engine bug."""


class NoConflict(AdaptrixError):
    pass


class AdaptationFailed(AdaptrixError):
    """Base for adapt() outcomes that leave the assembly unchanged.

    ``report`` carries the AdaptationReport built up to the failure.
    """

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class Unsatisfiable(AdaptationFailed):
    pass


class PolicyAbstained(AdaptationFailed):
    pass


class RegressionDetected(AdaptationFailed):
    pass


# -- runtime ---------------------------------------------------------------

class RuntimeFault(AdaptrixError):
    pass


class BehaviorMissing(RuntimeFault):
    pass


class UnroutableMessage(RuntimeFault):
    pass


class BehaviorRejected(RuntimeFault):
    def __init__(self, instance: str, parameter: str, expected: str, actual: str | None):
        self.instance = instance
        self.parameter = parameter
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"{instance} rejected message: {parameter}={actual!r}, requires {expected!r}"
        )


# -- scenarios -------------------------------------------------------------

class ScenarioError(AdaptrixError):
    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


class ExpectationFailed(ScenarioError):
    def __init__(self, step: int, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(step, f"expected {expected!r}, got {actual!r}")
