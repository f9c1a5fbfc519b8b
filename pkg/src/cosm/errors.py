"""Exception hierarchy shared by every layer of the middleware."""


class CosmError(Exception):
    """Base class for all middleware errors."""


# -- architecture description -------------------------------------------------

class ADLError(CosmError):
    pass


class MalformedXML(ADLError):
    pass


class SchemaViolation(ADLError):
    pass


class DanglingReference(ADLError):
    pass


class DuplicateId(ADLError):
    pass


class MissingFactory(ADLError):
    pass


class DeclarationMismatch(ADLError):
    """A factory produced an instance that disagrees with its declaration."""


# -- kernel -------------------------------------------------------------------

class KernelError(CosmError):
    pass


class ComponentNotFound(KernelError):
    pass


class NoSuchMethod(KernelError):
    pass


class UnknownTarget(KernelError):
    pass


class DoesNotRecognizeSelector(KernelError):
    def __init__(self, target, selector):
        super().__init__(f"{target} does not recognize selector {selector!r}")
        self.target = target
        self.selector = selector


# -- context ------------------------------------------------------------------

class UnknownEntity(CosmError):
    pass


# -- policy -------------------------------------------------------------------

class PolicyError(CosmError):
    pass


class InvalidPolicy(PolicyError):
    pass


class PolicyNotFound(PolicyError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class IndexOutOfRange(PolicyError, IndexError):
    pass


class UnboundExternalVariable(PolicyError):
    pass


class PolicyTypeError(PolicyError, TypeError):
    pass


class ChainDepthExceeded(PolicyError):
    pass


class ExpressionSyntaxError(PolicyError):
    pass


# -- adaptation ---------------------------------------------------------------

class AdaptationError(CosmError):
    pass


class UnresolvableTarget(AdaptationError):
    pass


class UnverifiedPlan(AdaptationError):
    pass


class ActionFailure(AdaptationError):
    pass


class VerificationFailed(AdaptationError):
    def __init__(self, plan, outcome):
        codes = ", ".join(d.code for d in outcome.errors)
        super().__init__(f"plan {plan.id} failed verification: {codes}")
        self.plan = plan
        self.outcome = outcome


# -- harness ------------------------------------------------------------------

class ScenarioError(CosmError):
    pass


class ScenarioParseError(ScenarioError):
    pass
