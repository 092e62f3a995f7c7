"""Exception hierarchy for the askless toolkit.

Every failure mode callers are expected to handle gets its own class so
they can be caught individually; all inherit from :class:`AsklessError`.
"""


class AsklessError(Exception):
    """Base class for all askless errors."""


# graph construction
class CycleDetected(AsklessError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("directed cycle: " + " -> ".join(self.cycle))


class UnknownNode(AsklessError):
    pass


class DuplicateEdge(AsklessError):
    pass


class SelfLoop(AsklessError):
    pass


# CPT indexing / evaluation
class MissingParentValue(AsklessError):
    pass


class InvalidLevel(AsklessError):
    pass


class IncompleteAssignment(AsklessError):
    pass


# schema / data ingestion
class MalformedDocument(AsklessError):
    pass


class DuplicateAbbr(AsklessError):
    pass


class MissingLabelVar(AsklessError):
    pass


class UnknownColumn(AsklessError):
    pass


class MissingColumn(AsklessError):
    pass


class EmptyFile(AsklessError):
    pass


class MissingUsageAnswer(AsklessError):
    pass


class ProfileSchemaMismatch(AsklessError):
    pass


# learning
class EmptyDataset(AsklessError):
    pass


class InconsistentConstraints(AsklessError):
    pass


# inference
class TargetInEvidence(AsklessError):
    pass


class ZeroProbabilityEvidence(AsklessError):
    """The evidence has probability zero under the network (exact engine)."""


class AllZeroWeights(AsklessError):
    """Every sample had weight zero: evidence inconsistent or too few samples."""


class ConflictingEvidence(AsklessError):
    pass


# evaluation / reduction
class LengthMismatch(AsklessError):
    pass


class UnknownClass(AsklessError):
    pass


class KTooLarge(AsklessError):
    pass


class UnlabeledTestSet(AsklessError):
    pass


# survey sessions
class UnknownSession(AsklessError):
    pass


class QuestionNotInSet(AsklessError):
    pass


class AlreadyAnswered(AsklessError):
    pass


class ModelNotLoaded(AsklessError):
    pass
