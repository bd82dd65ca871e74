"""Exception hierarchy shared by every layer of the simulator."""


class ProtocolError(Exception):
    """Base class for all rejected operations."""


class Unauthorized(ProtocolError):
    pass


class DuplicateTag(ProtocolError):
    pass


class UnknownIdentity(ProtocolError):
    pass


class AlreadyRevoked(UnknownIdentity):
    pass


class EmptyContent(ProtocolError):
    pass


class NotFound(ProtocolError):
    pass


class CidCollision(ProtocolError):
    """Two different byte strings hashed to the same digest. Treated as fatal."""


# reputation model
class OutOfBounds(ProtocolError):
    pass


class WeightSumViolation(ProtocolError):
    pass


class BoundsViolation(ProtocolError):
    pass


class RangeViolation(ProtocolError):
    pass


class NegativeAmount(ProtocolError):
    pass


# task lifecycle
class InsufficientDeposit(ProtocolError):
    pass


class WrongState(ProtocolError):
    pass


class DuplicateBid(ProtocolError):
    pass


class DuplicateTask(ProtocolError):
    pass


class UnknownTask(ProtocolError):
    pass


class UnknownBid(ProtocolError):
    pass


class NotAssignedWorker(ProtocolError):
    pass


class BidNotAccepted(ProtocolError):
    pass


class ConflictOfInterest(ProtocolError):
    pass


class AlreadyEnrolled(ProtocolError):
    pass


class NotEnoughEvaluators(ProtocolError):
    pass


class MissingRatings(ProtocolError):
    pass


# ledgers
class MalformedTx(ProtocolError):
    pass


class UnknownClass(ProtocolError):
    pass


class EmptyQueue(ProtocolError):
    pass


class ExecutionFailed(ProtocolError):
    """An L2 transaction was rejected by the protocol; ``cause`` holds the original error."""

    def __init__(self, cause: ProtocolError):
        super().__init__(f"{type(cause).__name__}: {cause}")
        self.cause = cause


# oracle
class NotAssignedEvaluator(ProtocolError):
    pass


class DuplicateRating(ProtocolError):
    pass


class QuorumNotMet(ProtocolError):
    pass


# harness
class ConfigError(ProtocolError):
    pass


class FixtureMissing(ConfigError):
    pass


class UnknownAttack(ProtocolError):
    pass


class BadParams(ProtocolError):
    pass


class UnknownSeries(ProtocolError):
    pass
