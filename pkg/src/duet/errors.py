"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class DuetError(Exception):
    """Base class for every error raised by the engine."""


# core
class MalformedRotation(DuetError, ValueError):
    pass


class LengthMismatch(DuetError, ValueError):
    pass


class InvalidSkeleton(DuetError, ValueError):
    pass


class InvalidClip(DuetError, ValueError):
    pass


# behavior DSL
class MalformedBehavior(DuetError, ValueError):
    pass


class UnterminatedKey(MalformedBehavior):
    pass


class ReformatFailed(DuetError):
    pass


# embeddings / similarity
class DimMismatch(DuetError, ValueError):
    pass


# motion database
class DuplicateId(DuetError, KeyError):
    pass


class DanglingPair(DuetError, KeyError):
    pass


class EmptyDatabase(DuetError):
    pass


class IoError(DuetError, OSError):
    pass


class VersionMismatch(IoError):
    pass


# matching
class NoProgress(DuetError):
    pass


class NoInteractiveEntries(DuetError):
    pass


class TooShort(DuetError, ValueError):
    pass


# path finding
class NoPath(DuetError):
    pass


class NoSolution(DuetError):
    pass


class Timeout(DuetError):
    pass


# scheduler
class BehaviorEnd(DuetError):
    """Raised when the active brain ends the conversation."""


class NoIdleClip(DuetError):
    pass


# cognition
class DomainError(DuetError, ValueError):
    pass


class ProviderError(DuetError):
    pass


class MalformedReflection(DuetError):
    pass


class EmptyInstructionDb(DuetError):
    pass


class MalformedRow(DuetError, ValueError):
    pass


class NoCandidates(DuetError):
    pass


# generation / metrics
class ShapeMismatch(DuetError, ValueError):
    pass


class InvalidTranscript(DuetError, ValueError):
    pass
