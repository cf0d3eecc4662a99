"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures
to the documented families: usage/config = 2, data = 3, model/transport = 4.
"""

from __future__ import annotations


class EPGFError(Exception):
    exit_code = 1


class ConfigError(EPGFError, ValueError):
    """A configuration value violates its invariant."""

    exit_code = 2


class OrderTooLarge(ConfigError):
    pass


class DataError(EPGFError, ValueError):
    exit_code = 3


class InvalidResidue(DataError):
    def __init__(self, position: int, character: str):
        self.position = position
        self.character = character
        super().__init__(f"invalid residue {character!r} at position {position}")


class InvalidToken(DataError):
    pass


class EmptySequence(DataError):
    def __init__(self, msg: str = "sequence has no residues"):
        super().__init__(msg)


class EmptyCorpus(DataError):
    def __init__(self, msg: str = "corpus is empty"):
        super().__init__(msg)


class EmptySet(DataError):
    def __init__(self, msg: str = "sequence set is empty"):
        super().__init__(msg)


class MalformedHeader(DataError):
    def __init__(self, line: str):
        self.line = line
        super().__init__(f"malformed FASTA header: {line!r}")


class EmptyRecord(DataError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"FASTA record {record_id!r} has no residues")


class ModelFailure(EPGFError):
    exit_code = 4


class Unreachable(ModelFailure):
    pass


class ProtocolMismatch(ModelFailure):
    pass


class NonNormalizedResponse(ModelFailure):
    pass


class BindFailure(ModelFailure):
    pass


class DegenerateModel(ModelFailure):
    pass


class ScorerFailure(EPGFError):
    exit_code = 4
