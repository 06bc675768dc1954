"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) which the CLI prints
verbatim, and capsule-opening errors carry the ``stage`` that rejected the
input so callers can tell an unseal failure from an authorization failure.
"""


class DataCapsuleError(Exception):
    stage: str | None = None

    @property
    def code(self) -> str:
        return type(self).__name__


class Malformed(DataCapsuleError):
    """Bytes that do not decode to a canonical value of the expected type."""

    stage = "decode"


# lsss / abe

class InvalidFormula(DataCapsuleError, ValueError):
    pass


class NotAuthorized(DataCapsuleError):
    """The attribute set does not satisfy the access structure."""

    stage = "abe"


class UnknownSuite(DataCapsuleError):
    stage = "suite"


class SuiteMismatch(DataCapsuleError):
    stage = "suite"


class EmptyAttributeSet(DataCapsuleError, ValueError):
    pass


# policy

class PolicyError(DataCapsuleError):
    stage = "policy"


class MalformedXml(PolicyError):
    pass


class UnsupportedElement(PolicyError):
    pass


class EmptyCondition(PolicyError):
    pass


# registry

class RegistryError(DataCapsuleError):
    stage = "registry"


class DuplicateDid(RegistryError):
    pass


class InvalidDdo(RegistryError):
    pass


class UnknownPublisher(RegistryError):
    pass


class MalformedPolicy(RegistryError):
    pass


class LedgerCorrupted(RegistryError):
    """The ledger file fails chain verification; ``seq`` is the first bad record."""

    def __init__(self, seq: int, reason: str):
        super().__init__(f"record {seq}: {reason}")
        self.seq = seq


# credentials

class CredentialError(DataCapsuleError):
    stage = "credentials"


class EmptyClaims(CredentialError, ValueError):
    pass


class EmptyCredentialList(CredentialError, ValueError):
    pass


class InvalidEmbeddedCredential(CredentialError):
    pass


class InvalidPresentation(CredentialError):
    pass


# capsule

class CapsuleError(DataCapsuleError):
    stage = "capsule"


class EmptyKeySlots(CapsuleError, ValueError):
    pass


class UnknownVersion(CapsuleError):
    stage = "decode"


class NoSlotForRecipient(CapsuleError):
    stage = "slot"


class UnsealFailure(CapsuleError):
    stage = "unseal"


class ChallengeMismatch(CapsuleError):
    stage = "challenge"


class NotYetReleased(CapsuleError):
    stage = "release"


class AeadFailure(CapsuleError):
    stage = "aead"


class PolicyHashMismatch(CapsuleError):
    stage = "aead"


# protocol

class ProtocolError(DataCapsuleError):
    stage = "protocol"
    step: int | None = None


class UnresolvableRecipient(ProtocolError):
    pass


class ChallengeRecipientMismatch(ProtocolError):
    pass


class MalformedKey(ProtocolError):
    pass


class EmptyRecipientList(ProtocolError):
    pass


class PolicyNotFound(ProtocolError):
    pass


class ExchangeError(ProtocolError):
    """A protocol step failed; ``step`` is the network-process step number."""

    def __init__(self, step: int, cause: DataCapsuleError):
        super().__init__(f"step {step}: {cause.code}: {cause}")
        self.step = step
        self.cause = cause

    @property
    def code(self) -> str:
        return self.cause.code
