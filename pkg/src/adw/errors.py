"""Exception hierarchy shared across the platform modules."""


class AdwError(Exception):
    """Base class for all platform errors.

    ``code`` is the stable machine-readable identifier used in API error
    envelopes and CLI output.
    """

    code = "ADW_ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# --- ledger ---------------------------------------------------------------

class UnknownChannel(AdwError):
    code = "UNKNOWN_CHANNEL"


class NotMember(AdwError):
    code = "NOT_MEMBER"


class MalformedProposal(AdwError):
    code = "MALFORMED_PROPOSAL"


class ChainMismatch(AdwError):
    code = "CHAIN_MISMATCH"


# --- identity --------------------------------------------------------------

class DuplicateUser(AdwError):
    code = "DUPLICATE_USER"


class UnknownOrg(AdwError):
    code = "UNKNOWN_ORG"


class UnknownUser(AdwError):
    code = "UNKNOWN_USER"


class ExpiredToken(AdwError):
    code = "EXPIRED_TOKEN"


class BadSignature(AdwError):
    code = "BAD_SIGNATURE"


class UnknownSchema(AdwError):
    code = "UNKNOWN_SCHEMA"


class Unauthorized(AdwError):
    code = "UNAUTHORIZED"


# --- workflow --------------------------------------------------------------

class InvalidDefinition(AdwError):
    code = "INVALID_DEFINITION"


class MissingInput(AdwError):
    code = "MISSING_INPUT"


class OutOfOrder(AdwError):
    code = "OUT_OF_ORDER"


class InstanceClosed(AdwError):
    code = "INSTANCE_CLOSED"


class UnknownInstance(AdwError):
    code = "UNKNOWN_INSTANCE"


class UnknownSlot(AdwError):
    code = "UNKNOWN_SLOT"


class UnknownModel(AdwError):
    code = "UNKNOWN_MODEL"


# --- fip -------------------------------------------------------------------

class UnknownEventType(AdwError):
    code = "UNKNOWN_EVENT_TYPE"


class UnparseableMessage(AdwError):
    code = "UNPARSEABLE_MESSAGE"


class UnknownFarm(AdwError):
    code = "UNKNOWN_FARM"


# --- geo-analytics ---------------------------------------------------------

class SpanTooLarge(AdwError):
    code = "SPAN_TOO_LARGE"


class DegeneratePolygon(AdwError):
    code = "DEGENERATE_POLYGON"


class InfeasibleSkill(AdwError):
    code = "INFEASIBLE_SKILL"


class InsufficientWeatherData(AdwError):
    code = "INSUFFICIENT_WEATHER_DATA"


class UnknownTractor(AdwError):
    code = "UNKNOWN_TRACTOR"


# --- bench -----------------------------------------------------------------

class InvalidSpec(AdwError):
    code = "INVALID_SPEC"


class NoSaturation(AdwError):
    code = "NO_SATURATION"


class IoFailure(AdwError):
    code = "IO_FAILURE"


# --- gateway ---------------------------------------------------------------

class BadConfig(AdwError):
    code = "BAD_CONFIG"
