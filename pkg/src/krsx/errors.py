"""Exception hierarchy shared across the toolkit."""


class KrsxError(Exception):
    """Base class for every error raised by krsx."""


# record (de)serialization
class MalformedRecord(KrsxError):
    pass


class SchemaViolation(KrsxError):
    pass


# PDF ingestion
class IngestError(KrsxError):
    pass


class NotAPdf(IngestError):
    pass


class EncryptedPdf(IngestError):
    pass


class NoTextContent(IngestError):
    """The page carries no text-showing operators (scanned/image-only)."""


class UnsupportedFeature(IngestError):
    pass


class RegionNotFound(KrsxError):
    pass


# table extraction; all of these are structural failures that route to the next stage
class TableError(KrsxError):
    pass


class NoGrid(TableError):
    pass


class DegenerateGrid(TableError):
    pass


class OrphanOverflow(TableError):
    pass


class HeaderNotFound(TableError):
    pass


class EmptyTable(TableError):
    pass


class ColumnsNotSeparable(TableError):
    pass


# LLM client
class LlmError(KrsxError):
    pass


class Timeout(LlmError):
    pass


class EndpointUnavailable(LlmError):
    pass


class RuntimeFailure(LlmError):
    """Non-2xx reply from the model runtime."""

    def __init__(self, status: int, body: str):
        super().__init__(f"runtime returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class ReplyError(LlmError):
    pass


class NoPayload(ReplyError):
    pass


class MalformedPayload(ReplyError):
    pass


class ContractViolation(ReplyError):
    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail


class RetryNeeded(ReplyError):
    """Reply was unusable but the retry budget allows another prompt."""

    def __init__(self, cause: ReplyError):
        super().__init__(str(cause))
        self.cause = cause


# pipeline / corpus / evaluation
class IngestFailed(KrsxError):
    pass


class InvalidSpec(KrsxError):
    pass


class LayoutOverflow(KrsxError):
    pass


class MissingLabel(KrsxError):
    pass


class ConfigError(KrsxError):
    pass
