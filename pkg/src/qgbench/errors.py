"""Exception types shared across the pipeline.

Exit-code mapping lives in the CLI: ConfigError -> 1, DependencyError -> 2,
runtime failures under --strict -> 3.
"""


class QGBenchError(Exception):
    """Base class for all qgbench errors."""


class ConfigError(QGBenchError):
    """Invalid run configuration or missing credentials."""


class DependencyError(QGBenchError):
    """A stage was invoked before the stage it depends on."""


class EmptyCorpusError(QGBenchError):
    """Ingestion produced zero usable contexts."""


class TransportError(QGBenchError):
    """Chat endpoint unreachable after exhausting retries."""


class RetryableTransportError(TransportError):
    """Transient transport failure (timeout, 429, 5xx); the gateway retries these."""


class ProtocolError(QGBenchError):
    """Endpoint replied with a body that does not match the chat-completion schema."""


class ParseError(QGBenchError):
    """Model output did not match the expected format.

    Carries the raw model text so failed generations can be audited.
    """

    def __init__(self, message: str, raw: str | None = None):
        super().__init__(message)
        self.raw = raw


class GenerationParseError(ParseError):
    """Ordered-list question output unparsable after the corrective retry."""


class ClassificationParseError(ParseError):
    """No category code found in the judge reply after the corrective retry."""


class CoverageParseError(ParseError):
    """Sentence-selection reply unparsable or out of bounds after the corrective retry."""


class RatingParseError(ParseError):
    """No 0-5 score found in the judge reply after the corrective retry."""


class EmptyAnswerError(QGBenchError):
    """Answer model returned an empty reply."""


class DatasetImportError(QGBenchError):
    """Imported question file is malformed; message names the offending line."""


class IntegrityError(QGBenchError):
    """Stage outputs cross-reference question ids that do not exist."""
