"""Exception hierarchy shared across the pipeline."""


class LabelPipeError(Exception):
    """Base class for all labelpipe errors."""


# --- corpus ---------------------------------------------------------------

class MalformedRecord(LabelPipeError):
    def __init__(self, line_number, reason=""):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"malformed record at line {line_number}: {reason}")


class DuplicateId(LabelPipeError):
    def __init__(self, sample_id):
        self.sample_id = sample_id
        super().__init__(f"duplicate sample id: {sample_id!r}")


class EmptyText(LabelPipeError):
    def __init__(self, sample_id):
        self.sample_id = sample_id
        super().__init__(f"empty text for sample id: {sample_id!r}")


class UnknownLabel(LabelPipeError):
    def __init__(self, sample_id, label):
        self.sample_id = sample_id
        self.label = label
        super().__init__(f"sample {sample_id!r} has label {label!r} not in schema")


class DegenerateSchema(LabelPipeError):
    def __init__(self, schema):
        self.schema = list(schema)
        super().__init__(f"schema needs >= 2 classes, got {self.schema!r}")


class InsufficientSamples(LabelPipeError):
    def __init__(self, needed, available):
        self.needed = needed
        self.available = available
        super().__init__(f"split needs {needed} samples, corpus has {available}")


# --- annotator ------------------------------------------------------------

class OversizedBatch(LabelPipeError):
    pass


class ParseFailure(LabelPipeError):
    """A provider response could not be mapped to a full label vector."""


class CountMismatch(ParseFailure):
    def __init__(self, got, expected):
        self.got = got
        self.expected = expected
        super().__init__(f"expected {expected} labels, parsed {got}")


class UnknownToken(ParseFailure):
    def __init__(self, index, token):
        self.index = index
        self.token = token
        super().__init__(f"item {index}: token {token!r} not in lexicon")


class ProviderUnreachable(LabelPipeError):
    pass


class AuthMissing(LabelPipeError):
    def __init__(self, env_var):
        self.env_var = env_var
        super().__init__(f"auth token environment variable {env_var!r} is not set")


# --- consistency ----------------------------------------------------------

class EmptyVector(LabelPipeError):
    pass


# --- trainer --------------------------------------------------------------

class DegenerateLabels(LabelPipeError):
    pass


class NonFiniteLoss(LabelPipeError):
    pass


class NonZeroExit(LabelPipeError):
    def __init__(self, code, stderr_tail=""):
        self.code = code
        self.stderr_tail = stderr_tail
        super().__init__(f"external trainer exited with code {code}: {stderr_tail}")


class IncompletePredictions(LabelPipeError):
    def __init__(self, missing_ids):
        self.missing_ids = list(missing_ids)
        super().__init__(f"predictions missing {len(self.missing_ids)} ids: "
                         f"{self.missing_ids[:5]}")


# --- evaluator ------------------------------------------------------------

class MisalignedIds(LabelPipeError):
    pass


class NoPositives(LabelPipeError):
    pass


class EmptyInput(LabelPipeError):
    pass


class RaggedGrid(LabelPipeError):
    def __init__(self, missing_cells):
        self.missing_cells = list(missing_cells)
        super().__init__(f"missing (model, arm, task) cells: {self.missing_cells}")


class TaskSetMismatch(LabelPipeError):
    pass


# --- review / pipeline ----------------------------------------------------

class MissingRun(LabelPipeError):
    def __init__(self, what):
        self.what = what
        super().__init__(f"no completed run for {what}")


class OrderViolation(LabelPipeError):
    """A workflow step was requested before its prerequisite step ran."""


class ConfigError(LabelPipeError):
    pass
