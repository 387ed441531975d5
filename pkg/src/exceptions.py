from typing import Optional


class UregmError(ValueError):
    """Base class for every failure the pipeline reports to its caller."""


class DataValidationError(UregmError):
    def __init__(self, message: str, row: Optional[int] = None, token: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.token = token


class SchemaMismatchError(UregmError):
    def __init__(self, column: str, message: Optional[str] = None):
        super().__init__(message or f"missing feature column '{column}'")
        self.column = column


class TrainingError(UregmError):
    def __init__(self, message: str, kind: Optional[str] = None, fold: Optional[int] = None,
                 label: Optional[str] = None):
        context = []
        if label is not None:
            context.append(f"model {label}")
        if kind is not None:
            context.append(f"learner {kind}")
        if fold is not None:
            context.append(f"fold {fold}")
        prefix = f"[{', '.join(context)}] " if context else ""
        super().__init__(prefix + message)
        self.detail = message
        self.kind = kind
        self.fold = fold
        self.label = label

    def with_label(self, label: str) -> "TrainingError":
        return TrainingError(self.detail, kind=self.kind, fold=self.fold, label=label)
