from typing import Optional


class NSOTreeError(Exception):
    """
    Base class of the errors raised by this package.
    """


class NoEventsError(NSOTreeError, ValueError):
    """
    A dataset, batch or fold has no observed event where one is required.
    """


class SchemaError(NSOTreeError, ValueError):
    """
    A CSV file, column schema, checkpoint or tree export does not match the
    expected format.
    """

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"

        super().__init__(message)
        self.line = line


class TrainingError(NSOTreeError, RuntimeError):
    """
    Training produced a non-finite loss.
    """

    def __init__(self, message: str, epoch: int, batch: int) -> None:
        super().__init__(f"epoch {epoch}, batch {batch}: {message}")
        self.epoch = epoch
        self.batch = batch
