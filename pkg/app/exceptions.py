#!/usr/bin/python3
# -----------------------------------------------------------
# Define project related exceptions
# -----------------------------------------------------------

class NrffError(Exception):
    """
    Base class of every error raised by the renderer, mapped to exit code 1 by the cli
    """


class InvalidConfig(NrffError):
    """
    Exception for configuration values breaking an invariant
    """
    def __init__(self, error_details):
        message = f"Invalid configuration: {str(error_details)}"
        super().__init__(message)


class NonFiniteValue(NrffError):
    """
    Exception for NaN or infinite values met by an operation
    """
    def __init__(self, operation, error_details=""):
        message = f"Non-finite value in {operation}"
        if error_details:
            message = f"{message}: {str(error_details)}"
        self.operation = operation
        super().__init__(message)


class WidthMismatch(NrffError):
    """
    Exception for vectors whose width does not match what a layer or decoder expects
    """
    def __init__(self, expected, received):
        message = f"Width mismatch: expected {expected}, received {received}"
        super().__init__(message)


class DegenerateDirection(NrffError):
    """
    Exception for zero-length direction vectors
    """
    def __init__(self, error_details):
        message = f"Degenerate direction: {str(error_details)}"
        super().__init__(message)


class InvalidBandwidth(NrffError):
    """
    Exception for nonpositive ASG bandwidths
    """
    def __init__(self, error_details):
        message = f"ASG bandwidths must be positive: {str(error_details)}"
        super().__init__(message)


class LengthMismatch(NrffError):
    """
    Exception for per-lobe parameter lists inconsistent with the frame set
    """
    def __init__(self, error_details):
        message = f"Length mismatch: {str(error_details)}"
        super().__init__(message)


class DimensionMismatch(NrffError):
    """
    Exception for images compared with different dimensions
    """
    def __init__(self, shape_a, shape_b):
        message = f"Images dimensions differ: {shape_a} vs {shape_b}"
        super().__init__(message)


class ImageTooSmall(NrffError):
    """
    Exception for images smaller than the SSIM window
    """
    def __init__(self, shape, window):
        message = f"Image of shape {shape} is smaller than the {window}x{window} SSIM window"
        super().__init__(message)


class DatasetError(NrffError):
    """
    Exception for missing or malformed dataset files
    """
    def __init__(self, error_details):
        message = f"Cannot load dataset: {str(error_details)}"
        super().__init__(message)


class EmptyDataset(NrffError):
    """
    Exception empty training set
    """
    def __init__(self, error_details):
        message = f"Training set is empty, please check your dataset configuration {str(error_details)}"
        super().__init__(message)


class CheckpointError(NrffError):
    """
    Exception for checkpoints that cannot be written or read
    """
    def __init__(self, error_details):
        message = f"Checkpoint error: {str(error_details)}"
        super().__init__(message)


class CorruptCheckpoint(CheckpointError):
    """
    Exception for truncated files, bad magic bytes or inconsistent tensor tables
    """
    def __init__(self, path, error_details):
        super().__init__(f"{path} is corrupt ({error_details})")


class CheckpointVersionMismatch(CheckpointError):
    """
    Exception for checkpoints written with another format version
    """
    def __init__(self, path, found, expected):
        super().__init__(f"{path} has format version {found}, expected {expected}")


class NonFiniteLoss(NrffError):
    """
    Exception raised by the training loop when the loss diverges
    """
    def __init__(self, step, error_details):
        message = f"Non-finite loss at step {step}: {str(error_details)}"
        self.step = step
        super().__init__(message)
