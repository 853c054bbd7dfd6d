# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""


class NotYetEvaluatedError(Exception):
    def __init__(self, message):
        super().__init__(message)


class SizeMismatchError(Exception):
    def __init__(self, message):
        super().__init__(message)


class WrongDimensionError(Exception):
    def __init__(self, message):
        super().__init__(message)


class WrongArgumentsError(Exception):
    def __init__(self, message):
        super().__init__(message)


class ConfigError(WrongArgumentsError):
    def __init__(self, message):
        super().__init__(message)


class SanityError(Exception):
    def __init__(self, message):
        super().__init__(message)


class AdjointError(Exception):
    def __init__(self, message):
        super().__init__(message)


class NonFiniteError(Exception):
    def __init__(self, message):
        super().__init__(message)


class SingularInversionError(Exception):
    def __init__(self, message):
        super().__init__(message)


class IntegrationBlowupError(Exception):
    """Raised when the solver state stops being finite.

    Attributes
    ----------
    step: int
        Index of the solver step (within the current rollout) that produced
        the non-finite state.
    obs_index: int or None
        Index of the observation interval being integrated, when known.
    trajectory: int or None
        Batch element (trajectory) that blew up, when known.

    """
    def __init__(self, message, step=None, obs_index=None, trajectory=None):
        super().__init__(message)
        self.step = step
        self.obs_index = obs_index
        self.trajectory = trajectory


class TrainingDivergedError(Exception):
    def __init__(self, message):
        super().__init__(message)


class SamplerDivergedError(Exception):
    def __init__(self, message, n_rejected=None, n_iterations=None):
        super().__init__(message)
        self.n_rejected = n_rejected
        self.n_iterations = n_iterations


class FileFormatError(Exception):
    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset
