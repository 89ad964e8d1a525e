"""Exception types shared across the package."""


class MotionEditError(Exception):
    pass


class InvalidConfigError(MotionEditError, ValueError):
    pass


class ShapeError(MotionEditError, ValueError):
    pass


class InvalidRotationError(MotionEditError, ValueError):
    pass


class Degenerate6DError(MotionEditError, ValueError):
    def __init__(self, msg, frame=None, joint=None):
        if frame is not None:
            msg = f"{msg} (frame={frame}, joint={joint})"
        super().__init__(msg)
        self.frame = frame
        self.joint = joint


class MustCanonicalizeError(MotionEditError, ValueError):
    pass


class MustNormalizeError(MotionEditError, ValueError):
    pass


class StatsMismatchError(MotionEditError, ValueError):
    pass


class InvalidLexiconError(MotionEditError, ValueError):
    pass


class CacheParseError(MotionEditError, ValueError):
    def __init__(self, msg, line):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class MissingMotionError(MotionEditError, FileNotFoundError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"missing motions: {', '.join(self.missing)}")


class GimbalWarning(UserWarning):
    """Heading is undefined because the forward axis is parallel to gravity."""


class SingularCovarianceWarning(UserWarning):
    pass
