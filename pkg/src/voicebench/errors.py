"""Exception hierarchy shared by all voicebench modules."""


class VoicebenchError(Exception):
    """Base class for all domain errors raised by this package."""


# audio I/O

class MalformedWav(VoicebenchError):
    """RIFF/WAVE structure is invalid (bad magic, truncated chunks, ...)."""


class UnsupportedEncoding(VoicebenchError):
    """WAV encoding outside PCM 16/24/32-bit int or 32/64-bit float."""


class ChannelOutOfRange(VoicebenchError):
    pass


class NotMono(VoicebenchError):
    """Operation requires a single-channel buffer."""


class SampleRateMismatch(VoicebenchError):
    pass


# dsp

class EmptySignal(VoicebenchError):
    pass


class EmptyInput(VoicebenchError):
    pass


class NonColaConfig(VoicebenchError):
    """STFT config does not allow perfect overlap-add reconstruction."""


class InvalidBand(VoicebenchError):
    pass


class InvalidCutoff(VoicebenchError):
    pass


# metrics

class LengthMismatch(VoicebenchError):
    """Reference/estimate lengths differ by more than the trim tolerance."""


class DegenerateSignal(VoicebenchError):
    """Reference signal is all-zero."""


class ZeroEstimate(VoicebenchError):
    """Estimate is all-zero after mean removal."""


class TooShort(VoicebenchError):
    """Not enough analysis frames for the metric."""


class SingularProjection(VoicebenchError):
    pass


class SilentOrGatedOut(VoicebenchError):
    """No loudness block survives gating."""


class TooManySources(VoicebenchError):
    pass


class UnknownMetric(VoicebenchError):
    pass


# simulation

class UnachievableRT60(VoicebenchError):
    """Sabine inversion would need absorption >= 1."""


class SilentSpeech(VoicebenchError):
    pass


class SilentNoise(VoicebenchError):
    pass


class SameSpeaker(VoicebenchError):
    pass


class WrongRate(VoicebenchError):
    pass


class AssetNotFound(VoicebenchError):
    pass


# manifests

class NoAssetsFound(VoicebenchError):
    pass


class DuplicateAssetId(VoicebenchError):
    pass


class InsufficientAssets(VoicebenchError):
    pass


class SchemaVersionMismatch(VoicebenchError):
    pass


class MalformedLine(VoicebenchError):
    """A manifest line failed to parse; message includes the line number."""
