"""Exception types raised across the package.

Receiver-side errors that abort a single packet (ParityFail, NoPlateau, ...)
derive from PacketDrop so the streaming receive loop can catch them, drop the
packet, and re-arm the detector.
"""


class Dot11PhyError(Exception):
    """Base class for all package errors."""


class UnknownMcs(Dot11PhyError):
    """MCS index is out of range for the requested packet format."""


class ZeroSeed(Dot11PhyError):
    """Scrambler seed must be a nonzero 7-bit state."""


class UnsupportedRate(Dot11PhyError):
    """Code rate is not one of 1/2, 2/3, 3/4, 5/6."""


class LengthMismatch(Dot11PhyError):
    """Input length is inconsistent with the operation's block size."""


class NonPositiveNoiseVar(Dot11PhyError):
    """LLR demapping requires noise_var > 0."""


class BadShift(Dot11PhyError):
    """Cyclic shift magnitude must be less than one FFT period."""


class LengthOverflow(Dot11PhyError):
    """Signal field length exceeds the 12-bit limit."""


class FieldOverflow(Dot11PhyError):
    """A signal-field value does not fit its bit allocation."""


class DimensionMismatch(Dot11PhyError):
    """Channel tap dimensions do not match the stream counts."""


class BadMagic(Dot11PhyError):
    """IQ file does not start with the expected magic bytes."""


class VersionMismatch(Dot11PhyError):
    """IQ file was written with an unsupported format version."""


class TruncatedFile(Dot11PhyError):
    """IQ file ends before the sample payload announced in its header."""


class SoundingFailed(Dot11PhyError):
    """A station failed to detect or measure the sounding NDP."""


class NotAnNdp(Dot11PhyError):
    """The received frame is not a sounding NDP."""


class DegenerateChannel(Dot11PhyError):
    """CSI rows are too small to define beamforming weights."""


class PacketDrop(Dot11PhyError):
    """Base class for per-packet receiver failures (packet dropped, detector re-armed)."""


class ParityFail(PacketDrop):
    """L-SIG parity check failed."""


class NoPlateau(PacketDrop):
    """Fine timing found no usable autocorrelation plateau."""


class OutOfBounds(PacketDrop):
    """Estimator window extends past the end of the sample stream."""


class SingularChannel(PacketDrop):
    """Estimated MIMO channel is too ill-conditioned to invert."""
