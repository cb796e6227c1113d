"""Remote oversight session: waterfall windows, change detection, chat,
screen-capture mode, and the command-file control channel."""

from .view import NoEpochs, Trace, WaterfallView, build_view  # noqa: F401
from .alerts import AlertEvent, ShapeMismatch, Thresholds, detect_change  # noqa: F401
from .session import (  # noqa: F401
    BadGain, CommandParseError, ModeForbidsControl, Session, SessionMode,
    TextTooLong, UnknownWindow, ViewerLimitExceeded, WindowState,
    parse_command,
)
