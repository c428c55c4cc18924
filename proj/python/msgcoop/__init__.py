"""Multi-prompt semantic-guided context optimization on a frozen toy dual encoder."""

from msgcoop._core import *  # noqa: F401,F403
from msgcoop._core import __version__  # noqa: F401
