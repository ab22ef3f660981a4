"""Reference model server for the line-delimited stdio inference protocol."""

__version__ = "0.1.0"

from .toy import make_toy_model, toy_parameters  # noqa: F401
from .server import ServerConfig, serve  # noqa: F401
