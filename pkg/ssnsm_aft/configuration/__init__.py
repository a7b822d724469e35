from .logging import LOGGING, LOGLEVEL

__all__ = ("LOGGING", "LOGLEVEL")
