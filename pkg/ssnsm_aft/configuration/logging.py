# Set LOGLEVEL in the environment to override a logging level of INFO.
from os import environ

LOGLEVEL = environ.get("LOGLEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "normal": {
            "format": "%(asctime)s %(name)s %(levelname)s: %(message)s",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        },
    },
    "handlers": {
        "console": {
            "level": LOGLEVEL,
            "class": "logging.StreamHandler",
            "formatter": "normal",
            "stream": "ext://sys.stderr",
        },
    },
    "loggers": {
        "ssnsm_aft": {
            "handlers": ["console"],
            "level": LOGLEVEL,
            "propagate": False,
        },
    },
}
