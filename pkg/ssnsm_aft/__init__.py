from importlib.metadata import PackageNotFoundError, metadata

try:
    dist_metadata = metadata("ssnsm-aft")
    __version__ = dist_metadata.get("Version")
    __summary__ = dist_metadata.get("Summary")
except PackageNotFoundError:
    __version__ = "0.0.0"
    __summary__ = "AFT regression with a semiparametric skew-normal scale mixture error"
