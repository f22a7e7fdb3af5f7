import ska_helpers

__version__ = ska_helpers.get_version(__package__)
