class ExtractError(Exception):
    """Extraction cannot proceed (missing weights, too many bad images, ...)."""


class VerifyError(Exception):
    """An embedding file failed structural validation."""
