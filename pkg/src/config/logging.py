import sys

from loguru import logger


def setup_logging(log_level: str = "INFO") -> None:
    """Configure logging for the application.

    Args:
        log_level: The logging level to use
    """
    logger.remove()  # Remove default handler
    logger.add(sys.stderr, level=log_level.upper())


def progress_enabled() -> bool:
    """Tell whether tqdm progress bars should be shown.

    Returns
    -------
        True if the active stderr sink accepts INFO messages
    """
    try:
        from src.config.env import get_settings

        level = get_settings().log.upper()
    except Exception:
        return True
    return logger.level(level).no <= logger.level("INFO").no


def setup_logging_from_config() -> None:
    """Set up logging using the level from the environment settings."""
    try:
        from src.config.env import get_settings

        settings = get_settings()
        setup_logging(log_level=settings.log)
        logger.debug(f"Logging configured: level={settings.log}")

    except Exception as exc:
        setup_logging()
        logger.warning(f"Failed to load logging config, using defaults: {exc}")
