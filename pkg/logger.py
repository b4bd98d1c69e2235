import logging
import os
import sys
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

LOG_FILE = os.getenv("LOG_FILE", "fso_runs.log")

# Set debug mode based on environment variable
DEBUG = os.getenv("DEBUG", "False").lower() == "true"

formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

# Create logger
logger = logging.getLogger("fso_backhaul")
logger.setLevel(os.getenv("LOG_LEVEL", "INFO").upper())
logger.propagate = False

if not logger.handlers:
    # Console handler
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    # File handler, skipped when LOG_FILE is empty
    if LOG_FILE:
        file_handler = logging.FileHandler(LOG_FILE)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)


def setup_logger():
    """Ensure the logger is set up correctly"""
    logger.debug("Logger initialized at level %s", logging.getLevelName(logger.level))
    return logger


def debug(message):
    """Log debug message if DEBUG is enabled"""
    if DEBUG:
        logger.debug(message)


def info(message):
    """Log info message"""
    logger.info(message)


def warning(message):
    """Log warning message"""
    logger.warning(message)


def error(message):
    """Log error message"""
    logger.error(message)


def critical(message):
    """Log critical message"""
    logger.critical(message)
