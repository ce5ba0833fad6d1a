import logging
from functools import wraps
import os

def setup_logging(log_dir='logs', level=None, file_level=None, console_level=None):
    if not os.path.exists(log_dir):
        os.makedirs(log_dir)

    log_file = os.path.join(log_dir, 'kcenter.log')

    # A single 'level' applies to both handlers
    if level is not None:
        file_level = file_level or level
        console_level = console_level or level
    else:
        file_level = file_level or logging.DEBUG
        console_level = console_level or logging.WARNING

    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    fh = logging.FileHandler(log_file)
    fh.setLevel(file_level)

    # console on stderr, stdout carries JSON documents
    ch = logging.StreamHandler()
    ch.setLevel(console_level)

    file_formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    console_formatter = logging.Formatter('%(name)s - %(levelname)s - %(message)s')
    fh.setFormatter(file_formatter)
    ch.setFormatter(console_formatter)

    logger.addHandler(fh)
    logger.addHandler(ch)

    logging.getLogger('numba').setLevel(logging.WARNING)
    return logger

def get_logger(name):
    return logging.getLogger(name)

def log_exceptions(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except KCenterError as e:
            # certified outcomes and guards, no traceback
            logging.getLogger(func.__module__).debug(f"{type(e).__name__} in {func.__name__}: {str(e)}")
            raise
        except Exception as e:
            logging.getLogger(func.__module__).exception(f"Exception occurred in {func.__name__}: {str(e)}")
            raise
    return wrapper

class KCenterError(Exception):
    """Base class for solver-specific exceptions."""
    pass

class ModelError(KCenterError):
    """Raised when an instance, solution or witness is malformed."""
    pass

class GuardExceeded(KCenterError):
    """Raised when an exhaustive search would exceed its size guard."""
    pass

class LpError(KCenterError):
    """Raised when a linear system is malformed."""
    pass

class DegeneracyError(LpError):
    """Raised when the simplex meets a numerically singular basis."""
    pass

class ContractViolation(KCenterError):
    """Raised when a separation callback returns a cut the point satisfies."""
    pass

class CutLimitReached(KCenterError):
    """Raised when a cutting-plane or column-generation loop runs out of rounds."""
    pass

class DecompositionError(KCenterError):
    """Raised when a decomposition invariant fails at runtime."""
    pass

class InfeasibleRadius(KCenterError):
    """Certified failure of a radius guess."""

    def __init__(self, kind, message):
        super().__init__(f"{kind}: {message}")
        self.kind = kind

class InstanceInfeasible(KCenterError):
    """Raised when every radius guess fails."""
    pass

class FailureKind:
    LP_INFEASIBLE = "LP_INFEASIBLE"
    CUT_PROVED_INFEASIBLE = "CUT_PROVED_INFEASIBLE"
    CUT_LIMIT = "CUT_LIMIT"
    MATCHING_FAILED = "MATCHING_FAILED"
    UNCOVERED_CLIENT = "UNCOVERED_CLIENT"
    BACKEND_INFEASIBLE = "BACKEND_INFEASIBLE"
