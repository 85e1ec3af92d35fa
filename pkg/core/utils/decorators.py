from functools import wraps
from typing import Callable

from .error_handling_standerizer import PromptCalError, format_error_response
from .utility_files import get_logger

logger = get_logger(__name__)


def with_stage(stage: str):
    """
    Decorator for pipeline stages.
    A PromptCalError raised by the stage is logged with the stage name and returned
    as a gap marker dict instead of aborting the run. Other exceptions propagate.
    """
    def decorator(func: Callable):
        @wraps(func)
        def wrapper(*args, **kwargs):
            logger.info(f"[{stage.upper()}] start")
            try:
                return func(*args, **kwargs)
            except PromptCalError as e:
                logger.error(f"[{stage.upper()}] {type(e).__name__}: {e.message}")
                return {"gap": format_error_response(e, stage=stage)}
        return wrapper
    return decorator


def is_gap(result) -> bool:
    """Check whether a stage result is a gap marker"""
    return isinstance(result, dict) and "gap" in result
