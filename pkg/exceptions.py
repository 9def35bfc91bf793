from typing import Any, Dict, Optional


class CoopMetaError(Exception):
    """
    Base error carrying the same code/message/details payload for every failure.
    The exit code is what the command line returns when the error escapes.
    """

    exit_code = 1
    default_code = "COOPMETA_ERROR"

    def __init__(self, message: str, code: Optional[str] = None, details: Any = None):
        super().__init__(message)
        self.message = message
        self.code = code or self.default_code
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class ConfigurationError(CoopMetaError):
    """Invalid parameters, shape mismatches, wrong label variants, unsupported ops"""

    exit_code = 2
    default_code = "CONFIGURATION_ERROR"


class UsageError(CoopMetaError):
    """API misuse such as stepping an episode that already finished"""

    exit_code = 2
    default_code = "USAGE_ERROR"


class StorageError(CoopMetaError):
    """Missing or corrupt checkpoint and manifest files"""

    exit_code = 2
    default_code = "STORAGE_ERROR"

    def __init__(self, message: str, path: str = "", code: Optional[str] = None, details: Any = None):
        super().__init__(message, code=code, details=details if details is not None else {"path": path})
        self.path = path


class NumericError(CoopMetaError):
    """Non-finite values in states, gradients or losses"""

    exit_code = 3
    default_code = "NUMERIC_ERROR"

    def __init__(self, message: str, record: str = "", code: Optional[str] = None, details: Any = None):
        super().__init__(message, code=code, details=details if details is not None else {"record": record})
        self.record = record
