"""Near-field RIS-assisted rate-splitting with covertness against a warden."""
from .config import AOConfig, SystemConfig
from .errors import DomainError, InfeasibleError, InvalidArgument

__version__ = "0.1.0"

__all__ = ["AOConfig", "SystemConfig", "DomainError", "InfeasibleError", "InvalidArgument"]
