"""Social learning in dynamic nonatomic routing games with an unknown state."""

__version__ = "0.1.0"
