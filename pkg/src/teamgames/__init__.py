"""Exact solving and verification of finite-horizon dynamic games among teams."""

from .model import GameSpec, SpecError, dump_spec, load_spec
from .builtins import BUILTINS, builtin

__all__ = ["GameSpec", "SpecError", "load_spec", "dump_spec", "BUILTINS", "builtin"]
__version__ = "0.1.0"
