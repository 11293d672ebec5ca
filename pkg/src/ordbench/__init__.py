"""Ordinal notations, Skolem-hull queries and finitized infinitary derivations."""

from .ordinals import Cmp, KernelCfg, cmp, normalize, parse, to_text

__all__ = ["Cmp", "KernelCfg", "cmp", "normalize", "parse", "to_text"]
__version__ = "0.1.0"
