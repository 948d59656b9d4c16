from .ad01 import read_ad01, write_ad01

__all__ = ["read_ad01", "write_ad01"]
