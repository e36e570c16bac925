"""Mann iteration for strict pseudo-contractions with certified residual bounds."""

__version__ = "0.1.0"
