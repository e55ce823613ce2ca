"""kLog: aprendizado relacional por graficalização e kernels de grafos."""

__version__ = "0.1.0"
