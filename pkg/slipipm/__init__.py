"""slipipm: método de punto interior de un solo bucle (SLIP), determinista y estocástico."""

__version__ = "0.1.0"
