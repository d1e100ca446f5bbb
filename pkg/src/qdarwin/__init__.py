"""Dense simulation of decoherence, quantum Darwinism and measure-and-prepare channels."""

__version__ = "0.1.0"
