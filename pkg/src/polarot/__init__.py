"""Polar-code oblivious transfer over the binary-input AWGN channel."""

__version__ = "0.1.0"
