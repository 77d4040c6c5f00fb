"""Polar coding library: SC / Fast-SSC / SCL decoders, code automorphisms,
ensemble decoding, and a Monte-Carlo AWGN simulation harness."""

__version__ = "0.1.0"
