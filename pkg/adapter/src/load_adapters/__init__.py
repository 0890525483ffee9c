"""Adapter processes that serve pre-trained forecasters over the benchmark
wire protocol (newline-delimited JSON on stdin/stdout, version 1)."""

__version__ = "0.1.0"
