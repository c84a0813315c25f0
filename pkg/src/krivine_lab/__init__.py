"""Execution-time laboratory for the lambda-calculus: Krivine machine
variants, non-idempotent intersection types, and quantitative semantics."""

__version__ = "0.1.0"
