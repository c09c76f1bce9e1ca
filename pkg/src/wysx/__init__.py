"""Mixed-mode secure multi-party computation DSL.

Reference and distributed interpreters for a small language in which code
alternates between per-party local blocks and jointly-run secure blocks,
plus a boolean-circuit backend that executes the secure blocks under a
classic xor-share protocol.
"""

__version__ = "0.1.0"
