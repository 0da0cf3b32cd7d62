"""Exact-arithmetic desk-scale models of mixed Tsirelson spaces and their
Bourgain-Delbaen relatives: norming-set norm computation, node arenas with
dual systems, evaluation-functional analyses, rapidly increasing sequences,
and the constructive transfer machinery between the two sides."""

__version__ = "0.1.0"
