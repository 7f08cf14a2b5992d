"""A wiki for rules in open-vocabulary, executable English.

Rulebases are plain English: sentences are predicates, indented nowhere,
with ``some-``/``that-`` words as variables.  This package parses them,
checks safety and stratification, answers questions under the stratified
declarative semantics, explains every answer (and every failure) in
English, compiles rulebases to portable SQL, and serves the whole thing
over HTTP with file-backed, revisioned storage.
"""

__version__ = "0.1.0"
