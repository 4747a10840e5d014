"""Keyword-attentive semantic matching toolkit.

End-to-end pieces: domain keyword extraction (PMI + diff-idf), BM25 retrieval
with keyword enhancement, rule-based and entity-replacement negative sampling,
the hashed cross-pair classifier, and a toy keyword-attentive transformer.
"""

__version__ = "0.1.0"
