"""qgbench: generate questions from a text corpus with chat models and
measure them (type, length, context coverage, answerability, uncommonness,
required answer length) alongside imported human-authored question sets.
"""

__version__ = "0.1.0"
