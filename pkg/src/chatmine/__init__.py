"""Tools for mining in-game chat: replay decoding, rule-based message
classification, abuse scoring, sentiment backends, and an annotation service.
"""

__version__ = "0.1.0"
