"""
Command-line verbs. Each module exposes `register(subparsers)`.
"""
