"""Two-database symmetric PIR over imperfect QKD key channels."""

__version__ = "0.1.0"
