"""
frameverify - frame-based evidence retrieval and neural claim verification
"""

__version__ = "0.1.0"
