"""
frameverify application modules
"""
