"""
Tests for the exhol package.
"""
