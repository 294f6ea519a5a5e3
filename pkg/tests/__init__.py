"""
Tests for covlearn.
"""
