"""
Source package root.
"""
