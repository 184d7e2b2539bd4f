# ui/__init__.py
"""
Command-line interface package for the ROI exploration simulator.
"""
