"""Utility helpers for the sabmm memory model checker."""
