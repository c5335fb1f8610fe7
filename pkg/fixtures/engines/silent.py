"""Moteur factice: n'affiche rien."""
