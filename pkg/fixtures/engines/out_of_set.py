"""Moteur factice: affiche une sortie hors de l'ensemble attendu."""
print("t9:ev99=42")
