"""Moteur factice: affiche toujours la première sortie attendue."""
import sys

from _header import expected_outputs

print(expected_outputs(sys.argv[1])[0])
