"""Moteur factice: parcourt les sorties attendues selon l'indice d'exécution."""
import sys

from _header import expected_outputs

outputs = expected_outputs(sys.argv[1])
print(outputs[int(sys.argv[2]) % len(outputs)])
