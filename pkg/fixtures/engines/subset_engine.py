"""Moteur factice: parcourt un sous-ensemble d'indices donné en troisième argument (ex. 0,2)."""
import sys

from _header import expected_outputs

outputs = expected_outputs(sys.argv[1])
indices = [int(i) for i in sys.argv[3].split(",") if i]
print(outputs[indices[int(sys.argv[2]) % len(indices)]])
